//! Run configuration: a single JSON file, unknown keys rejected, defaults echoed.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use mfg_torus_core::measures::AtomicTorusMeasure;
use mfg_torus_core::mfg::IterationSettings;
use mfg_torus_core::models::{ModelSpec, TrigPoly, TrigTerm};
use mfg_torus_core::torus::TorusGrid;

use crate::error::{CliError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    #[serde(default)]
    pub model: ModelConfig,
    pub mu0: Mu0Config,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub fenchel: FenchelConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "one")]
    pub dim: usize,
    pub n_x: usize,
    pub n_t: usize,
    #[serde(default = "unit")]
    pub horizon: f64,
    /// Velocity cap override; `null` selects the model default.
    #[serde(default)]
    pub q_max: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default = "two")]
    pub kinetic_exponent: f64,
    #[serde(default = "half")]
    pub eps0: f64,
    #[serde(default)]
    pub potential: TrigConfig,
    #[serde(default)]
    pub kernel: TrigConfig,
    #[serde(default)]
    pub coupling_weight: f64,
    #[serde(default)]
    pub final_base: TrigConfig,
    #[serde(default)]
    pub final_kernel: TrigConfig,
    #[serde(default)]
    pub final_weight: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            kinetic_exponent: 2.0,
            eps0: 0.5,
            potential: TrigConfig::default(),
            kernel: TrigConfig::default(),
            coupling_weight: 0.0,
            final_base: TrigConfig::default(),
            final_kernel: TrigConfig::default(),
            final_weight: 0.0,
        }
    }
}

/// `constant + Σ cos·cos(2π k·x) + sin·sin(2π k·x)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrigConfig {
    #[serde(default)]
    pub constant: f64,
    #[serde(default)]
    pub terms: Vec<TermConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermConfig {
    /// One or two integer wave numbers.
    pub wave: Vec<i32>,
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mu0Config {
    /// Uniform weights over every cell; excludes `atoms`.
    #[serde(default)]
    pub uniform: bool,
    #[serde(default)]
    pub atoms: Vec<AtomConfig>,
}

/// Atom at the cell nearest to `x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomConfig {
    pub x: Vec<f64>,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "half")]
    pub alpha: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// `"stationary"` or a JSONL curve file, relative to the config file.
    #[serde(default = "default_seed")]
    pub seed: String,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { alpha: 0.5, tol: default_tol(), max_iter: default_max_iter(), seed: default_seed() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FenchelConfig {
    #[serde(default = "origin")]
    pub x: Vec<f64>,
    #[serde(default = "unit")]
    pub window: f64,
    /// Velocity spacing; `null` selects `dx/dt / 8`.
    #[serde(default)]
    pub dq: Option<f64>,
    #[serde(default = "default_betas")]
    pub betas: Vec<f64>,
    /// Probe momenta as multiples of each `β`.
    #[serde(default = "default_probe_scales")]
    pub probe_scales: Vec<f64>,
}

impl Default for FenchelConfig {
    fn default() -> Self {
        Self {
            x: origin(),
            window: 1.0,
            dq: None,
            betas: default_betas(),
            probe_scales: default_probe_scales(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_directory")]
    pub directory: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { directory: default_directory(), formats: default_formats() }
    }
}

fn one() -> usize {
    1
}
fn two() -> f64 {
    2.0
}
fn unit() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}
fn origin() -> Vec<f64> {
    vec![0.0, 0.0]
}
fn default_tol() -> f64 {
    1e-10
}
fn default_max_iter() -> usize {
    50
}
fn default_seed() -> String {
    String::from("stationary")
}
fn default_betas() -> Vec<f64> {
    vec![0.25, 0.5, 1.0, 2.0, 4.0, 8.0]
}
fn default_probe_scales() -> Vec<f64> {
    vec![0.25, 0.9, 1.5, 3.0]
}
fn default_directory() -> PathBuf {
    PathBuf::from("out")
}
fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}

impl RunConfig {
    /// Parse and validate; errors carry the line and column of the offending key.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Multiply `n_x` and `n_t` by `scale`.
    pub fn refined(&self, scale: usize) -> Result<Self> {
        if scale == 0 {
            return Err(CliError::Config(String::from("resolution scale must be at least 1")));
        }
        let mut cfg = self.clone();
        cfg.grid.n_x *= scale;
        cfg.grid.n_t *= scale;
        Ok(cfg)
    }

    pub fn wants(&self, format: Format) -> bool {
        self.output.formats.contains(&format)
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(CliError::Config(msg.to_string()));
        let dim = self.grid.dim;
        if dim != 1 && dim != 2 {
            return bad("grid.dim must be 1 or 2");
        }
        if self.grid.q_max.is_some_and(|q| !(q.is_finite() && q > 0.0)) {
            return bad("grid.q_max must be positive");
        }
        for (name, poly) in [
            ("model.potential", &self.model.potential),
            ("model.kernel", &self.model.kernel),
            ("model.final_base", &self.model.final_base),
            ("model.final_kernel", &self.model.final_kernel),
        ] {
            if poly.terms.iter().any(|t| t.wave.is_empty() || t.wave.len() > dim) {
                return Err(CliError::Config(format!("{name}: each wave needs 1 to {dim} entries")));
            }
        }
        if self.mu0.uniform == !self.mu0.atoms.is_empty() {
            return bad("mu0: give either `uniform: true` or a nonempty `atoms` list");
        }
        if self.mu0.atoms.iter().any(|a| a.x.is_empty() || a.x.len() > dim) {
            return Err(CliError::Config(format!("mu0.atoms: each x needs 1 to {dim} coordinates")));
        }
        if self.fenchel.x.is_empty() || self.fenchel.x.len() > 2 {
            return bad("fenchel.x needs 1 or 2 coordinates");
        }
        if self.output.formats.is_empty() {
            return bad("output.formats must not be empty");
        }
        Ok(())
    }

    pub fn torus_grid(&self) -> Result<TorusGrid> {
        let g = &self.grid;
        Ok(TorusGrid::new(g.dim, g.n_x, g.n_t, g.horizon)?)
    }

    pub fn model_spec(&self) -> Result<ModelSpec> {
        let m = &self.model;
        let spec = ModelSpec {
            dim: self.grid.dim,
            kinetic_exponent: m.kinetic_exponent,
            eps0: m.eps0,
            potential: m.potential.to_poly(),
            kernel: m.kernel.to_poly(),
            coupling_weight: m.coupling_weight,
            final_base: m.final_base.to_poly(),
            final_kernel: m.final_kernel.to_poly(),
            final_weight: m.final_weight,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn initial_measure(&self, grid: &TorusGrid) -> Result<AtomicTorusMeasure> {
        if self.mu0.uniform {
            let cells: Vec<usize> = (0..grid.n_cells()).collect();
            return Ok(AtomicTorusMeasure::uniform(&cells)?);
        }
        let atoms = self.mu0.atoms.iter().map(|a| (grid.nearest_cell(point(&a.x)), a.weight)).collect();
        Ok(AtomicTorusMeasure::new(atoms)?)
    }

    pub fn iteration_settings(&self) -> IterationSettings {
        IterationSettings { alpha: self.solver.alpha, tol: self.solver.tol, max_iter: self.solver.max_iter }
    }
}

impl TrigConfig {
    pub fn to_poly(&self) -> TrigPoly {
        TrigPoly {
            constant: self.constant,
            terms: self
                .terms
                .iter()
                .map(|t| TrigTerm {
                    wave: [t.wave[0], t.wave.get(1).copied().unwrap_or(0)],
                    cos: t.cos,
                    sin: t.sin,
                })
                .collect(),
        }
    }
}

pub fn point(x: &[f64]) -> [f64; 2] {
    [x.first().copied().unwrap_or(0.0), x.get(1).copied().unwrap_or(0.0)]
}
