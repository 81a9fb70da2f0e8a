//! One function per subcommand. Each writes the echoed config plus its artifacts.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::{json, Value};

use mfg_torus_core::field_ce::{
    abs_continuity_profile, collision_gap, compare_with_hp, continuity_residual, field_along_measure, test_family,
    Coverage,
};
use mfg_torus_core::hj::{EvaluationCurveTable, HjSolver, RunningCost, ValueField};
use mfg_torus_core::measures::{wasserstein1_curves, CurveMeasure};
use mfg_torus_core::mfg::{apply_t, certify_equilibrium, iterate_fixed_point, FixedPointState, MfgProblem};
use mfg_torus_core::models::{capped_hull_convergence_sweep, PerturbedLagrangian, QGrid};
use mfg_torus_core::paths::{cost_matrix_column, extract_optimal_curve, CostMatrix, UNREACHABLE_THRESHOLD};
use mfg_torus_core::torus::TorusGrid;
use mfg_torus_core::Error as CoreError;

use crate::config::{point, Format, RunConfig};
use crate::error::{CliError, Result};
use crate::io::{self, num, Table};

/// Tolerance for `verify` when comparing recomputed numbers to a stored report.
pub const VERIFY_TOLERANCE: f64 = 1e-9;

/// Loaded configuration and output directory.
pub struct Run {
    pub config: RunConfig,
    /// Directory that relative paths in the config refer to.
    pub base: PathBuf,
    pub out: PathBuf,
}

impl Run {
    pub fn new(config: RunConfig, base: PathBuf, out: Option<PathBuf>) -> Result<Self> {
        let out = out.unwrap_or_else(|| base.join(&config.output.directory));
        fs::create_dir_all(&out)?;
        Ok(Self { config, base, out })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn echo_config(&self) -> Result<()> {
        let value = serde_json::to_value(&self.config).map_err(|e| CliError::Config(e.to_string()))?;
        io::write_json(&self.path("config.json"), &value)
    }

    fn problem(&self) -> Result<MfgProblem> {
        let grid = self.config.torus_grid()?;
        let model = self.config.model_spec()?;
        let mu0 = self.config.initial_measure(&grid)?;
        Ok(match self.config.grid.q_max {
            Some(q) => MfgProblem::with_velocity_cap(grid, model, mu0, q)?,
            None => MfgProblem::new(grid, model, mu0)?,
        })
    }

    fn seed(&self, problem: &MfgProblem) -> Result<CurveMeasure> {
        let seed = &self.config.solver.seed;
        if seed == "stationary" {
            return Ok(problem.stationary_seed());
        }
        let xi = io::read_measure_jsonl(&self.base.join(seed))?;
        xi.check_grid(&problem.grid)?;
        Ok(xi)
    }

    /// Value field for the stationary evaluation curve at `μ₀`.
    fn stationary_value_field(&self) -> Result<(MfgProblem, ValueField)> {
        let problem = self.problem()?;
        let vf = problem.value_field(&problem.stationary_seed())?;
        Ok((problem, vf))
    }
}

fn grid_json(grid: &TorusGrid) -> Value {
    json!({
        "dim": grid.dim(),
        "n_x": grid.cells_per_dim(),
        "n_t": grid.n_steps(),
        "horizon": grid.horizon(),
        "dx": grid.dx(),
        "dt": grid.dt(),
    })
}

fn value_table(vf: &ValueField) -> Table {
    let grid = vf.grid();
    let mut header = vec![String::from("k"), String::from("t_k"), String::from("i")];
    header.extend(io::coord_header(grid, "x_i"));
    header.extend([String::from("v"), String::from("successor")]);
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut t = Table::new(&header);
    for k in 0..=vf.n_steps() {
        for i in 0..vf.n_cells() {
            let mut row = vec![k.to_string(), num(grid.time(k)), i.to_string()];
            row.extend(io::coord_fields(grid, i));
            row.push(num(vf.value(i, k)));
            row.push(if k < vf.n_steps() { vf.successor(i, k).to_string() } else { String::new() });
            t.row(row);
        }
    }
    t
}

fn curves_table(grid: &TorusGrid, xi: &CurveMeasure) -> Table {
    let mut header = vec![String::from("curve"), String::from("weight"), String::from("k"), String::from("t_k"), String::from("cell")];
    header.extend(io::coord_header(grid, "x"));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut t = Table::new(&header);
    for (a, (curve, w)) in xi.atoms().iter().enumerate() {
        for (k, &cell) in curve.nodes().iter().enumerate() {
            let mut row = vec![a.to_string(), num(*w), k.to_string(), num(grid.time(k)), cell.to_string()];
            row.extend(io::coord_fields(grid, cell));
            t.row(row);
        }
    }
    t
}

fn slices_table(grid: &TorusGrid, xi: &CurveMeasure) -> Table {
    let mut header = vec![String::from("k"), String::from("t_k"), String::from("cell")];
    header.extend(io::coord_header(grid, "x"));
    header.push(String::from("mass"));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut t = Table::new(&header);
    for k in 0..=xi.n_steps() {
        for &(cell, m) in xi.marginal(k).atoms() {
            let mut row = vec![k.to_string(), num(grid.time(k)), cell.to_string()];
            row.extend(io::coord_fields(grid, cell));
            row.push(num(m));
            t.row(row);
        }
    }
    t
}

pub fn solve_hj(run: &Run) -> Result<()> {
    run.echo_config()?;
    let (problem, vf) = run.stationary_value_field()?;
    if run.config.wants(Format::Csv) {
        value_table(&vf).write(&run.path("value.csv"))?;
    }
    let v0 = vf.slice(0);
    let meta = json!({
        "command": "solve-hj",
        "grid": grid_json(&problem.grid),
        "velocity_cap": vf.velocity_cap(),
        "n_cells": vf.n_cells(),
        "v0_min": v0.iter().copied().fold(f64::INFINITY, f64::min),
        "v0_max": v0.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    });
    io::write_json(&run.path("solve_hj.json"), &meta)
}

pub fn optimal_curves(run: &Run) -> Result<()> {
    run.echo_config()?;
    let (problem, vf) = run.stationary_value_field()?;
    let atoms: Vec<_> = problem.mu0.atoms().iter().map(|&(c, w)| (extract_optimal_curve(&vf, c), w)).collect();
    let records: Vec<Value> = atoms
        .iter()
        .map(|(c, w)| json!({ "weight": w, "nodes": c.nodes(), "action": c.action() }))
        .collect();
    let xi = CurveMeasure::new(atoms)?;
    if run.config.wants(Format::Csv) {
        curves_table(&problem.grid, &xi).write(&run.path("curves.csv"))?;
    }
    io::write_jsonl(&run.path("curves.jsonl"), &records)
}

/// Columns are independent backward solves, run in parallel over end cells.
pub fn parallel_cost_matrix(solver: &HjSolver) -> Result<CostMatrix> {
    let n = solver.grid().n_cells();
    let columns = (0..n)
        .into_par_iter()
        .map(|y| cost_matrix_column(solver, y))
        .collect::<std::result::Result<Vec<_>, CoreError>>()?;
    Ok(CostMatrix::from_columns(&columns))
}

pub fn cost_matrix(run: &Run) -> Result<()> {
    run.echo_config()?;
    let problem = run.problem()?;
    let ev = EvaluationCurveTable::stationary(&problem.mu0, problem.grid.n_steps());
    let running = RunningCost::frozen(&problem.grid, &problem.model, &ev)?;
    let solver = HjSolver::new(std::sync::Arc::new(running), problem.velocity_cap)?;
    let s = parallel_cost_matrix(&solver)?;
    let n = s.n_cells();
    if run.config.wants(Format::Csv) {
        let mut text = String::new();
        for x in 0..n {
            let row: Vec<String> = (0..n).map(|y| num(s.get(x, y))).collect();
            text.push_str(&row.join(","));
            text.push('\n');
        }
        fs::write(run.path("cost_matrix.csv"), text)?;
    }
    let unreachable = s.entries().iter().filter(|&&v| v >= UNREACHABLE_THRESHOLD).count();
    let meta = json!({
        "command": "cost-matrix",
        "grid": grid_json(&problem.grid),
        "velocity_cap": problem.velocity_cap,
        "n_cells": n,
        "unreachable_pairs": unreachable,
        "unreachable_threshold": UNREACHABLE_THRESHOLD,
        "min_finite": s.min_finite(),
    });
    io::write_json(&run.path("cost_matrix.json"), &meta)
}

fn fields_json(fields: &[(String, f64)]) -> Value {
    let map: BTreeMap<&str, f64> = fields.iter().map(|(k, v)| (k.as_str(), *v)).collect();
    json!(map)
}

pub fn mfg(run: &Run) -> Result<()> {
    run.echo_config()?;
    let problem = run.problem()?;
    let seed = run.seed(&problem)?;
    let state = iterate_fixed_point(&problem, run.config.iteration_settings(), &seed)?;
    let report = certify_equilibrium(&problem, &state)?;

    let history: Vec<Value> = state
        .history
        .iter()
        .map(|r| json!({ "iterate": r.iterate, "residual": r.residual, "certificate_gap": r.certificate_gap, "atoms": r.atoms }))
        .collect();
    io::write_jsonl(&run.path("history.jsonl"), &history)?;
    io::write_jsonl(&run.path("xi.jsonl"), &io::measure_json(&report.xi))?;

    let continuity: Vec<Value> = report
        .continuity
        .iter()
        .map(|r| json!({ "id": r.id, "lhs": r.lhs, "rhs": r.rhs, "residual": r.residual }))
        .collect();
    let body = json!({
        "status": report.status.as_str(),
        "iterations": report.iterations,
        "alpha": state.alpha,
        "grid": grid_json(&problem.grid),
        "chain_holds": report.chain_holds(VERIFY_TOLERANCE),
        "max_continuity_residual": report.max_continuity_residual(),
        "fields": fields_json(&report.numeric_fields()),
        "continuity": continuity,
        "xi": io::measure_json(&report.xi),
    });
    io::write_json(&run.path("report.json"), &body)?;
    if run.config.wants(Format::Csv) {
        value_table(&report.value_field).write(&run.path("value.csv"))?;
        curves_table(&problem.grid, &report.xi).write(&run.path("xi_curves.csv"))?;
        slices_table(&problem.grid, &report.xi).write(&run.path("xi_slices.csv"))?;
    }
    Ok(())
}

/// Outcome of comparing a stored report against recomputed numbers.
#[derive(Debug)]
pub struct Verification {
    pub max_deviation: f64,
    pub mismatches: Vec<String>,
}

/// Recompute the certificate numbers of `report_path` from its `ξ*`.
pub fn verify(run: &Run, report_path: &Path) -> Result<Verification> {
    let report = io::read_json(report_path)?;
    let problem = run.problem()?;
    let grid = &problem.grid;
    let stored_grid = &report["grid"];
    for (key, expected) in [("dim", grid.dim()), ("n_x", grid.cells_per_dim()), ("n_t", grid.n_steps())] {
        let found = stored_grid[key].as_u64().ok_or_else(|| CliError::Parse {
            what: report_path.display().to_string(),
            msg: format!("grid.{key} missing"),
        })? as usize;
        if found != expected {
            return Err(CoreError::DimensionMismatch { expected, found }.into());
        }
    }
    let rows = report["xi"].as_array().cloned().unwrap_or_default();
    let xi = io::measure_from_json(&rows, &report_path.display().to_string())?;
    xi.check_grid(grid)?;

    let image = apply_t(&problem, &xi)?;
    let residual = wasserstein1_curves(grid, &xi, &image.measure)?;
    let status = match report["status"].as_str() {
        Some("converged") => mfg_torus_core::mfg::FixedPointStatus::Converged,
        _ => mfg_torus_core::mfg::FixedPointStatus::NoConvergence,
    };
    let state = FixedPointState {
        iterate: report["iterations"].as_u64().unwrap_or(0) as usize,
        xi,
        residual,
        certificate_gap: 0.0,
        alpha: report["alpha"].as_f64().unwrap_or(run.config.solver.alpha),
        status,
        history: Vec::new(),
    };
    let recomputed = certify_equilibrium(&problem, &state)?;
    let fresh: BTreeMap<String, f64> = recomputed.numeric_fields().into_iter().collect();
    let stored: BTreeMap<String, f64> = report["fields"]
        .as_object()
        .map(|m| m.iter().filter_map(|(k, v)| v.as_f64().map(|v| (k.clone(), v))).collect())
        .unwrap_or_default();

    let mut mismatches = Vec::new();
    let mut max_deviation = 0.0f64;
    for (k, v) in &fresh {
        match stored.get(k) {
            None => mismatches.push(format!("{k}: missing from report")),
            Some(s) => {
                let d = (s - v).abs();
                max_deviation = max_deviation.max(d);
                if d.is_nan() || d > VERIFY_TOLERANCE {
                    mismatches.push(format!("{k}: stored {s:e}, recomputed {v:e}"));
                }
            }
        }
    }
    for k in stored.keys().filter(|k| !fresh.contains_key(*k)) {
        mismatches.push(format!("{k}: not produced by recomputation"));
    }
    let body = json!({
        "report": report_path.display().to_string(),
        "pass": mismatches.is_empty(),
        "tolerance": VERIFY_TOLERANCE,
        "max_deviation": max_deviation,
        "mismatches": mismatches,
    });
    io::write_json(&run.path("verify.json"), &body)?;
    Ok(Verification { max_deviation, mismatches })
}

pub fn fenchel_sweep(run: &Run) -> Result<()> {
    run.echo_config()?;
    let problem = run.problem()?;
    let grid = &problem.grid;
    let fc = &run.config.fenchel;
    let x = grid.center(grid.nearest_cell(point(&fc.x)));
    let dq = fc.dq.unwrap_or(grid.dx() / grid.dt() / 8.0);
    let gaps = capped_hull_convergence_sweep(&problem.model, grid, x, &problem.mu0, fc.window, dq, &fc.betas)?;

    let mut sweep = Table::new(&["beta", "gap"]);
    let mut probes = Table::new(&["beta", "scale", "p0", "p1", "unbounded", "value"]);
    let mut flags_exact = true;
    for (&beta, gap) in fc.betas.iter().zip(&gaps) {
        sweep.row(vec![num(beta), num(*gap)]);
        let lb = PerturbedLagrangian::new(&problem.model, grid, &problem.mu0, beta, None)?;
        let q = QGrid::new(grid.dim(), 4.0 * fc.window.max(beta), dq)?;
        for &scale in &fc.probe_scales {
            let p = [scale * beta, 0.0];
            let c = lb.conjugate(x, &q, p);
            flags_exact &= c.is_unbounded() == (scale > 1.0);
            probes.row(vec![
                num(beta),
                num(scale),
                num(p[0]),
                num(p[1]),
                c.is_unbounded().to_string(),
                c.value().map(num).unwrap_or_default(),
            ]);
        }
    }
    if run.config.wants(Format::Csv) {
        sweep.write(&run.path("fenchel_sweep.csv"))?;
        probes.write(&run.path("fenchel_probes.csv"))?;
    }
    let monotone = gaps.windows(2).all(|w| w[1] <= w[0]);
    let meta = json!({
        "command": "fenchel-sweep",
        "x": x[..grid.dim()],
        "window": fc.window,
        "dq": dq,
        "betas": fc.betas,
        "gaps": gaps,
        "gaps_nonincreasing": monotone,
        "flags_exact": flags_exact,
    });
    io::write_json(&run.path("fenchel_sweep.json"), &meta)
}

pub fn continuity_check(run: &Run) -> Result<()> {
    run.echo_config()?;
    let problem = run.problem()?;
    let grid = &problem.grid;
    let seed = run.seed(&problem)?;
    let image = apply_t(&problem, &seed)?;
    let xi = &image.measure;
    let samples = field_along_measure(xi, &image.value_field)?;
    let residuals = continuity_residual(grid, xi, &samples, &test_family(grid.dim()), Coverage::Strict)?;
    let cmp = compare_with_hp(&image.value_field, &samples, &problem.model, 10.0 * grid.dx());
    let m = &problem.model;
    let abs = if m.kinetic_exponent > 1.0 + m.eps0 { Some(abs_continuity_profile(grid, xi, m.eps0)?) } else { None };

    if run.config.wants(Format::Csv) {
        let mut t = Table::new(&["id", "lhs", "rhs", "residual"]);
        for r in &residuals {
            t.row(vec![r.id.clone(), num(r.lhs), num(r.rhs), num(r.residual)]);
        }
        t.write(&run.path("continuity.csv"))?;
    }
    let meta = json!({
        "command": "continuity-check",
        "grid": grid_json(grid),
        "residuals": residuals.iter().map(|r| json!({ "id": r.id, "residual": r.residual })).collect::<Vec<_>>(),
        "max_residual": residuals.iter().fold(0.0f64, |a, r| a.max(r.residual)),
        "hp_median": cmp.median,
        "hp_max": cmp.max,
        "kink_count": cmp.kink_count,
        "samples": cmp.gaps.len(),
        "collision_gap": collision_gap(&samples),
        "abs_continuity": abs,
    });
    io::write_json(&run.path("continuity.json"), &meta)
}
