//! Damped fixed-point search for equilibria over measures on curves.
//!
//! The map `T(ξ)` freezes the coupling along the evaluation curve of `ξ`,
//! takes the final datum `g(·, ξ(T))`, solves the backward recursion and sends
//! every atom of `μ₀` along its tie-broken optimal curve.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::field_ce::{
    abs_continuity_profile, continuity_residual, field_along_measure, test_family, ContinuityResidual, Coverage,
};
use crate::hj::{HjSolver, RunningCost, ValueField};
use crate::measures::{
    evaluation_curve, optimality_certificate, transport_cost, wasserstein1_curves, AtomicTorusMeasure, CurveMeasure,
};
use crate::models::ModelSpec;
use crate::paths::{cost_matrix_partial, extract_optimal_curve};
use crate::torus::TorusGrid;
use crate::{Error, Result};

/// Grid, model, initial distribution and the velocity cap shared by all iterates.
#[derive(Clone, Debug, PartialEq)]
pub struct MfgProblem {
    pub grid: TorusGrid,
    pub model: ModelSpec,
    pub mu0: AtomicTorusMeasure,
    pub velocity_cap: f64,
}

impl MfgProblem {
    /// Problem with the measure-independent velocity cap of the model.
    pub fn new(grid: TorusGrid, model: ModelSpec, mu0: AtomicTorusMeasure) -> Result<Self> {
        let cap = model.uniform_velocity_cap(&grid);
        Self::with_velocity_cap(grid, model, mu0, cap)
    }

    pub fn with_velocity_cap(grid: TorusGrid, model: ModelSpec, mu0: AtomicTorusMeasure, velocity_cap: f64) -> Result<Self> {
        model.validate()?;
        if model.dim != grid.dim() {
            return Err(Error::DimensionMismatch { expected: grid.dim(), found: model.dim });
        }
        mu0.check_cells(grid.n_cells())?;
        if (mu0.total_mass() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidMeasure("initial measure is not a probability measure"));
        }
        grid.stencil(velocity_cap * grid.dt())?;
        Ok(Self { grid, model, mu0, velocity_cap })
    }

    /// Backward solution for the coupling frozen along `ξ`.
    pub fn value_field(&self, xi: &CurveMeasure) -> Result<ValueField> {
        xi.check_grid(&self.grid)?;
        let ev = evaluation_curve(xi);
        let running = RunningCost::frozen(&self.grid, &self.model, &ev)?;
        let datum = self.model.final_datum(&self.grid, ev.slice(self.grid.n_steps()));
        HjSolver::new(Arc::new(running), self.velocity_cap)?.solve(&datum)
    }

    /// Seed that keeps every atom of `μ₀` at rest.
    pub fn stationary_seed(&self) -> CurveMeasure {
        CurveMeasure::stationary(&self.mu0, self.grid.n_steps())
    }
}

/// Image `T(ξ)` together with the value field it was extracted from.
#[derive(Clone, Debug)]
pub struct TImage {
    pub measure: CurveMeasure,
    pub value_field: ValueField,
}

pub fn apply_t(problem: &MfgProblem, xi: &CurveMeasure) -> Result<TImage> {
    let vf = problem.value_field(xi)?;
    let atoms = problem
        .mu0
        .atoms()
        .iter()
        .map(|&(cell, w)| (extract_optimal_curve(&vf, cell), w))
        .collect();
    Ok(TImage { measure: CurveMeasure::new(atoms)?, value_field: vf })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FixedPointStatus {
    Converged,
    NoConvergence,
}

impl FixedPointStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            FixedPointStatus::Converged => "converged",
            FixedPointStatus::NoConvergence => "no-convergence",
        }
    }
}

/// Summary of one iterate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterateRecord {
    pub iterate: usize,
    /// Curve-space W1 between the iterate and its image.
    pub residual: f64,
    /// Certificate gap of the image against its own value field.
    pub certificate_gap: f64,
    pub atoms: usize,
}

/// Last iterate of a fixed-point run with its history.
#[derive(Clone, Debug)]
pub struct FixedPointState {
    pub iterate: usize,
    pub xi: CurveMeasure,
    pub residual: f64,
    pub certificate_gap: f64,
    pub alpha: f64,
    pub status: FixedPointStatus,
    pub history: Vec<IterateRecord>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationSettings {
    pub alpha: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for IterationSettings {
    fn default() -> Self {
        Self { alpha: 0.5, tol: 1e-10, max_iter: 50 }
    }
}

/// Damped Picard iteration `ξ ← (1 − α) ξ + α T(ξ)`.
///
/// Iterate 1 is `T(seed)`. The residual of iterate `j` is the curve-space W1
/// distance to its image; the run stops at the first residual `≤ tol` or at
/// `max_iter`. With `max_iter = 0` the seed itself is reported.
pub fn iterate_fixed_point(problem: &MfgProblem, settings: IterationSettings, seed: &CurveMeasure) -> Result<FixedPointState> {
    let IterationSettings { alpha, tol, max_iter } = settings;
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidModel("damping must lie in (0, 1]"));
    }
    seed.check_grid(&problem.grid)?;
    let grid = &problem.grid;
    let record = |j: usize, xi: &CurveMeasure| -> Result<(TImage, IterateRecord)> {
        let image = apply_t(problem, xi)?;
        let residual = wasserstein1_curves(grid, xi, &image.measure)?;
        let gap = optimality_certificate(&image.measure, &image.value_field).gap;
        Ok((image, IterateRecord { iterate: j, residual, certificate_gap: gap, atoms: xi.len() }))
    };

    if max_iter == 0 {
        let (_, rec) = record(0, seed)?;
        return Ok(FixedPointState {
            iterate: 0,
            xi: seed.clone(),
            residual: rec.residual,
            certificate_gap: rec.certificate_gap,
            alpha,
            status: FixedPointStatus::NoConvergence,
            history: alloc::vec![rec],
        });
    }

    let mut xi = apply_t(problem, seed)?.measure;
    let mut history = Vec::new();
    let mut j = 1;
    loop {
        let (image, rec) = record(j, &xi)?;
        history.push(rec);
        let done = rec.residual <= tol;
        if done || j >= max_iter {
            let status = if done { FixedPointStatus::Converged } else { FixedPointStatus::NoConvergence };
            return Ok(FixedPointState {
                iterate: j,
                xi,
                residual: rec.residual,
                certificate_gap: rec.certificate_gap,
                alpha,
                status,
                history,
            });
        }
        xi = xi.mix(&image.measure, alpha)?.pin_initial(&problem.mu0)?;
        j += 1;
    }
}

/// Certificate numbers for a fixed-point state.
#[derive(Clone, Debug)]
pub struct EquilibriumReport {
    pub status: FixedPointStatus,
    pub iterations: usize,
    pub residual: f64,
    /// Certificate gap of `ξ*` against the value field of its own coupling.
    pub certificate_gap: f64,
    /// Certificate gap of `T(ξ*)`.
    pub image_certificate_gap: f64,
    /// `∫ A dξ*`.
    pub integrated_action: f64,
    /// `S_T(μ₀, ξ*(T))`.
    pub transport_cost: f64,
    /// `⟨μ₀, v(·,0)⟩ − ⟨ξ*(T), g⟩`.
    pub dual_difference: f64,
    pub continuity: Vec<ContinuityResidual>,
    /// Discrete `(1+ε₀)*` speed norm of the evaluation curve of `ξ*`.
    pub abs_continuity: Option<f64>,
    pub velocity_cap: f64,
    pub xi: CurveMeasure,
    pub value_field: ValueField,
}

impl EquilibriumReport {
    /// `∫A ≥ S_T ≥ dual difference`, each within `slack`.
    pub fn chain_holds(&self, slack: f64) -> bool {
        self.integrated_action >= self.transport_cost - slack && self.transport_cost >= self.dual_difference - slack
    }

    pub fn max_continuity_residual(&self) -> f64 {
        self.continuity.iter().fold(0.0, |m, r| m.max(r.residual))
    }

    /// Every number in the report as a named scalar, in a fixed order.
    pub fn numeric_fields(&self) -> Vec<(String, f64)> {
        let mut out = alloc::vec![
            (String::from("residual"), self.residual),
            (String::from("certificate_gap"), self.certificate_gap),
            (String::from("image_certificate_gap"), self.image_certificate_gap),
            (String::from("integrated_action"), self.integrated_action),
            (String::from("transport_cost"), self.transport_cost),
            (String::from("dual_difference"), self.dual_difference),
            (String::from("velocity_cap"), self.velocity_cap),
        ];
        if let Some(a) = self.abs_continuity {
            out.push((String::from("abs_continuity"), a));
        }
        for r in &self.continuity {
            out.push((format!("continuity[{}]", r.id), r.residual));
        }
        for (i, v) in self.value_field.slice(0).iter().enumerate() {
            out.push((format!("v0[{i}]"), *v));
        }
        for (cell, w) in self.xi.final_measure().atoms() {
            out.push((format!("final_mass[{cell}]"), *w));
        }
        out
    }
}

/// Re-solve at `ξ*` and assemble certificate, duality chain and continuity diagnostics.
pub fn certify_equilibrium(problem: &MfgProblem, state: &FixedPointState) -> Result<EquilibriumReport> {
    let grid = &problem.grid;
    let xi = &state.xi;
    let image = apply_t(problem, xi)?;
    let vf = image.value_field;
    let cert = optimality_certificate(xi, &vf);
    let image_cert = optimality_certificate(&image.measure, &vf);

    let ev = evaluation_curve(xi);
    let s = cost_matrix_partial(grid, &problem.model, &ev, problem.velocity_cap)?;
    let (transport, _) = transport_cost(&xi.initial_measure(), &xi.final_measure(), &s)?;

    let samples = field_along_measure(&image.measure, &vf)?;
    let continuity = continuity_residual(grid, xi, &samples, &test_family(grid.dim()), Coverage::ZeroExtension)?;
    let model = &problem.model;
    let abs_continuity = if model.kinetic_exponent > 1.0 + model.eps0 {
        Some(abs_continuity_profile(grid, xi, model.eps0)?)
    } else {
        None
    };

    Ok(EquilibriumReport {
        status: state.status,
        iterations: state.iterate,
        residual: state.residual,
        certificate_gap: cert.gap,
        image_certificate_gap: image_cert.gap,
        integrated_action: cert.integrated_action,
        transport_cost: transport,
        dual_difference: cert.initial_value - cert.final_value,
        continuity,
        abs_continuity,
        velocity_cap: problem.velocity_cap,
        xi: xi.clone(),
        value_field: vf,
    })
}

/// Iterate and certify in one call.
pub fn solve_equilibrium(
    problem: &MfgProblem,
    settings: IterationSettings,
    seed: &CurveMeasure,
) -> Result<(FixedPointState, EquilibriumReport)> {
    let state = iterate_fixed_point(problem, settings, seed)?;
    let report = certify_equilibrium(problem, &state)?;
    Ok((state, report))
}
