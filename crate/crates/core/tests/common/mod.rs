#![allow(dead_code)]

use mfg_torus_core::hj::EvaluationCurveTable;
use mfg_torus_core::measures::AtomicTorusMeasure;
use mfg_torus_core::mfg::MfgProblem;
use mfg_torus_core::models::{ModelSpec, TrigPoly};
use mfg_torus_core::torus::{wrap_signed, TorusGrid};

/// Quadratic kinetic term, no potential, `g = cos(2πx)`.
pub fn hopf_lax_model() -> ModelSpec {
    let mut m = ModelSpec::free_quadratic(1);
    m.final_base = TrigPoly::cosine([1, 0], 1.0);
    m
}

/// Dense minimization of `cos(2πy) + |y − x|²_per / (2T)`.
pub fn hopf_lax_oracle(x: f64, horizon: f64) -> f64 {
    let samples = 200_000;
    let mut best = f64::INFINITY;
    for s in 0..samples {
        let y = s as f64 / samples as f64;
        let d = wrap_signed(y - x);
        best = best.min((2.0 * std::f64::consts::PI * y).cos() + d * d / (2.0 * horizon));
    }
    best
}

/// One-dimensional coupled model with a two-mode potential.
pub fn coupled_model_1d() -> ModelSpec {
    let mut m = ModelSpec::free_quadratic(1);
    m.potential = TrigPoly::cosine([1, 0], 0.4).with_term([2, 0], 0.0, 0.2);
    m.kernel = TrigPoly::cosine([1, 0], 1.0);
    m.coupling_weight = 0.5;
    m.final_base = TrigPoly::cosine([1, 0], 0.8).with_term([3, 0], 0.1, 0.2);
    m
}

/// Cubic kinetic term.
pub fn cubic_model_1d() -> ModelSpec {
    let mut m = coupled_model_1d();
    m.kinetic_exponent = 3.0;
    m.eps0 = 0.5;
    m.kernel = TrigPoly::cosine([1, 0], 0.5).with_term([2, 0], 0.0, 0.5);
    m
}

pub fn coupled_model_2d() -> ModelSpec {
    let mut m = ModelSpec::free_quadratic(2);
    m.potential = TrigPoly::cosine([1, 1], 0.3).with_term([0, 1], 0.0, 0.2);
    m.kernel = TrigPoly::cosine([1, 0], 1.0).with_term([0, 1], 0.5, 0.0);
    m.coupling_weight = 0.4;
    m.final_base = TrigPoly::cosine([1, 0], 0.6).with_term([0, 1], 0.0, 0.4);
    m
}

/// Evaluation curve whose atoms drift across the grid.
pub fn moving_eval_curve(grid: &TorusGrid) -> EvaluationCurveTable {
    let n = grid.n_cells();
    EvaluationCurveTable::new(
        (0..=grid.n_steps())
            .map(|k| AtomicTorusMeasure::new(vec![(k % n, 0.6), ((3 * k + n / 2) % n, 0.4)]).unwrap())
            .collect(),
    )
}

/// Initial atoms at fixed positions, mapped to the nearest cells of `grid`.
pub fn atoms_at(grid: &TorusGrid, spec: &[(f64, f64)]) -> AtomicTorusMeasure {
    AtomicTorusMeasure::new(spec.iter().map(|&(x, w)| (grid.nearest_cell([x, 0.0]), w)).collect()).unwrap()
}

pub const WEAK_COUPLING_ATOMS: [(f64, f64); 4] = [(0.11, 0.2), (0.33, 0.3), (0.64, 0.25), (0.86, 0.25)];

/// Weak mean-field coupling: `c_F = 0.05`, `κ = cos(2πx)`, `g = cos(2πx)`, `T = 1`.
pub fn weak_coupling(n: usize) -> MfgProblem {
    let grid = TorusGrid::new(1, n, n, 1.0).unwrap();
    let mut m = ModelSpec::free_quadratic(1);
    m.kernel = TrigPoly::cosine([1, 0], 1.0);
    m.coupling_weight = 0.05;
    m.final_base = TrigPoly::cosine([1, 0], 1.0);
    let mu0 = atoms_at(&grid, &WEAK_COUPLING_ATOMS);
    MfgProblem::new(grid, m, mu0).unwrap()
}

/// Decoupled quadratic benchmark with `μ₀` uniform over all cells.
pub fn hopf_lax_problem(n: usize) -> MfgProblem {
    let grid = TorusGrid::new(1, n, n, 1.0).unwrap();
    let cells: Vec<usize> = (0..n).collect();
    MfgProblem::new(grid, hopf_lax_model(), AtomicTorusMeasure::uniform(&cells).unwrap()).unwrap()
}
