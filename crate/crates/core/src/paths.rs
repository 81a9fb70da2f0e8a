//! Optimal discrete curves, their action, occupation measures and the
//! minimal-cost matrix between cells.

use alloc::collections::BTreeMap;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::hj::{EvaluationCurveTable, HjSolver, RunningCost, ValueField};
use crate::models::ModelSpec;
use crate::torus::TorusGrid;
use crate::{Error, Result};

/// Final-datum sentinel for cells a pinned-endpoint solve must not end in.
pub const LARGE: f64 = 1e9;
/// Entries at or above this are treated as unreachable.
pub const UNREACHABLE_THRESHOLD: f64 = LARGE / 2.0;

/// A path sampled at the grid times `t_0..t_{n_t}`.
///
/// Equality compares nodes only; the cached action is ignored.
#[derive(Clone, Debug)]
pub struct DiscreteCurve {
    nodes: Vec<usize>,
    action: Option<f64>,
}

impl PartialEq for DiscreteCurve {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes
    }
}

impl Eq for DiscreteCurve {}

impl DiscreteCurve {
    pub fn new(nodes: Vec<usize>) -> Self {
        Self { nodes, action: None }
    }

    pub fn with_action(nodes: Vec<usize>, action: f64) -> Self {
        Self { nodes, action: Some(action) }
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    /// Cached action, if the curve was built by an action-aware routine.
    pub fn action(&self) -> Option<f64> {
        self.action
    }

    pub fn start(&self) -> usize {
        self.nodes[0]
    }

    pub fn end(&self) -> usize {
        self.nodes[self.nodes.len() - 1]
    }

    /// Every step stays within distance `reach`.
    pub fn is_feasible(&self, grid: &TorusGrid, reach: f64) -> bool {
        let limit = reach * (1.0 + 1e-12);
        self.nodes.iter().all(|&c| c < grid.n_cells())
            && self.nodes.windows(2).all(|w| grid.cell_distance(w[0], w[1]) <= limit)
    }

    /// Largest one-step speed along the curve.
    pub fn max_speed(&self, grid: &TorusGrid) -> f64 {
        self.nodes
            .windows(2)
            .map(|w| grid.cell_distance(w[0], w[1]) / grid.dt())
            .fold(0.0, f64::max)
    }
}

/// Follow successor pointers from `(start, 0)`.
pub fn extract_optimal_curve(vf: &ValueField, start: usize) -> DiscreteCurve {
    let n_t = vf.n_steps();
    let mut nodes = Vec::with_capacity(n_t + 1);
    nodes.push(start);
    let mut c = start;
    for k in 0..n_t {
        c = vf.successor(c, k);
        nodes.push(c);
    }
    let action = vf.path_cost(&nodes);
    DiscreteCurve::with_action(nodes, action)
}

/// Rectangle-rule action `Σ_k dt · L(x_k, ξ(t_k), δ_k/dt)`, evaluated from the model.
pub fn action_of(grid: &TorusGrid, curve: &DiscreteCurve, model: &ModelSpec, eval_curve: &EvaluationCurveTable) -> f64 {
    let dt = grid.dt();
    curve
        .nodes()
        .windows(2)
        .enumerate()
        .map(|(k, w)| {
            let q = grid.step_velocity(w[0], w[1]);
            dt * model.lagrangian(grid, grid.center(w[0]), eval_curve.slice(k), q)
        })
        .sum()
}

/// Space-time occupation weights of a curve, `1/n_t` at each `(nodes[k], k)`, `k < n_t`.
#[derive(Clone, Debug, PartialEq)]
pub struct OccupationHistogram {
    n_steps: usize,
    weights: BTreeMap<(usize, usize), f64>,
}

impl OccupationHistogram {
    /// Entries keyed by `(cell, k)`.
    pub fn weights(&self) -> &BTreeMap<(usize, usize), f64> {
        &self.weights
    }

    pub fn weight(&self, cell: usize, k: usize) -> f64 {
        self.weights.get(&(cell, k)).copied().unwrap_or(0.0)
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.values().sum()
    }

    /// Mass at time index `k`, summed over cells.
    pub fn time_marginal(&self, k: usize) -> f64 {
        self.weights.iter().filter(|((_, kk), _)| *kk == k).map(|(_, w)| w).sum()
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }
}

pub fn occupation_histogram(curve: &DiscreteCurve) -> OccupationHistogram {
    let n_t = curve.nodes().len().saturating_sub(1);
    let mut weights = BTreeMap::new();
    if n_t > 0 {
        let w = 1.0 / n_t as f64;
        for (k, &c) in curve.nodes()[..n_t].iter().enumerate() {
            *weights.entry((c, k)).or_insert(0.0) += w;
        }
    }
    OccupationHistogram { n_steps: n_t, weights }
}

/// Minimal action `S(x, y)` between cell centers, stored row-major by start cell.
#[derive(Clone, Debug, PartialEq)]
pub struct CostMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl CostMatrix {
    pub fn from_entries(n: usize, entries: Vec<f64>) -> Self {
        assert_eq!(entries.len(), n * n, "cost matrix must be square");
        Self { n, entries }
    }

    /// Assemble from columns, `columns[y][x] = S(x, y)`.
    pub fn from_columns(columns: &[Vec<f64>]) -> Self {
        let n = columns.len();
        let mut entries = alloc::vec![0.0; n * n];
        for (y, col) in columns.iter().enumerate() {
            assert_eq!(col.len(), n, "cost matrix column length");
            for (x, &v) in col.iter().enumerate() {
                entries[x * n + y] = v;
            }
        }
        Self { n, entries }
    }

    pub fn n_cells(&self) -> usize {
        self.n
    }

    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.entries[from * self.n + to]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn is_reachable(&self, from: usize, to: usize) -> bool {
        self.get(from, to) < UNREACHABLE_THRESHOLD
    }

    /// First unreachable pair, if any.
    pub fn first_unreachable(&self) -> Option<(usize, usize)> {
        self.entries
            .iter()
            .position(|&v| v >= UNREACHABLE_THRESHOLD)
            .map(|p| (p / self.n, p % self.n))
    }

    /// Smallest finite entry.
    pub fn min_finite(&self) -> f64 {
        self.entries
            .iter()
            .filter(|&&v| v < UNREACHABLE_THRESHOLD)
            .fold(f64::INFINITY, |m, &v| m.min(v))
    }
}

/// Pinned-endpoint final datum: 0 at `end`, `LARGE` elsewhere.
pub fn pinned_datum(n_cells: usize, end: usize) -> Vec<f64> {
    let mut g = alloc::vec![LARGE; n_cells];
    g[end] = 0.0;
    g
}

/// Column `S(·, end)` from one pinned-endpoint backward solve.
pub fn cost_matrix_column(solver: &HjSolver, end: usize) -> Result<Vec<f64>> {
    let vf = solver.solve(&pinned_datum(solver.grid().n_cells(), end))?;
    Ok(vf.slice(0).to_vec())
}

/// Solver shared by all columns of the cost matrix.
pub fn cost_matrix_solver(
    grid: &TorusGrid,
    model: &ModelSpec,
    eval_curve: &EvaluationCurveTable,
    q_max: f64,
) -> Result<HjSolver> {
    let running = RunningCost::frozen(grid, model, eval_curve)?;
    HjSolver::new(Arc::new(running), q_max)
}

/// Cost matrix that keeps `LARGE`-scale entries for unreachable pairs.
pub fn cost_matrix_partial(
    grid: &TorusGrid,
    model: &ModelSpec,
    eval_curve: &EvaluationCurveTable,
    q_max: f64,
) -> Result<CostMatrix> {
    let solver = cost_matrix_solver(grid, model, eval_curve, q_max)?;
    let columns = (0..grid.n_cells())
        .map(|y| cost_matrix_column(&solver, y))
        .collect::<Result<Vec<_>>>()?;
    Ok(CostMatrix::from_columns(&columns))
}

/// Cost matrix with every pair reachable inside the `q_max` stencil.
pub fn cost_matrix(
    grid: &TorusGrid,
    model: &ModelSpec,
    eval_curve: &EvaluationCurveTable,
    q_max: f64,
) -> Result<CostMatrix> {
    let s = cost_matrix_partial(grid, model, eval_curve, q_max)?;
    match s.first_unreachable() {
        Some((from, to)) => Err(Error::Unreachable { from, to }),
        None => Ok(s),
    }
}
