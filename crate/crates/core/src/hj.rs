//! Backward dynamic programming for the Lax–Oleinik value function.
//!
//! The Hamiltonian is frozen along an evaluation curve (one measure per time
//! index), moves go from cell center to cell center inside a velocity
//! stencil, and the running cost of a step is the rectangle rule
//! `dt · L(x_i, t_k, δ/dt)` at the departure cell and time.

use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::measures::AtomicTorusMeasure;
use crate::models::{oscillation, power_term, velocity_cap, ModelSpec};
use crate::torus::{Stencil, TorusGrid};
use crate::{Error, Result};

/// Population measure at every time index `k = 0..=n_t`.
#[derive(Clone, Debug, PartialEq)]
pub struct EvaluationCurveTable {
    slices: Vec<AtomicTorusMeasure>,
}

impl EvaluationCurveTable {
    pub fn new(slices: Vec<AtomicTorusMeasure>) -> Self {
        Self { slices }
    }

    /// The same measure at every time index.
    pub fn stationary(mu: &AtomicTorusMeasure, n_steps: usize) -> Self {
        Self { slices: alloc::vec![mu.clone(); n_steps + 1] }
    }

    pub fn slice(&self, k: usize) -> &AtomicTorusMeasure {
        &self.slices[k]
    }

    pub fn slices(&self) -> &[AtomicTorusMeasure] {
        &self.slices
    }

    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }

    pub fn validate(&self, grid: &TorusGrid) -> Result<()> {
        if self.slices.len() != grid.n_steps() + 1 {
            return Err(Error::DimensionMismatch { expected: grid.n_steps() + 1, found: self.slices.len() });
        }
        for s in &self.slices {
            s.check_cells(grid.n_cells())?;
            if (s.total_mass() - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidMeasure("evaluation slice is not a probability measure"));
            }
        }
        Ok(())
    }
}

/// Lagrangian frozen along an evaluation curve, tabulated per `(k, cell)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RunningCost {
    grid: TorusGrid,
    kinetic_exponent: f64,
    /// `f(x_i) + c_F (κ ⋆ ξ(t_k))(x_i)`, indexed `k * n_cells + i` for `k < n_t`.
    potentials: Vec<f64>,
}

impl RunningCost {
    pub fn frozen(grid: &TorusGrid, model: &ModelSpec, eval_curve: &EvaluationCurveTable) -> Result<Self> {
        model.validate()?;
        if model.dim != grid.dim() {
            return Err(Error::DimensionMismatch { expected: grid.dim(), found: model.dim });
        }
        eval_curve.validate(grid)?;
        let n = grid.n_cells();
        let mut potentials = Vec::with_capacity(grid.n_steps() * n);
        for k in 0..grid.n_steps() {
            let mu = eval_curve.slice(k);
            for i in 0..n {
                let p = model.running_potential(grid, grid.center(i), mu);
                if !p.is_finite() {
                    return Err(Error::NonFiniteValue { cell: i, step: k });
                }
                potentials.push(p);
            }
        }
        Ok(Self { grid: *grid, kinetic_exponent: model.kinetic_exponent, potentials })
    }

    /// Running cost from an explicit potential table, `k * n_cells + i`.
    pub fn from_potentials(grid: &TorusGrid, kinetic_exponent: f64, potentials: Vec<f64>) -> Result<Self> {
        if potentials.len() != grid.n_steps() * grid.n_cells() {
            return Err(Error::DimensionMismatch {
                expected: grid.n_steps() * grid.n_cells(),
                found: potentials.len(),
            });
        }
        Ok(Self { grid: *grid, kinetic_exponent, potentials })
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn kinetic_exponent(&self) -> f64 {
        self.kinetic_exponent
    }

    pub fn potential(&self, cell: usize, k: usize) -> f64 {
        self.potentials[k * self.grid.n_cells() + cell]
    }

    pub fn lagrangian(&self, cell: usize, k: usize, q: [f64; 2]) -> f64 {
        power_term(q, self.kinetic_exponent) - self.potential(cell, k)
    }

    /// `dt · L(x_i, t_k, δ/dt)` for the move `i → j` at time index `k`.
    pub fn step_cost(&self, from: usize, to: usize, k: usize) -> f64 {
        self.grid.dt() * self.lagrangian(from, k, self.grid.step_velocity(from, to))
    }

    /// Rectangle-rule action of a node list, summed forward in time.
    pub fn path_cost(&self, nodes: &[usize]) -> f64 {
        nodes.windows(2).enumerate().map(|(k, w)| self.step_cost(w[0], w[1], k)).sum()
    }

    /// `max |L(x, t, 0)|` over the table.
    pub fn m0(&self) -> f64 {
        self.potentials.iter().fold(0.0, |m, p| m.max(p.abs()))
    }

    /// `min L` over the table (the kinetic term vanishes at rest).
    pub fn m_l(&self) -> f64 {
        self.potentials.iter().fold(f64::INFINITY, |m, &p| m.min(-p))
    }

    /// Default velocity cap for a final datum, at least one cell per step.
    pub fn default_velocity_cap(&self, final_datum: &[f64]) -> f64 {
        velocity_cap(
            self.kinetic_exponent,
            oscillation(final_datum),
            self.m0(),
            self.grid.horizon(),
            self.grid.dt(),
        )
        .max(self.grid.dx() / self.grid.dt())
    }
}

/// Discrete value function with successor pointers.
#[derive(Clone, Debug)]
pub struct ValueField {
    running: Arc<RunningCost>,
    velocity_cap: f64,
    /// `values[k * n_cells + i]`, `k = 0..=n_t`.
    values: Vec<f64>,
    /// `successors[k * n_cells + i]`, `k < n_t`.
    successors: Vec<usize>,
    final_datum: Vec<f64>,
}

impl ValueField {
    pub fn grid(&self) -> &TorusGrid {
        self.running.grid()
    }

    pub fn running_cost(&self) -> &RunningCost {
        &self.running
    }

    pub fn n_steps(&self) -> usize {
        self.grid().n_steps()
    }

    pub fn n_cells(&self) -> usize {
        self.grid().n_cells()
    }

    pub fn velocity_cap(&self) -> f64 {
        self.velocity_cap
    }

    pub fn value(&self, cell: usize, k: usize) -> f64 {
        self.values[k * self.n_cells() + cell]
    }

    /// Values at time index `k` for every cell.
    pub fn slice(&self, k: usize) -> &[f64] {
        let n = self.n_cells();
        &self.values[k * n..(k + 1) * n]
    }

    pub fn successor(&self, cell: usize, k: usize) -> usize {
        self.successors[k * self.n_cells() + cell]
    }

    pub fn final_datum(&self) -> &[f64] {
        &self.final_datum
    }

    pub fn path_cost(&self, nodes: &[usize]) -> f64 {
        self.running.path_cost(nodes)
    }

    /// Largest gap `|v_a − v_b|` over all cells and times.
    pub fn sup_distance(&self, other: &ValueField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Backward solver sharing a running cost and a stencil across final data.
#[derive(Clone, Debug)]
pub struct HjSolver {
    running: Arc<RunningCost>,
    stencil: Stencil,
    step_kinetic: Vec<f64>,
    velocity_cap: f64,
}

impl HjSolver {
    pub fn new(running: Arc<RunningCost>, velocity_cap: f64) -> Result<Self> {
        let grid = *running.grid();
        let stencil = grid.stencil(velocity_cap * grid.dt())?;
        let r = running.kinetic_exponent();
        let step_kinetic = stencil.offsets.iter().map(|&o| power_term(grid.offset_velocity(o), r)).collect();
        Ok(Self { running, stencil, step_kinetic, velocity_cap })
    }

    pub fn grid(&self) -> &TorusGrid {
        self.running.grid()
    }

    pub fn stencil(&self) -> &Stencil {
        &self.stencil
    }

    pub fn running_cost(&self) -> &Arc<RunningCost> {
        &self.running
    }

    pub fn velocity_cap(&self) -> f64 {
        self.velocity_cap
    }

    /// Backward sweep from `final_datum` at `t = T` to `t = 0`.
    pub fn solve(&self, final_datum: &[f64]) -> Result<ValueField> {
        let grid = *self.grid();
        let n = grid.n_cells();
        let n_t = grid.n_steps();
        if final_datum.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: final_datum.len() });
        }
        if let Some(i) = final_datum.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue { cell: i, step: n_t });
        }
        let dt = grid.dt();
        let mut values = alloc::vec![0.0; (n_t + 1) * n];
        let mut successors = alloc::vec![0usize; n_t * n];
        values[n_t * n..].copy_from_slice(final_datum);
        for k in (0..n_t).rev() {
            let (head, tail) = values.split_at_mut((k + 1) * n);
            let next = &tail[..n];
            let current = &mut head[k * n..];
            for i in 0..n {
                let pot = self.running.potential(i, k);
                let mut best = f64::INFINITY;
                let mut arg = usize::MAX;
                for (o, &kin) in self.stencil.offsets.iter().zip(&self.step_kinetic) {
                    let j = grid.shift(i, *o);
                    let c = dt * (kin - pot) + next[j];
                    if c < best || (c == best && j < arg) {
                        best = c;
                        arg = j;
                    }
                }
                if !best.is_finite() {
                    return Err(Error::NonFiniteValue { cell: i, step: k });
                }
                current[i] = best;
                successors[k * n + i] = arg;
            }
        }
        Ok(ValueField {
            running: Arc::clone(&self.running),
            velocity_cap: self.velocity_cap,
            values,
            successors,
            final_datum: final_datum.to_vec(),
        })
    }
}

/// Solve the backward recursion for a frozen evaluation curve.
///
/// `q_max = None` selects the default velocity cap derived from the datum
/// oscillation and `M0`.
pub fn solve_backward(
    grid: &TorusGrid,
    model: &ModelSpec,
    eval_curve: &EvaluationCurveTable,
    final_datum: &[f64],
    q_max: Option<f64>,
) -> Result<ValueField> {
    let running = RunningCost::frozen(grid, model, eval_curve)?;
    let cap = q_max.unwrap_or_else(|| running.default_velocity_cap(final_datum));
    HjSolver::new(Arc::new(running), cap)?.solve(final_datum)
}

/// Sup-norm gaps `‖v_n − v_last‖` for a sequence of final data.
pub fn stability_check(
    grid: &TorusGrid,
    model: &ModelSpec,
    eval_curve: &EvaluationCurveTable,
    datum_sequence: &[Vec<f64>],
    q_max: f64,
) -> Result<Vec<f64>> {
    let Some(limit) = datum_sequence.last() else {
        return Ok(Vec::new());
    };
    let running = Arc::new(RunningCost::frozen(grid, model, eval_curve)?);
    let solver = HjSolver::new(running, q_max)?;
    let v_limit = solver.solve(limit)?;
    datum_sequence
        .iter()
        .map(|g| solver.solve(g).map(|v| v.sup_distance(&v_limit)))
        .collect()
}

/// Largest violation of `v(ζ_k, k) = dt·L + v(ζ_{k+1}, k+1)` along a node list.
pub fn dpp_check(vf: &ValueField, nodes: &[usize]) -> f64 {
    nodes
        .windows(2)
        .enumerate()
        .map(|(k, w)| {
            let rhs = vf.running_cost().step_cost(w[0], w[1], k) + vf.value(w[1], k + 1);
            (vf.value(w[0], k) - rhs).abs()
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::TrigPoly;
    use crate::paths::extract_optimal_curve;
    use alloc::vec;
    use core::f64::consts::PI;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn coupled_model() -> ModelSpec {
        let mut m = ModelSpec::free_quadratic(1);
        m.potential = TrigPoly::cosine([1, 0], 0.4).with_term([2, 0], 0.0, 0.3);
        m.kernel = TrigPoly::cosine([1, 0], 1.0);
        m.coupling_weight = 0.5;
        m
    }

    fn moving_eval_curve(grid: &TorusGrid) -> EvaluationCurveTable {
        let n = grid.n_cells();
        EvaluationCurveTable::new(
            (0..=grid.n_steps())
                .map(|k| AtomicTorusMeasure::new(vec![(k % n, 0.6), ((3 * k + 1) % n, 0.4)]).unwrap())
                .collect(),
        )
    }

    #[test]
    fn free_model_with_zero_datum_stays_put() {
        let g = TorusGrid::new(1, 16, 8, 1.0).unwrap();
        let m = ModelSpec::free_quadratic(1);
        let ev = EvaluationCurveTable::stationary(&AtomicTorusMeasure::dirac(0), 8);
        let vf = solve_backward(&g, &m, &ev, &[0.0; 16], Some(4.0)).unwrap();
        for k in 0..=8 {
            assert!(vf.slice(k).iter().all(|&v| v == 0.0));
        }
        for k in 0..8 {
            for i in 0..16 {
                assert_eq!(vf.successor(i, k), i);
            }
        }
    }

    #[test]
    fn empty_stencil_and_nonfinite_errors() {
        let g = TorusGrid::new(1, 16, 8, 1.0).unwrap();
        let m = ModelSpec::free_quadratic(1);
        let ev = EvaluationCurveTable::stationary(&AtomicTorusMeasure::dirac(0), 8);
        let r = solve_backward(&g, &m, &ev, &[0.0; 16], Some(0.25));
        assert!(matches!(r, Err(Error::EmptyStencil { .. })));
        let mut datum = [0.0; 16];
        datum[4] = f64::NAN;
        let r = solve_backward(&g, &m, &ev, &datum, Some(4.0));
        assert!(matches!(r, Err(Error::NonFiniteValue { cell: 4, .. })));
    }

    #[test]
    fn hopf_lax_benchmark_is_close() {
        // v(x,0) vs min_y cos(2πy) + |y − x|²/2 on a dense y-grid
        let g = TorusGrid::new(1, 32, 4, 1.0).unwrap();
        let m = ModelSpec::free_quadratic(1);
        let ev = EvaluationCurveTable::stationary(&AtomicTorusMeasure::dirac(0), 4);
        let datum = TrigPoly::cosine([1, 0], 1.0).on_grid(&g);
        let vf = solve_backward(&g, &m, &ev, &datum, None).unwrap();
        let mut worst = 0.0f64;
        for i in 0..32 {
            let x = g.center(i)[0];
            let oracle = (0..20000)
                .map(|s| {
                    let y = s as f64 / 20000.0;
                    let d = crate::torus::wrap_signed(y - x);
                    (2.0 * PI * y).cos() + 0.5 * d * d
                })
                .fold(f64::INFINITY, f64::min);
            worst = worst.max((vf.value(i, 0) - oracle).abs());
        }
        assert!(worst < 0.05, "worst {worst}");
    }

    #[test]
    fn dp_identity_and_bounds() {
        let g = TorusGrid::new(1, 12, 6, 0.8).unwrap();
        let m = coupled_model();
        let ev = moving_eval_curve(&g);
        let datum = TrigPoly::cosine([1, 0], 1.0).with_term([3, 0], 0.2, 0.1).on_grid(&g);
        let vf = solve_backward(&g, &m, &ev, &datum, None).unwrap();
        let rc = vf.running_cost();
        let min_g = datum.iter().cloned().fold(f64::INFINITY, f64::min);
        for k in 0..6 {
            for i in 0..12 {
                let s = vf.successor(i, k);
                assert_eq!(vf.value(i, k), rc.step_cost(i, s, k) + vf.value(s, k + 1));
                // stay-put competitor
                assert!(vf.value(i, k) <= vf.value(i, k + 1) + rc.m0() * g.dt() + 1e-12);
            }
            let lower = min_g + rc.m_l() * (g.horizon() - g.time(k));
            assert!(vf.slice(k).iter().all(|&v| v >= lower - 1e-12));
        }
        assert_eq!(vf.slice(6), &datum[..]);
    }

    #[test]
    fn order_preservation_and_constant_shift() {
        let g = TorusGrid::new(2, 5, 3, 1.0).unwrap();
        let mut m = coupled_model();
        m.dim = 2;
        m.kernel = TrigPoly::cosine([1, 1], 1.0);
        let ev = EvaluationCurveTable::stationary(&AtomicTorusMeasure::new(vec![(3, 0.5), (17, 0.5)]).unwrap(), 3);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g1: Vec<f64> = (0..25).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let g2: Vec<f64> = g1.iter().map(|v| v + rng.gen_range(0.0..0.5)).collect();
        let v1 = solve_backward(&g, &m, &ev, &g1, Some(3.0)).unwrap();
        let v2 = solve_backward(&g, &m, &ev, &g2, Some(3.0)).unwrap();
        for k in 0..=3 {
            for i in 0..25 {
                assert!(v1.value(i, k) <= v2.value(i, k));
            }
        }
        let shifted: Vec<f64> = g1.iter().map(|v| v + 0.25).collect();
        let v3 = solve_backward(&g, &m, &ev, &shifted, Some(3.0)).unwrap();
        for k in 0..=3 {
            for i in 0..25 {
                assert!((v3.value(i, k) - (v1.value(i, k) + 0.25)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn random_paths_never_beat_the_value() {
        let g = TorusGrid::new(1, 10, 5, 1.0).unwrap();
        let m = coupled_model();
        let ev = moving_eval_curve(&g);
        let datum = TrigPoly::cosine([1, 0], 0.7).on_grid(&g);
        let vf = solve_backward(&g, &m, &ev, &datum, Some(3.0)).unwrap();
        let stencil = g.stencil(3.0 * g.dt()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..100 {
            let mut nodes = vec![rng.gen_range(0..10)];
            for _ in 0..5 {
                let o = stencil.offsets[rng.gen_range(0..stencil.len())];
                nodes.push(g.shift(*nodes.last().unwrap(), o));
            }
            let bound = vf.path_cost(&nodes) + datum[nodes[5]];
            assert!(vf.value(nodes[0], 0) <= bound + 1e-12);
        }
    }

    #[test]
    fn stability_examples() {
        let g = TorusGrid::new(1, 12, 6, 1.0).unwrap();
        let m = coupled_model();
        let ev = moving_eval_curve(&g);
        let base = TrigPoly::cosine([1, 0], 1.0).on_grid(&g);
        let seq: Vec<Vec<f64>> = (1..=4)
            .map(|n| base.iter().map(|v| v + 1.0 / n as f64).collect())
            .chain(core::iter::once(base.clone()))
            .collect();
        let gaps = stability_check(&g, &m, &ev, &seq, 4.0).unwrap();
        for (n, gap) in gaps.iter().take(4).enumerate() {
            assert!((gap - 1.0 / (n + 1) as f64).abs() < 1e-12);
        }
        assert_eq!(gaps[4], 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let eps = 0.05;
        let noisy: Vec<f64> = base.iter().map(|v| v + rng.gen_range(-eps..eps)).collect();
        let gaps = stability_check(&g, &m, &ev, &[noisy, base], 4.0).unwrap();
        assert!(gaps[0] <= eps);
    }

    #[test]
    fn dpp_check_examples() {
        let g = TorusGrid::new(1, 12, 6, 1.0).unwrap();
        let m = coupled_model();
        let ev = moving_eval_curve(&g);
        let datum = TrigPoly::cosine([1, 0], 1.0).on_grid(&g);
        let vf = solve_backward(&g, &m, &ev, &datum, None).unwrap();
        for start in 0..12 {
            let c = extract_optimal_curve(&vf, start);
            assert!(dpp_check(&vf, c.nodes()) <= 1e-10);
        }
        let c = extract_optimal_curve(&vf, 2);
        let mut nodes = c.nodes().to_vec();
        nodes[3] = (nodes[3] + 5) % 12;
        assert!(dpp_check(&vf, &nodes) > 1e-6);

        let free = ModelSpec::free_quadratic(1);
        let vf = solve_backward(&g, &free, &ev, &[0.0; 12], Some(2.0)).unwrap();
        assert_eq!(dpp_check(&vf, &[4; 7]), 0.0);
    }
}
