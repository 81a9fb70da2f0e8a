//! Drift field along optimal trajectories and continuity-equation diagnostics.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)]
use num_traits::Float;

use crate::hj::ValueField;
use crate::measures::{optimality_certificate, wasserstein1, CurveMeasure};
use crate::models::ModelSpec;
use crate::torus::{norm, Point, TorusGrid};
use crate::{Error, Result};

/// Per-atom optimality slack tolerated by [`field_along_measure`].
pub const SUPPORT_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldSource {
    CurveVelocity,
    HpOfGradient,
}

impl FieldSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            FieldSource::CurveVelocity => "curve-velocity",
            FieldSource::HpOfGradient => "hp-of-gradient",
        }
    }
}

/// One drift sample at a space-time grid point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldSample {
    pub cell: usize,
    pub step: usize,
    pub velocity: [f64; 2],
    pub source: FieldSource,
}

/// Drift samples on the support of an optimal curve measure, atom by atom, `k < n_t`.
pub fn field_along_measure(xi: &CurveMeasure, vf: &ValueField) -> Result<Vec<FieldSample>> {
    let cert = optimality_certificate(xi, vf);
    let scale = 1.0 + vf.slice(0).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if let Some((atom, &gap)) = cert
        .atom_gaps
        .iter()
        .enumerate()
        .find(|(_, g)| g.abs() > SUPPORT_TOLERANCE * scale)
    {
        return Err(Error::NotOptimalSupport { atom, gap });
    }
    let grid = vf.grid();
    let mut out = Vec::with_capacity(xi.len() * grid.n_steps());
    for (curve, _) in xi.atoms() {
        for (k, w) in curve.nodes().windows(2).enumerate() {
            out.push(FieldSample {
                cell: w[0],
                step: k,
                velocity: grid.step_velocity(w[0], w[1]),
                source: FieldSource::CurveVelocity,
            });
        }
    }
    Ok(out)
}

/// `H_p(x, t, −Dv)` samples at the same points as `samples`, central differences in space.
pub fn hp_samples(vf: &ValueField, samples: &[FieldSample], model: &ModelSpec) -> Vec<FieldSample> {
    samples
        .iter()
        .map(|s| {
            let dv = vf.grid().central_gradient(vf.slice(s.step), s.cell);
            FieldSample {
                velocity: model.hamiltonian_gradient([-dv[0], -dv[1]]),
                source: FieldSource::HpOfGradient,
                ..*s
            }
        })
        .collect()
}

/// Sample index by `(cell, k)`, keeping each distinct velocity once in arrival order.
#[derive(Clone, Debug, Default)]
pub struct VelocityTable {
    by_point: BTreeMap<(usize, usize), Vec<[f64; 2]>>,
}

impl VelocityTable {
    pub fn new(samples: &[FieldSample]) -> Self {
        let mut by_point: BTreeMap<(usize, usize), Vec<[f64; 2]>> = BTreeMap::new();
        for s in samples {
            let e = by_point.entry((s.cell, s.step)).or_default();
            if !e.contains(&s.velocity) {
                e.push(s.velocity);
            }
        }
        Self { by_point }
    }

    pub fn at(&self, cell: usize, step: usize) -> Option<&[[f64; 2]]> {
        self.by_point.get(&(cell, step)).map(|v| v.as_slice())
    }

    /// Velocity used for an atom step: its own velocity if sampled, else the first sample.
    pub fn select(&self, cell: usize, step: usize, own: [f64; 2]) -> Option<[f64; 2]> {
        let list = self.at(cell, step)?;
        Some(if list.contains(&own) { own } else { list[0] })
    }

    /// Largest pairwise velocity gap inside one `(cell, k)` bucket.
    pub fn collision_gap(&self) -> f64 {
        let mut worst = 0.0f64;
        for list in self.by_point.values() {
            for (i, a) in list.iter().enumerate() {
                for b in &list[i + 1..] {
                    worst = worst.max(norm([a[0] - b[0], a[1] - b[1]]));
                }
            }
        }
        worst
    }

    pub fn len(&self) -> usize {
        self.by_point.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_point.is_empty()
    }
}

/// Largest velocity gap between samples that share a `(cell, k)`.
pub fn collision_gap(samples: &[FieldSample]) -> f64 {
    VelocityTable::new(samples).collision_gap()
}

/// Difference quotients of `v` along `(q, 1)` and their maximum.
#[derive(Clone, Debug, PartialEq)]
pub struct DirectionalDerivative {
    /// `(h, quotient)` for each usable step.
    pub quotients: Vec<(f64, f64)>,
    pub g_est: f64,
    /// `−L(x, t, q)`.
    pub target: f64,
    pub pass: bool,
}

/// Multipliers of `dt` used for the directional quotients.
pub const DEFAULT_H_MULTIPLES: [i64; 6] = [1, -1, 2, -2, 4, -4];

/// Estimate `max_h (v(x + hq, t + h) − v(x, t)) / h` by interpolation, `h = m·dt`.
///
/// Steps that leave `[0, T]` are skipped.
pub fn directional_derivative_test(
    vf: &ValueField,
    cell: usize,
    k: usize,
    q: [f64; 2],
    h_multiples: &[i64],
    tol: f64,
) -> DirectionalDerivative {
    let grid = vf.grid();
    let n_t = grid.n_steps() as i64;
    let x = grid.center(cell);
    let base = vf.value(cell, k);
    let mut quotients = Vec::new();
    for &m in h_multiples {
        let kk = k as i64 + m;
        if m == 0 || kk < 0 || kk > n_t {
            continue;
        }
        let h = m as f64 * grid.dt();
        let y: Point = [x[0] + h * q[0], x[1] + h * q[1]];
        let moved = grid.interpolate(vf.slice(kk as usize), y);
        quotients.push((h, (moved - base) / h));
    }
    let g_est = quotients.iter().fold(f64::NEG_INFINITY, |m, &(_, v)| m.max(v));
    let target = -vf.running_cost().lagrangian(cell, k, q);
    let pass = (g_est - target).abs() <= tol;
    DirectionalDerivative { quotients, g_est, target, pass }
}

/// Fraction of interior atom steps `0 < k < n_t` whose own velocity passes the directional test.
pub fn directional_pass_fraction(vf: &ValueField, xi: &CurveMeasure, h_multiples: &[i64], tol: f64) -> f64 {
    let grid = vf.grid();
    let n_t = grid.n_steps();
    let mut total = 0usize;
    let mut passed = 0usize;
    for (curve, _) in xi.atoms() {
        let nodes = curve.nodes();
        for k in 1..n_t {
            let q = grid.step_velocity(nodes[k], nodes[k + 1]);
            total += 1;
            if directional_derivative_test(vf, nodes[k], k, q, h_multiples, tol).pass {
                passed += 1;
            }
        }
    }
    if total == 0 {
        1.0
    } else {
        passed as f64 / total as f64
    }
}

/// Gap between a curve velocity and `H_p(x, t, −Dv)` at one sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HpGap {
    pub cell: usize,
    pub step: usize,
    pub velocity: [f64; 2],
    pub hp: [f64; 2],
    pub gap: f64,
    pub kink: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HpComparison {
    pub gaps: Vec<HpGap>,
    /// Median gap over samples not flagged as kinks.
    pub median: f64,
    /// Largest gap over samples not flagged as kinks.
    pub max: f64,
    pub kink_count: usize,
}

/// Compare curve velocities with `H_p(x, t, −Dv)`.
///
/// A sample is a kink when the forward and backward space differences of
/// `v(·, t_k)` differ by more than `kink_threshold` in some component.
pub fn compare_with_hp(vf: &ValueField, samples: &[FieldSample], model: &ModelSpec, kink_threshold: f64) -> HpComparison {
    let grid = vf.grid();
    let mut gaps = Vec::with_capacity(samples.len());
    for s in samples {
        let slice = vf.slice(s.step);
        let dv = grid.central_gradient(slice, s.cell);
        let hp = model.hamiltonian_gradient([-dv[0], -dv[1]]);
        let (fwd, bwd) = grid.one_sided_gradients(slice, s.cell);
        let kink = (0..grid.dim()).any(|d| (fwd[d] - bwd[d]).abs() > kink_threshold);
        let gap = norm([s.velocity[0] - hp[0], s.velocity[1] - hp[1]]);
        gaps.push(HpGap { cell: s.cell, step: s.step, velocity: s.velocity, hp, gap, kink });
    }
    let mut smooth: Vec<f64> = gaps.iter().filter(|g| !g.kink).map(|g| g.gap).collect();
    smooth.sort_by(|a, b| a.total_cmp(b));
    let median = median_sorted(&smooth);
    let max = smooth.last().copied().unwrap_or(0.0);
    let kink_count = gaps.iter().filter(|g| g.kink).count();
    HpComparison { gaps, median, max, kink_count }
}

fn median_sorted(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        n if n % 2 == 1 => v[n / 2],
        n => 0.5 * (v[n / 2 - 1] + v[n / 2]),
    }
}

/// Space factor of a test function along one coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpaceFactor {
    One,
    Sin,
    Cos,
}

/// Time factor of a test function.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TimeFactor {
    One,
    Linear,
    HalfSquare,
}

/// Tensor-product test function `φ(x, t) = s_0(x_0) s_1(x_1) τ(t)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TestFunction {
    pub space: [SpaceFactor; 2],
    pub time: TimeFactor,
}

impl SpaceFactor {
    fn eval(self, x: f64) -> (f64, f64) {
        let w = 2.0 * PI;
        match self {
            SpaceFactor::One => (1.0, 0.0),
            SpaceFactor::Sin => ((w * x).sin(), w * (w * x).cos()),
            SpaceFactor::Cos => ((w * x).cos(), -w * (w * x).sin()),
        }
    }

    fn name(self, d: usize) -> Option<String> {
        match self {
            SpaceFactor::One => None,
            SpaceFactor::Sin => Some(alloc::format!("sin(2pi x{d})")),
            SpaceFactor::Cos => Some(alloc::format!("cos(2pi x{d})")),
        }
    }
}

impl TimeFactor {
    fn eval(self, t: f64) -> (f64, f64) {
        match self {
            TimeFactor::One => (1.0, 0.0),
            TimeFactor::Linear => (t, 1.0),
            TimeFactor::HalfSquare => (0.5 * t * t, t),
        }
    }
}

impl TestFunction {
    pub const ONE: TestFunction = TestFunction { space: [SpaceFactor::One; 2], time: TimeFactor::One };
    pub const TIME: TestFunction = TestFunction { space: [SpaceFactor::One; 2], time: TimeFactor::Linear };

    pub fn value(&self, x: Point, t: f64) -> f64 {
        self.space[0].eval(x[0]).0 * self.space[1].eval(x[1]).0 * self.time.eval(t).0
    }

    pub fn time_derivative(&self, x: Point, t: f64) -> f64 {
        self.space[0].eval(x[0]).0 * self.space[1].eval(x[1]).0 * self.time.eval(t).1
    }

    pub fn gradient(&self, x: Point, t: f64) -> [f64; 2] {
        let (a, da) = self.space[0].eval(x[0]);
        let (b, db) = self.space[1].eval(x[1]);
        let tau = self.time.eval(t).0;
        [da * b * tau, a * db * tau]
    }

    pub fn id(&self) -> String {
        let mut parts: Vec<String> = self.space.iter().enumerate().filter_map(|(d, s)| s.name(d)).collect();
        match self.time {
            TimeFactor::One => {}
            TimeFactor::Linear => parts.push(String::from("t")),
            TimeFactor::HalfSquare => parts.push(String::from("t^2/2")),
        }
        if parts.is_empty() {
            String::from("1")
        } else {
            parts.join("*")
        }
    }
}

/// Tensor family `{1, sin, cos}^dim × {1, t, t²/2}`: 9 functions in 1D, 27 in 2D.
pub fn test_family(dim: usize) -> Vec<TestFunction> {
    let factors = [SpaceFactor::One, SpaceFactor::Sin, SpaceFactor::Cos];
    let times = [TimeFactor::One, TimeFactor::Linear, TimeFactor::HalfSquare];
    let second: &[SpaceFactor] = if dim == 2 { &factors } else { &factors[..1] };
    let mut out = Vec::new();
    for &s0 in &factors {
        for &s1 in second {
            for &t in &times {
                out.push(TestFunction { space: [s0, s1], time: t });
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContinuityResidual {
    pub id: String,
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

/// How atom steps without a sample at their `(cell, k)` are treated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Coverage {
    /// Uncovered steps raise a coverage-gap error.
    Strict,
    /// Uncovered steps use the zero vector.
    ZeroExtension,
}

/// Weak-form residual `|Σ_k dt ⟨ξ(t_k), φ_t + Dφ·W⟩ − (⟨ξ(T), φ_T⟩ − ⟨ξ(0), φ_0⟩)|`.
pub fn continuity_residual(
    grid: &TorusGrid,
    xi: &CurveMeasure,
    samples: &[FieldSample],
    tests: &[TestFunction],
    coverage: Coverage,
) -> Result<Vec<ContinuityResidual>> {
    let table = VelocityTable::new(samples);
    let n_t = grid.n_steps();
    if xi.n_steps() != n_t {
        return Err(Error::DimensionMismatch { expected: n_t, found: xi.n_steps() });
    }
    // drift per atom step
    let mut drift: Vec<Vec<[f64; 2]>> = Vec::with_capacity(xi.len());
    for (a, (curve, _)) in xi.atoms().iter().enumerate() {
        let nodes = curve.nodes();
        let mut row = Vec::with_capacity(n_t);
        for k in 0..n_t {
            let own = grid.step_velocity(nodes[k], nodes[k + 1]);
            match (table.select(nodes[k], k, own), coverage) {
                (Some(v), _) => row.push(v),
                (None, Coverage::ZeroExtension) => row.push([0.0, 0.0]),
                (None, Coverage::Strict) => return Err(Error::CoverageGap { atom: a, step: k }),
            }
        }
        drift.push(row);
    }
    let dt = grid.dt();
    let horizon = grid.horizon();
    let mut out = Vec::with_capacity(tests.len());
    for phi in tests {
        let mut lhs = 0.0;
        for k in 0..n_t {
            let t = grid.time(k);
            let mut inner = 0.0;
            for ((curve, w), row) in xi.atoms().iter().zip(&drift) {
                let x = grid.center(curve.nodes()[k]);
                let g = phi.gradient(x, t);
                let v = row[k];
                inner += w * (phi.time_derivative(x, t) + g[0] * v[0] + g[1] * v[1]);
            }
            lhs += dt * inner;
        }
        let mut rhs = 0.0;
        for (curve, w) in xi.atoms() {
            let x0 = grid.center(curve.start());
            let x1 = grid.center(curve.end());
            rhs += w * (phi.value(x1, horizon) - phi.value(x0, 0.0));
        }
        out.push(ContinuityResidual { id: phi.id(), lhs, rhs, residual: (lhs - rhs).abs() });
    }
    Ok(out)
}

/// Discrete `L^{p}` norm, `p = (1 + ε₀)/ε₀`, of the metric speed `d_W(ξ(t_k), ξ(t_{k+1}))/dt`.
pub fn abs_continuity_profile(grid: &TorusGrid, xi: &CurveMeasure, eps0: f64) -> Result<f64> {
    let p = (1.0 + eps0) / eps0;
    let dt = grid.dt();
    let mut acc = 0.0;
    let mut prev = xi.marginal(0);
    for k in 0..xi.n_steps() {
        let next = xi.marginal(k + 1);
        let speed = wasserstein1(grid, &prev, &next)? / dt;
        acc += dt * speed.powf(p);
        prev = next;
    }
    Ok(acc.powf(1.0 / p))
}
