//! Grid Legendre–Fenchel transforms and the capped Lagrangian
//! `L_β = min(L, β|q| + β₀)`.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use super::ModelSpec;
use crate::measures::AtomicTorusMeasure;
use crate::torus::{dot, norm, Point, TorusGrid};
use crate::{Error, Result};

const MAX_DOUBLINGS: usize = 24;

/// Symmetric velocity grid `{ j·dq : j ∈ [−m, m]^dim }`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QGrid {
    dim: usize,
    spacing: f64,
    half_count: usize,
}

impl QGrid {
    /// Grid of the given spacing whose radius is the nearest multiple of the spacing to `radius`.
    pub fn new(dim: usize, radius: f64, spacing: f64) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidGrid("velocity grid dimension must be 1 or 2"));
        }
        if !(spacing.is_finite() && spacing > 0.0 && radius.is_finite() && radius > 0.0) {
            return Err(Error::InvalidGrid("velocity grid radius and spacing must be positive"));
        }
        let half_count = ((radius / spacing).round() as usize).max(1);
        Ok(Self { dim, spacing, half_count })
    }

    /// Default grid: radius `4·q_max`, spacing `(dx/dt)/8`.
    pub fn for_time_grid(grid: &TorusGrid, q_max: f64) -> Result<Self> {
        Self::new(grid.dim(), 4.0 * q_max, grid.dx() / grid.dt() / 8.0)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn radius(&self) -> f64 {
        self.half_count as f64 * self.spacing
    }

    pub fn doubled(&self) -> Self {
        Self { half_count: 2 * self.half_count, ..*self }
    }

    fn side(&self) -> usize {
        2 * self.half_count + 1
    }

    pub fn len(&self) -> usize {
        if self.dim == 1 {
            self.side()
        } else {
            self.side() * self.side()
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn index_coords(&self, idx: usize) -> [i64; 2] {
        let m = self.half_count as i64;
        if self.dim == 1 {
            [idx as i64 - m, 0]
        } else {
            let s = self.side();
            [(idx / s) as i64 - m, (idx % s) as i64 - m]
        }
    }

    pub fn point(&self, idx: usize) -> [f64; 2] {
        let c = self.index_coords(idx);
        [c[0] as f64 * self.spacing, c[1] as f64 * self.spacing]
    }

    pub fn points(&self) -> Vec<[f64; 2]> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    /// Whether a grid index lies on the outer boundary of the grid.
    pub fn is_boundary(&self, idx: usize) -> bool {
        let c = self.index_coords(idx);
        let m = self.half_count as i64;
        c[0].abs() == m || (self.dim == 2 && c[1].abs() == m)
    }

    /// Points on the outer boundary of the grid.
    pub fn boundary_points(&self) -> Vec<[f64; 2]> {
        let m = self.half_count as i64;
        let h = self.spacing;
        if self.dim == 1 {
            return alloc::vec![[-m as f64 * h, 0.0], [m as f64 * h, 0.0]];
        }
        let mut out = Vec::with_capacity(8 * self.half_count);
        for a in -m..=m {
            for b in [-m, m] {
                out.push([a as f64 * h, b as f64 * h]);
            }
        }
        for b in -m + 1..m {
            for a in [-m, m] {
                out.push([a as f64 * h, b as f64 * h]);
            }
        }
        out
    }

    /// Grid points (same spacing) inside the closed ball of radius `radius`.
    pub fn ball_points(&self, radius: f64) -> Vec<[f64; 2]> {
        let m = (radius / self.spacing).floor() as i64 + 1;
        let limit = radius * (1.0 + 1e-12) + 1e-15;
        let mut out = Vec::new();
        let second = if self.dim == 1 { 0..=0 } else { -m..=m };
        for a in -m..=m {
            for b in second.clone() {
                let p = [a as f64 * self.spacing, b as f64 * self.spacing];
                if norm(p) <= limit {
                    out.push(p);
                }
            }
        }
        out
    }
}

/// Outcome of a grid conjugate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Conjugate {
    Finite { value: f64, argmax: [f64; 2] },
    /// The supremum keeps growing on the grid boundary: `L*(p) = +∞`.
    Unbounded,
}

impl Conjugate {
    pub fn value(&self) -> Option<f64> {
        match *self {
            Conjugate::Finite { value, .. } => Some(value),
            Conjugate::Unbounded => None,
        }
    }

    pub fn is_unbounded(&self) -> bool {
        matches!(self, Conjugate::Unbounded)
    }
}

/// `max_j p·q_j − l_j`, with the index of the maximizer (first on ties).
pub fn conjugate_on_grid(l_values: &[f64], q_points: &[[f64; 2]], p: [f64; 2]) -> (f64, usize) {
    let mut best = f64::NEG_INFINITY;
    let mut arg = 0;
    for (j, (q, l)) in q_points.iter().zip(l_values).enumerate() {
        let v = dot(p, *q) - l;
        if v > best {
            best = v;
            arg = j;
        }
    }
    (best, arg)
}

/// Grid conjugate of `l` at `p`, with detection of unbounded directions.
///
/// The maximum is taken on `q_grid`. The radius is then doubled while the
/// maximizer sits on the boundary or the maximum over the outer ring keeps
/// rising. If a ring exceeds the best value found so far by more than `beta0`
/// the conjugate is reported as unbounded.
pub fn numeric_conjugate<F>(l: F, q_grid: &QGrid, p: [f64; 2], beta0: f64) -> Conjugate
where
    F: Fn([f64; 2]) -> f64,
{
    let eval = |grid: &QGrid| -> (f64, [f64; 2], bool) {
        let pts = grid.points();
        let vals: Vec<f64> = pts.iter().map(|&q| l(q)).collect();
        let (v, i) = conjugate_on_grid(&vals, &pts, p);
        (v, pts[i], grid.is_boundary(i))
    };
    let ring_max = |grid: &QGrid| -> f64 {
        grid.boundary_points().iter().map(|&q| dot(p, q) - l(q)).fold(f64::NEG_INFINITY, f64::max)
    };
    let mut grid = *q_grid;
    let (mut value, mut argmax, mut on_boundary) = eval(&grid);
    let mut ring = ring_max(&grid);
    for _ in 0..MAX_DOUBLINGS {
        let next = grid.doubled();
        let next_ring = ring_max(&next);
        if next_ring - value > beta0 {
            return Conjugate::Unbounded;
        }
        if !on_boundary && next_ring <= ring {
            break;
        }
        if on_boundary || next_ring > value {
            (value, argmax, on_boundary) = eval(&next);
        }
        grid = next;
        ring = next_ring;
    }
    Conjugate::Finite { value, argmax }
}

/// Grid biconjugate of `l_values` sampled on `q_grid`.
///
/// The momentum search runs over grid points of the same spacing inside the
/// closed ball of radius `beta`, plus the discrete slopes of `l` in one dimension. With `beta = None` the ball is taken large
/// enough to contain every discrete slope of `l`.
pub fn numeric_biconjugate(l_values: &[f64], q_grid: &QGrid, beta: Option<f64>) -> Vec<f64> {
    let q_points = q_grid.points();
    let radius = match beta {
        Some(b) => b,
        None => max_discrete_slope(l_values, q_grid) * (q_grid.dim() as f64).sqrt() + q_grid.spacing(),
    };
    let mut p_points = q_grid.ball_points(radius);
    if q_grid.dim() == 1 {
        // discrete slopes make the hull exact at the samples
        let h = q_grid.spacing();
        let limit = radius * (1.0 + 1e-12);
        p_points.extend(
            l_values
                .windows(2)
                .map(|w| (w[1] - w[0]) / h)
                .filter(|s| s.abs() <= limit)
                .map(|s| [s, 0.0]),
        );
    }
    let conj: Vec<f64> = p_points.iter().map(|&p| conjugate_on_grid(l_values, &q_points, p).0).collect();
    q_points
        .iter()
        .map(|&q| conjugate_on_grid(&conj, &p_points, q).0)
        .collect()
}

fn max_discrete_slope(l_values: &[f64], q_grid: &QGrid) -> f64 {
    let h = q_grid.spacing();
    let side = 2 * q_grid.half_count + 1;
    let mut m = 0.0f64;
    if q_grid.dim() == 1 {
        for w in l_values.windows(2) {
            m = m.max(((w[1] - w[0]) / h).abs());
        }
    } else {
        for a in 0..side {
            for b in 0..side {
                let i = a * side + b;
                if b + 1 < side {
                    m = m.max(((l_values[i + 1] - l_values[i]) / h).abs());
                }
                if a + 1 < side {
                    m = m.max(((l_values[i + side] - l_values[i]) / h).abs());
                }
            }
        }
    }
    m
}

/// Capped Lagrangian `L_β(x, μ, q) = min(L(x, μ, q), β|q| + β₀)` at a frozen measure.
#[derive(Clone, Debug)]
pub struct PerturbedLagrangian<'a> {
    pub beta: f64,
    pub beta0: f64,
    model: &'a ModelSpec,
    grid: &'a TorusGrid,
    mu: &'a AtomicTorusMeasure,
}

impl<'a> PerturbedLagrangian<'a> {
    /// `beta0 = None` selects `max_x L(x, μ, 0) + 1` over the cell centers.
    pub fn new(
        model: &'a ModelSpec,
        grid: &'a TorusGrid,
        mu: &'a AtomicTorusMeasure,
        beta: f64,
        beta0: Option<f64>,
    ) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::InvalidModel("beta must be positive"));
        }
        let floor = max_rest_lagrangian(model, grid, mu);
        let beta0 = beta0.unwrap_or(floor + 1.0);
        if beta0.partial_cmp(&floor) != Some(core::cmp::Ordering::Greater) {
            return Err(Error::InvalidModel("beta0 must exceed max L(x, mu, 0)"));
        }
        Ok(Self { beta, beta0, model, grid, mu })
    }

    pub fn lagrangian(&self, x: Point, q: [f64; 2]) -> f64 {
        self.model.lagrangian(self.grid, x, self.mu, q)
    }

    pub fn eval(&self, x: Point, q: [f64; 2]) -> f64 {
        self.lagrangian(x, q).min(self.beta * norm(q) + self.beta0)
    }

    /// Grid radius beyond which the cap is active along every direction.
    pub fn cap_radius(&self, x: Point, from: f64) -> f64 {
        let r = self.model.kinetic_exponent;
        let pot = self.model.running_potential(self.grid, x, self.mu);
        let mut radius = from.max(1.0);
        for _ in 0..64 {
            let kin = self.model.kinetic([radius, 0.0]);
            if kin - pot >= self.beta * radius + self.beta0 && radius.powf(r - 1.0) >= self.beta {
                break;
            }
            radius *= 2.0;
        }
        radius
    }

    pub fn conjugate(&self, x: Point, q_grid: &QGrid, p: [f64; 2]) -> Conjugate {
        numeric_conjugate(|q| self.eval(x, q), q_grid, p, self.beta0)
    }
}

/// `max_i L(x_i, μ, 0)` over cell centers.
pub fn max_rest_lagrangian(model: &ModelSpec, grid: &TorusGrid, mu: &AtomicTorusMeasure) -> f64 {
    (0..grid.n_cells())
        .map(|i| model.lagrangian(grid, grid.center(i), mu, [0.0, 0.0]))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `max_{|q| ≤ window} |L**_β − L|` for each `β` in `beta_list`.
pub fn capped_hull_convergence_sweep(
    model: &ModelSpec,
    grid: &TorusGrid,
    x: Point,
    mu: &AtomicTorusMeasure,
    window: f64,
    dq: f64,
    beta_list: &[f64],
) -> Result<Vec<f64>> {
    let mut gaps = Vec::with_capacity(beta_list.len());
    for &beta in beta_list {
        let lb = PerturbedLagrangian::new(model, grid, mu, beta, None)?;
        let radius = lb.cap_radius(x, window);
        let q_grid = QGrid::new(model.dim, radius, dq)?;
        let pts = q_grid.points();
        let capped: Vec<f64> = pts.iter().map(|&q| lb.eval(x, q)).collect();
        let hull = numeric_biconjugate(&capped, &q_grid, Some(beta));
        let limit = window * (1.0 + 1e-12);
        let gap = pts
            .iter()
            .zip(&hull)
            .filter(|(q, _)| norm(**q) <= limit)
            .map(|(&q, &h)| (h - lb.lagrangian(x, q)).abs())
            .fold(0.0, f64::max);
        gaps.push(gap);
    }
    Ok(gaps)
}
