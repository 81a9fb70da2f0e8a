//! Hamiltonian/Lagrangian family, measure coupling and final datum.
//!
//! The Lagrangian is `L(x, μ, q) = |q|^r / r − f(x) − c_F (κ ⋆ μ)(x)` and the
//! Hamiltonian its conjugate `H(x, μ, p) = |p|^{r*} / r* + f(x) + c_F (κ ⋆ μ)(x)`.
//! The final datum is `g(x, μ) = g_base(x) + c_g (κ_g ⋆ μ)(x)`. All of `f`, `κ`,
//! `g_base`, `κ_g` are real trigonometric polynomials on the unit torus.

pub mod fenchel;

use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)]
use num_traits::Float;

use crate::measures::AtomicTorusMeasure;
use crate::torus::{norm, Point, TorusGrid};
use crate::{Error, Result};

pub use fenchel::{
    capped_hull_convergence_sweep, numeric_biconjugate, numeric_conjugate, Conjugate, PerturbedLagrangian, QGrid,
};

/// One term `cos · cos(2π k·x) + sin · sin(2π k·x)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrigTerm {
    pub wave: [i32; 2],
    pub cos: f64,
    pub sin: f64,
}

/// Real trigonometric polynomial on the unit torus.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrigPoly {
    pub constant: f64,
    pub terms: Vec<TrigTerm>,
}

impl TrigPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self { constant: c, terms: Vec::new() }
    }

    /// `amp · cos(2π k·x)`.
    pub fn cosine(wave: [i32; 2], amp: f64) -> Self {
        Self { constant: 0.0, terms: alloc::vec![TrigTerm { wave, cos: amp, sin: 0.0 }] }
    }

    pub fn with_term(mut self, wave: [i32; 2], cos: f64, sin: f64) -> Self {
        self.terms.push(TrigTerm { wave, cos, sin });
        self
    }

    pub fn eval(&self, x: Point) -> f64 {
        let mut s = self.constant;
        for t in &self.terms {
            let phase = 2.0 * PI * (t.wave[0] as f64 * x[0] + t.wave[1] as f64 * x[1]);
            if t.cos != 0.0 {
                s += t.cos * phase.cos();
            }
            if t.sin != 0.0 {
                s += t.sin * phase.sin();
            }
        }
        s
    }

    /// Bound on `sup |p|` from the coefficients.
    pub fn sup_bound(&self) -> f64 {
        self.terms.iter().fold(self.constant.abs(), |acc, t| acc + t.cos.abs() + t.sin.abs())
    }

    pub fn is_zero(&self) -> bool {
        self.constant == 0.0 && self.terms.iter().all(|t| t.cos == 0.0 && t.sin == 0.0)
    }

    pub fn uses_second_dimension(&self) -> bool {
        self.terms.iter().any(|t| t.wave[1] != 0)
    }

    pub fn on_grid(&self, grid: &TorusGrid) -> Vec<f64> {
        (0..grid.n_cells()).map(|i| self.eval(grid.center(i))).collect()
    }
}

/// Model family with power kinetic term and convolution couplings.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    pub dim: usize,
    /// Exponent `r > 1` of the kinetic term `|q|^r / r`.
    pub kinetic_exponent: f64,
    /// Superlinearity margin, `1 + ε₀ < r`.
    pub eps0: f64,
    /// Potential `f`.
    pub potential: TrigPoly,
    /// Coupling kernel `κ`.
    pub kernel: TrigPoly,
    /// Coupling weight `c_F ≥ 0`.
    pub coupling_weight: f64,
    pub final_base: TrigPoly,
    pub final_kernel: TrigPoly,
    pub final_weight: f64,
}

impl ModelSpec {
    /// `|q|²/2` with no potential, no coupling and zero final datum.
    pub fn free_quadratic(dim: usize) -> Self {
        Self {
            dim,
            kinetic_exponent: 2.0,
            eps0: 0.5,
            potential: TrigPoly::zero(),
            kernel: TrigPoly::zero(),
            coupling_weight: 0.0,
            final_base: TrigPoly::zero(),
            final_kernel: TrigPoly::zero(),
            final_weight: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim != 1 && self.dim != 2 {
            return Err(Error::InvalidModel("dimension must be 1 or 2"));
        }
        let r = self.kinetic_exponent;
        if !(r.is_finite() && r > 1.0) {
            return Err(Error::InvalidModel("kinetic exponent must exceed 1"));
        }
        if !(self.eps0.is_finite() && self.eps0 > 0.0) {
            return Err(Error::InvalidModel("eps0 must be positive"));
        }
        if 1.0 + self.eps0 >= r {
            return Err(Error::InvalidModel("superlinearity margin requires 1 + eps0 < r"));
        }
        if !(self.coupling_weight.is_finite() && self.coupling_weight >= 0.0) {
            return Err(Error::InvalidModel("coupling weight must be nonnegative"));
        }
        if !self.final_weight.is_finite() {
            return Err(Error::InvalidModel("final weight must be finite"));
        }
        if self.dim == 1
            && [&self.potential, &self.kernel, &self.final_base, &self.final_kernel]
                .iter()
                .any(|p| p.uses_second_dimension())
        {
            return Err(Error::InvalidModel("one-dimensional model uses a second wave index"));
        }
        Ok(())
    }

    /// Conjugate exponent `r* = r / (r − 1)`.
    pub fn conjugate_exponent(&self) -> f64 {
        let r = self.kinetic_exponent;
        r / (r - 1.0)
    }

    pub fn is_decoupled(&self) -> bool {
        (self.coupling_weight == 0.0 || self.kernel.is_zero())
            && (self.final_weight == 0.0 || self.final_kernel.is_zero())
    }

    /// `|q|^r / r`.
    #[inline]
    pub fn kinetic(&self, q: [f64; 2]) -> f64 {
        power_term(q, self.kinetic_exponent)
    }

    /// `(κ ⋆ μ)(x) = Σ_a w_a κ(x − y_a)`.
    pub fn convolve(kernel: &TrigPoly, grid: &TorusGrid, x: Point, mu: &AtomicTorusMeasure) -> f64 {
        let mut s = 0.0;
        for &(cell, w) in mu.atoms() {
            let y = grid.center(cell);
            s += w * kernel.eval([x[0] - y[0], x[1] - y[1]]);
        }
        s
    }

    /// Position-dependent part `f(x) + c_F (κ ⋆ μ)(x)` shared by `L` and `H`.
    pub fn running_potential(&self, grid: &TorusGrid, x: Point, mu: &AtomicTorusMeasure) -> f64 {
        let coupling = if self.coupling_weight == 0.0 {
            0.0
        } else {
            self.coupling_weight * Self::convolve(&self.kernel, grid, x, mu)
        };
        self.potential.eval(x) + coupling
    }

    pub fn lagrangian(&self, grid: &TorusGrid, x: Point, mu: &AtomicTorusMeasure, q: [f64; 2]) -> f64 {
        self.kinetic(q) - self.running_potential(grid, x, mu)
    }

    pub fn hamiltonian(&self, grid: &TorusGrid, x: Point, mu: &AtomicTorusMeasure, p: [f64; 2]) -> f64 {
        power_term(p, self.conjugate_exponent()) + self.running_potential(grid, x, mu)
    }

    /// `H_p`, which only depends on `p` for this family.
    pub fn hamiltonian_gradient(&self, p: [f64; 2]) -> [f64; 2] {
        let rs = self.conjugate_exponent();
        if rs == 2.0 {
            return p;
        }
        let n = norm(p);
        if n == 0.0 {
            return [0.0, 0.0];
        }
        let s = n.powf(rs - 2.0);
        [s * p[0], s * p[1]]
    }

    /// Final datum `g(·, μ)` on the cell centers.
    pub fn final_datum(&self, grid: &TorusGrid, mu: &AtomicTorusMeasure) -> Vec<f64> {
        (0..grid.n_cells())
            .map(|i| {
                let x = grid.center(i);
                let coupling = if self.final_weight == 0.0 {
                    0.0
                } else {
                    self.final_weight * Self::convolve(&self.final_kernel, grid, x, mu)
                };
                self.final_base.eval(x) + coupling
            })
            .collect()
    }

    /// Bound on `max_{x,μ} |L(x, μ, 0)|` valid for every probability measure.
    pub fn uniform_m0_bound(&self) -> f64 {
        self.potential.sup_bound() + self.coupling_weight * self.kernel.sup_bound()
    }

    /// Bound on the oscillation of `g(·, μ)` valid for every probability measure.
    pub fn uniform_final_oscillation_bound(&self) -> f64 {
        2.0 * (self.final_base.sup_bound() + self.final_weight.abs() * self.final_kernel.sup_bound())
    }

    /// Velocity cap that holds for every population measure.
    pub fn uniform_velocity_cap(&self, grid: &TorusGrid) -> f64 {
        velocity_cap(
            self.kinetic_exponent,
            self.uniform_final_oscillation_bound(),
            self.uniform_m0_bound(),
            grid.horizon(),
            grid.dt(),
        )
        .max(grid.dx() / grid.dt())
    }
}

/// `|v|^e / e`, computed as `|v|²/2` when `e = 2`.
#[inline]
pub fn power_term(v: [f64; 2], exponent: f64) -> f64 {
    if exponent == 2.0 {
        0.5 * (v[0] * v[0] + v[1] * v[1])
    } else {
        norm(v).powf(exponent) / exponent
    }
}

/// Default velocity cap for the backward sweep.
///
/// An optimal one-step move costs at most `osc(g) + M0·T` more than staying
/// put, so its kinetic cost `dt·|q|^r/r` is bounded by that amount. The cap
/// is twice the speed solving the equality.
pub fn velocity_cap(r: f64, osc_g: f64, m0: f64, horizon: f64, dt: f64) -> f64 {
    let budget = (osc_g + m0 * horizon).max(0.0);
    let speed = (r * budget / dt).powf(1.0 / r);
    2.0 * speed
}

/// Constants bounding the frozen Lagrangian and the active final datum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstantsTable {
    /// `max |L(x, t, 0)|` over cells and times.
    pub m0: f64,
    /// `min L(x, t, q)` over cells, times and velocities.
    pub m_l: f64,
    /// Oscillation of the final datum.
    pub osc_g: f64,
}

impl ConstantsTable {
    /// Constants for the Lagrangian frozen along `slices` (one measure per time index).
    pub fn compute(
        grid: &TorusGrid,
        model: &ModelSpec,
        slices: &[AtomicTorusMeasure],
        final_datum: &[f64],
    ) -> Self {
        let mut m0 = 0.0f64;
        let mut m_l = f64::INFINITY;
        for mu in slices.iter().take(grid.n_steps().max(1)) {
            for i in 0..grid.n_cells() {
                let l0 = -model.running_potential(grid, grid.center(i), mu);
                m0 = m0.max(l0.abs());
                m_l = m_l.min(l0);
            }
        }
        Self { m0, m_l, osc_g: oscillation(final_datum) }
    }
}

pub fn oscillation(values: &[f64]) -> f64 {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if values.is_empty() {
        0.0
    } else {
        hi - lo
    }
}
