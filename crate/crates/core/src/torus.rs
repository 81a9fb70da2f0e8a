//! Periodic geometry on the unit torus in one or two dimensions.
//!
//! Points are stored as `[f64; 2]`; in one dimension the second coordinate is
//! zero and every displacement leaves it at zero, so the same arithmetic
//! serves both cases.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::{Error, Result};

/// Point on the torus, coordinates in `[0, 1)`.
pub type Point = [f64; 2];

/// Minimal representative of `d` modulo 1, in `(-0.5, 0.5]`.
#[inline]
pub fn wrap_signed(d: f64) -> f64 {
    d - (d - 0.5).ceil()
}

/// Representative of `x` modulo 1 in `[0, 1)`.
#[inline]
pub fn wrap_unit(x: f64) -> f64 {
    let r = x - x.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Displacement on the torus with every component in `(-0.5, 0.5]`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PeriodicVector(pub [f64; 2]);

impl PeriodicVector {
    pub const ZERO: PeriodicVector = PeriodicVector([0.0, 0.0]);

    pub fn components(&self) -> [f64; 2] {
        self.0
    }

    pub fn norm(&self) -> f64 {
        norm(self.0)
    }

    pub fn scaled(&self, s: f64) -> [f64; 2] {
        [self.0[0] * s, self.0[1] * s]
    }
}

#[inline]
pub fn norm(v: [f64; 2]) -> f64 {
    if v[1] == 0.0 {
        v[0].abs()
    } else {
        (v[0] * v[0] + v[1] * v[1]).sqrt()
    }
}

#[inline]
pub fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Minimal-norm representative of `y - x` modulo 1, componentwise.
///
/// On the tie `|component| = 0.5` the positive representative is returned.
pub fn periodic_displacement(x: Point, y: Point) -> PeriodicVector {
    PeriodicVector([wrap_signed(y[0] - x[0]), wrap_signed(y[1] - x[1])])
}

/// Periodic distance between two points.
pub fn periodic_distance(x: Point, y: Point) -> f64 {
    periodic_displacement(x, y).norm()
}

/// Uniform spatial grid on the torus together with a uniform time grid on `[0, T]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TorusGrid {
    dim: usize,
    cells_per_dim: usize,
    n_steps: usize,
    horizon: f64,
}

impl TorusGrid {
    pub fn new(dim: usize, cells_per_dim: usize, n_steps: usize, horizon: f64) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidGrid("dimension must be 1 or 2"));
        }
        if cells_per_dim == 0 {
            return Err(Error::InvalidGrid("cells_per_dim must be positive"));
        }
        if n_steps == 0 {
            return Err(Error::InvalidGrid("n_steps must be positive"));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidGrid("horizon must be positive and finite"));
        }
        Ok(Self { dim, cells_per_dim, n_steps, horizon })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cells_per_dim(&self) -> usize {
        self.cells_per_dim
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_cells(&self) -> usize {
        if self.dim == 1 {
            self.cells_per_dim
        } else {
            self.cells_per_dim * self.cells_per_dim
        }
    }

    pub fn dx(&self) -> f64 {
        1.0 / self.cells_per_dim as f64
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    /// Time of grid index `k`; the last index maps to the horizon exactly.
    pub fn time(&self, k: usize) -> f64 {
        if k >= self.n_steps {
            self.horizon
        } else {
            k as f64 * self.dt()
        }
    }

    /// Same grid with both resolutions multiplied by `scale`.
    pub fn refined(&self, scale: usize) -> Result<Self> {
        Self::new(self.dim, self.cells_per_dim * scale, self.n_steps * scale, self.horizon)
    }

    /// Per-dimension indices of a flat cell index (row-major, first index slowest).
    pub fn coords(&self, cell: usize) -> [usize; 2] {
        if self.dim == 1 {
            [cell, 0]
        } else {
            [cell / self.cells_per_dim, cell % self.cells_per_dim]
        }
    }

    pub fn index(&self, coords: [usize; 2]) -> usize {
        if self.dim == 1 {
            coords[0]
        } else {
            coords[0] * self.cells_per_dim + coords[1]
        }
    }

    pub fn center(&self, cell: usize) -> Point {
        let c = self.coords(cell);
        let dx = self.dx();
        if self.dim == 1 {
            [(c[0] as f64 + 0.5) * dx, 0.0]
        } else {
            [(c[0] as f64 + 0.5) * dx, (c[1] as f64 + 0.5) * dx]
        }
    }

    /// Cell reached from `cell` by an integer offset, wrapping periodically.
    pub fn shift(&self, cell: usize, offset: [i64; 2]) -> usize {
        let n = self.cells_per_dim as i64;
        let c = self.coords(cell);
        let a = (c[0] as i64 + offset[0]).rem_euclid(n) as usize;
        if self.dim == 1 {
            a
        } else {
            let b = (c[1] as i64 + offset[1]).rem_euclid(n) as usize;
            self.index([a, b])
        }
    }

    /// Minimal integer offset from `from` to `to`, each component in `(-n/2, n/2]`.
    pub fn offset_between(&self, from: usize, to: usize) -> [i64; 2] {
        let n = self.cells_per_dim as i64;
        let a = self.coords(from);
        let b = self.coords(to);
        let wrap = |d: i64| -> i64 {
            let r = d.rem_euclid(n);
            if 2 * r > n {
                r - n
            } else {
                r
            }
        };
        if self.dim == 1 {
            [wrap(b[0] as i64 - a[0] as i64), 0]
        } else {
            [wrap(b[0] as i64 - a[0] as i64), wrap(b[1] as i64 - a[1] as i64)]
        }
    }

    /// Displacement between two cell centers, computed from the integer offset.
    pub fn displacement_between(&self, from: usize, to: usize) -> PeriodicVector {
        let o = self.offset_between(from, to);
        let dx = self.dx();
        PeriodicVector([o[0] as f64 * dx, o[1] as f64 * dx])
    }

    /// Velocity `δ/dt` of an integer offset.
    pub fn offset_velocity(&self, offset: [i64; 2]) -> [f64; 2] {
        let dx = self.dx();
        let dt = self.dt();
        [(offset[0] as f64 * dx) / dt, (offset[1] as f64 * dx) / dt]
    }

    /// Velocity of the one-step move between two cells.
    pub fn step_velocity(&self, from: usize, to: usize) -> [f64; 2] {
        self.offset_velocity(self.offset_between(from, to))
    }

    pub fn cell_distance(&self, from: usize, to: usize) -> f64 {
        self.displacement_between(from, to).norm()
    }

    /// Cell whose center is closest to `x`.
    pub fn nearest_cell(&self, x: Point) -> usize {
        let n = self.cells_per_dim;
        let pick = |c: f64| -> usize {
            let s = (wrap_unit(c) * n as f64).floor() as usize;
            s.min(n - 1)
        };
        if self.dim == 1 {
            pick(x[0])
        } else {
            self.index([pick(x[0]), pick(x[1])])
        }
    }

    /// Multilinear periodic interpolation of a cell-centred field.
    pub fn interpolate(&self, field: &[f64], x: Point) -> f64 {
        debug_assert_eq!(field.len(), self.n_cells());
        let n = self.cells_per_dim as i64;
        let locate = |c: f64| -> (i64, f64) {
            let s = wrap_unit(c) * n as f64 - 0.5;
            let r = s.round();
            // snap roundoff at cell centers
            if (s - r).abs() < 1e-9 {
                return (r as i64, 0.0);
            }
            let base = s.floor();
            (base as i64, s - base)
        };
        let (i0, f0) = locate(x[0]);
        if self.dim == 1 {
            let a = field[i0.rem_euclid(n) as usize];
            if f0 == 0.0 {
                return a;
            }
            let b = field[(i0 + 1).rem_euclid(n) as usize];
            return (1.0 - f0) * a + f0 * b;
        }
        let (i1, f1) = locate(x[1]);
        let at = |a: i64, b: i64| field[self.index([a.rem_euclid(n) as usize, b.rem_euclid(n) as usize])];
        if f0 == 0.0 && f1 == 0.0 {
            return at(i0, i1);
        }
        (1.0 - f0) * ((1.0 - f1) * at(i0, i1) + f1 * at(i0, i1 + 1))
            + f0 * ((1.0 - f1) * at(i0 + 1, i1) + f1 * at(i0 + 1, i1 + 1))
    }

    /// Central difference gradient at a cell, periodic wrap.
    pub fn central_gradient(&self, field: &[f64], cell: usize) -> [f64; 2] {
        let two_dx = 2.0 * self.dx();
        let mut g = [0.0; 2];
        for (d, gd) in g.iter_mut().enumerate().take(self.dim) {
            let mut e = [0i64; 2];
            e[d] = 1;
            let fwd = field[self.shift(cell, e)];
            e[d] = -1;
            let bwd = field[self.shift(cell, e)];
            *gd = (fwd - bwd) / two_dx;
        }
        g
    }

    /// Forward and backward one-sided differences at a cell, per dimension.
    pub fn one_sided_gradients(&self, field: &[f64], cell: usize) -> ([f64; 2], [f64; 2]) {
        let dx = self.dx();
        let mut fwd = [0.0; 2];
        let mut bwd = [0.0; 2];
        for d in 0..self.dim {
            let mut e = [0i64; 2];
            e[d] = 1;
            fwd[d] = (field[self.shift(cell, e)] - field[cell]) / dx;
            e[d] = -1;
            bwd[d] = (field[cell] - field[self.shift(cell, e)]) / dx;
        }
        (fwd, bwd)
    }

    /// Offsets whose displacement length is at most `reach` (torus-minimal, deduplicated).
    pub fn stencil(&self, reach: f64) -> Result<Stencil> {
        let dx = self.dx();
        if !(reach.is_finite() && reach >= dx * (1.0 - 1e-12)) && self.cells_per_dim > 1 {
            return Err(Error::EmptyStencil { reach, dx });
        }
        let n = self.cells_per_dim as i64;
        let lo = -((n - 1) / 2);
        let hi = n / 2;
        let limit = reach * (1.0 + 1e-12);
        let mut offsets = Vec::new();
        let second: (i64, i64) = if self.dim == 1 { (0, 0) } else { (lo, hi) };
        for a in lo..=hi {
            for b in second.0..=second.1 {
                let len = norm([a as f64 * dx, b as f64 * dx]);
                if len <= limit {
                    offsets.push([a, b]);
                }
            }
        }
        let displacements = offsets
            .iter()
            .map(|o| PeriodicVector([o[0] as f64 * dx, o[1] as f64 * dx]))
            .collect();
        Ok(Stencil { offsets, displacements })
    }
}

/// Set of admissible one-step cell offsets.
#[derive(Clone, Debug, PartialEq)]
pub struct Stencil {
    pub offsets: Vec<[i64; 2]>,
    pub displacements: Vec<PeriodicVector>,
}

impl Stencil {
    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn contains(&self, offset: [i64; 2]) -> bool {
        self.offsets.contains(&offset)
    }
}
