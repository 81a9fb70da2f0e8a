//! Atomic probability measures on cells and on discrete curves, exact
//! Wasserstein-1 distances, transport between measures for a cost matrix and
//! the optimality certificate of curve measures.

pub mod transport;

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::hj::{EvaluationCurveTable, ValueField};
use crate::paths::{CostMatrix, DiscreteCurve, UNREACHABLE_THRESHOLD};
use crate::torus::TorusGrid;
use crate::{Error, Result};

pub use transport::{solve_transport, TransportPlan, TransportSolution};

/// Default cap on the number of atoms handed to the exact transport solver.
pub const DEFAULT_SIZE_CAP: usize = 4096;
/// Total-mass tolerance of a probability measure.
pub const MASS_TOLERANCE: f64 = 1e-12;
/// Atoms lighter than this are dropped after mixing.
pub const PRUNE_WEIGHT: f64 = 1e-12;

fn check_weight(w: f64) -> Result<()> {
    if !(w.is_finite() && w >= 0.0) {
        return Err(Error::InvalidMeasure("weights must be finite and nonnegative"));
    }
    Ok(())
}

fn check_total(total: f64) -> Result<()> {
    if (total - 1.0).abs() > MASS_TOLERANCE {
        return Err(Error::InvalidMeasure("weights must sum to 1"));
    }
    Ok(())
}

/// Probability measure on cells, sorted by cell with duplicates merged.
#[derive(Clone, Debug, PartialEq)]
pub struct AtomicTorusMeasure {
    atoms: Vec<(usize, f64)>,
}

impl AtomicTorusMeasure {
    pub fn new(atoms: Vec<(usize, f64)>) -> Result<Self> {
        let mu = Self::merge(atoms)?;
        check_total(mu.total_mass())?;
        Ok(mu)
    }

    /// Merge and rescale weights to unit mass.
    pub fn normalized(atoms: Vec<(usize, f64)>) -> Result<Self> {
        let mut mu = Self::merge(atoms)?;
        let total = mu.total_mass();
        if total <= 0.0 {
            return Err(Error::InvalidMeasure("measure has no mass"));
        }
        mu.atoms.iter_mut().for_each(|(_, w)| *w /= total);
        Ok(mu)
    }

    fn merge(atoms: Vec<(usize, f64)>) -> Result<Self> {
        let mut map: BTreeMap<usize, f64> = BTreeMap::new();
        for (cell, w) in atoms {
            check_weight(w)?;
            *map.entry(cell).or_insert(0.0) += w;
        }
        Ok(Self { atoms: map.into_iter().filter(|&(_, w)| w > 0.0).collect() })
    }

    pub fn dirac(cell: usize) -> Self {
        Self { atoms: alloc::vec![(cell, 1.0)] }
    }

    pub fn uniform(cells: &[usize]) -> Result<Self> {
        if cells.is_empty() {
            return Err(Error::InvalidMeasure("uniform measure needs at least one cell"));
        }
        let w = 1.0 / cells.len() as f64;
        Self::normalized(cells.iter().map(|&c| (c, w)).collect())
    }

    pub fn atoms(&self) -> &[(usize, f64)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|&(_, w)| w).sum()
    }

    pub fn weight_of(&self, cell: usize) -> f64 {
        self.atoms
            .binary_search_by_key(&cell, |&(c, _)| c)
            .map(|k| self.atoms[k].1)
            .unwrap_or(0.0)
    }

    /// `⟨μ, f⟩` for a function of the cell index.
    pub fn integrate<F: Fn(usize) -> f64>(&self, f: F) -> f64 {
        self.atoms.iter().map(|&(c, w)| w * f(c)).sum()
    }

    pub fn check_cells(&self, n_cells: usize) -> Result<()> {
        if self.atoms.iter().any(|&(c, _)| c >= n_cells) {
            return Err(Error::InvalidMeasure("atom outside the grid"));
        }
        Ok(())
    }
}

/// Probability measure on discrete curves, sorted by node list with duplicates merged.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveMeasure {
    atoms: Vec<(DiscreteCurve, f64)>,
}

impl CurveMeasure {
    pub fn new(atoms: Vec<(DiscreteCurve, f64)>) -> Result<Self> {
        let xi = Self::merge(atoms)?;
        check_total(xi.total_mass())?;
        Ok(xi)
    }

    pub fn normalized(atoms: Vec<(DiscreteCurve, f64)>) -> Result<Self> {
        let mut xi = Self::merge(atoms)?;
        let total = xi.total_mass();
        if total <= 0.0 {
            return Err(Error::InvalidMeasure("measure has no mass"));
        }
        xi.atoms.iter_mut().for_each(|(_, w)| *w /= total);
        Ok(xi)
    }

    fn merge(atoms: Vec<(DiscreteCurve, f64)>) -> Result<Self> {
        let len = atoms.first().map(|(c, _)| c.nodes().len());
        let mut map: BTreeMap<Vec<usize>, (DiscreteCurve, f64)> = BTreeMap::new();
        for (curve, w) in atoms {
            check_weight(w)?;
            if Some(curve.nodes().len()) != len {
                return Err(Error::InvalidMeasure("curves must share the time grid"));
            }
            if curve.nodes().is_empty() {
                return Err(Error::InvalidMeasure("curve without nodes"));
            }
            match map.get_mut(curve.nodes()) {
                Some(entry) => entry.1 += w,
                None => {
                    map.insert(curve.nodes().to_vec(), (curve, w));
                }
            }
        }
        Ok(Self { atoms: map.into_values().filter(|&(_, w)| w > 0.0).collect() })
    }

    /// Stationary curves at the atoms of `mu0`.
    pub fn stationary(mu0: &AtomicTorusMeasure, n_steps: usize) -> Self {
        Self {
            atoms: mu0
                .atoms()
                .iter()
                .map(|&(c, w)| (DiscreteCurve::new(alloc::vec![c; n_steps + 1]), w))
                .collect(),
        }
    }

    pub fn dirac(curve: DiscreteCurve) -> Self {
        Self { atoms: alloc::vec![(curve, 1.0)] }
    }

    pub fn atoms(&self) -> &[(DiscreteCurve, f64)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn n_steps(&self) -> usize {
        self.atoms.first().map(|(c, _)| c.nodes().len() - 1).unwrap_or(0)
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|&(_, w)| w).sum()
    }

    /// Push-forward of the weights to time index `k`.
    pub fn marginal(&self, k: usize) -> AtomicTorusMeasure {
        let mut map: BTreeMap<usize, f64> = BTreeMap::new();
        for (curve, w) in &self.atoms {
            *map.entry(curve.nodes()[k]).or_insert(0.0) += w;
        }
        AtomicTorusMeasure { atoms: map.into_iter().collect() }
    }

    pub fn initial_measure(&self) -> AtomicTorusMeasure {
        self.marginal(0)
    }

    pub fn final_measure(&self) -> AtomicTorusMeasure {
        self.marginal(self.n_steps())
    }

    /// `(1 − α)·self + α·other`, merged, pruned below [`PRUNE_WEIGHT`] and renormalized.
    pub fn mix(&self, other: &CurveMeasure, alpha: f64) -> Result<Self> {
        let mut atoms: Vec<(DiscreteCurve, f64)> = Vec::with_capacity(self.len() + other.len());
        atoms.extend(self.atoms.iter().map(|(c, w)| (c.clone(), (1.0 - alpha) * w)));
        atoms.extend(other.atoms.iter().map(|(c, w)| (c.clone(), alpha * w)));
        let merged = Self::merge(atoms)?;
        Self::normalized(merged.atoms.into_iter().filter(|&(_, w)| w >= PRUNE_WEIGHT).collect())
    }

    /// Rescale atoms so that the initial marginal equals `mu0` group by group.
    pub fn pin_initial(&self, mu0: &AtomicTorusMeasure) -> Result<Self> {
        let groups = group_by_start(self);
        let mut atoms = Vec::with_capacity(self.len());
        for g in groups {
            let target = mu0.weight_of(g.start);
            if target <= 0.0 {
                return Err(Error::InvalidMeasure("curve starts outside the support of the initial measure"));
            }
            atoms.extend(g.conditional.atoms.into_iter().map(|(c, w)| (c, w * target)));
        }
        Self::merge(atoms)
    }

    pub fn check_grid(&self, grid: &TorusGrid) -> Result<()> {
        if self.n_steps() != grid.n_steps() {
            return Err(Error::DimensionMismatch { expected: grid.n_steps(), found: self.n_steps() });
        }
        let n = grid.n_cells();
        if self.atoms.iter().any(|(c, _)| c.nodes().iter().any(|&x| x >= n)) {
            return Err(Error::InvalidMeasure("curve node outside the grid"));
        }
        Ok(())
    }

    /// Every atom moves at most `reach` per time step.
    pub fn is_stencil_feasible(&self, grid: &TorusGrid, reach: f64) -> bool {
        self.atoms.iter().all(|(c, _)| c.is_feasible(grid, reach))
    }
}

/// Evaluation curve `ξ(t_k) = ev_{t_k} # ξ` for every time index.
pub fn evaluation_curve(xi: &CurveMeasure) -> EvaluationCurveTable {
    EvaluationCurveTable::new((0..=xi.n_steps()).map(|k| xi.marginal(k)).collect())
}

fn cost_table<F: Fn(usize, usize) -> f64>(n: usize, m: usize, f: F) -> Vec<f64> {
    let mut out = Vec::with_capacity(n * m);
    for i in 0..n {
        for j in 0..m {
            out.push(f(i, j));
        }
    }
    out
}

/// Exact W1 between cell measures with the periodic ground metric.
pub fn wasserstein1(grid: &TorusGrid, mu: &AtomicTorusMeasure, nu: &AtomicTorusMeasure) -> Result<f64> {
    wasserstein1_capped(grid, mu, nu, DEFAULT_SIZE_CAP)
}

pub fn wasserstein1_capped(
    grid: &TorusGrid,
    mu: &AtomicTorusMeasure,
    nu: &AtomicTorusMeasure,
    cap: usize,
) -> Result<f64> {
    check_cap(mu.len().max(nu.len()), cap)?;
    if mu == nu {
        return Ok(0.0);
    }
    let a: Vec<f64> = mu.atoms().iter().map(|&(_, w)| w).collect();
    let b: Vec<f64> = nu.atoms().iter().map(|&(_, w)| w).collect();
    let cost = cost_table(a.len(), b.len(), |i, j| grid.cell_distance(mu.atoms()[i].0, nu.atoms()[j].0));
    Ok(solve_transport(&a, &b, &cost).plan.cost)
}

fn check_cap(atoms: usize, cap: usize) -> Result<()> {
    if atoms > cap {
        return Err(Error::SizeCap { atoms, cap });
    }
    Ok(())
}

/// Uniform distance `max_k |ζ_k − η_k|` between two curves on the same time grid.
pub fn curve_distance(grid: &TorusGrid, a: &DiscreteCurve, b: &DiscreteCurve) -> f64 {
    a.nodes()
        .iter()
        .zip(b.nodes())
        .map(|(&x, &y)| grid.cell_distance(x, y))
        .fold(0.0, f64::max)
}

/// Exact W1 between curve measures with the uniform ground metric.
pub fn wasserstein1_curves(grid: &TorusGrid, xi1: &CurveMeasure, xi2: &CurveMeasure) -> Result<f64> {
    wasserstein1_curves_capped(grid, xi1, xi2, DEFAULT_SIZE_CAP)
}

pub fn wasserstein1_curves_capped(
    grid: &TorusGrid,
    xi1: &CurveMeasure,
    xi2: &CurveMeasure,
    cap: usize,
) -> Result<f64> {
    check_cap(xi1.len().max(xi2.len()), cap)?;
    if xi1.n_steps() != xi2.n_steps() {
        return Err(Error::DimensionMismatch { expected: xi1.n_steps(), found: xi2.n_steps() });
    }
    let a: Vec<f64> = xi1.atoms().iter().map(|&(_, w)| w).collect();
    let b: Vec<f64> = xi2.atoms().iter().map(|&(_, w)| w).collect();
    let cost = cost_table(a.len(), b.len(), |i, j| curve_distance(grid, &xi1.atoms()[i].0, &xi2.atoms()[j].0));
    Ok(solve_transport(&a, &b, &cost).plan.cost)
}

/// Minimal transport cost between `mu` and `nu` for the cost matrix `s`, with an optimal plan.
///
/// Plan indices refer to the atom lists of `mu` and `nu`.
pub fn transport_cost(
    mu: &AtomicTorusMeasure,
    nu: &AtomicTorusMeasure,
    s: &CostMatrix,
) -> Result<(f64, TransportPlan)> {
    check_cap(mu.len().max(nu.len()), DEFAULT_SIZE_CAP)?;
    for &(x, _) in mu.atoms() {
        for &(y, _) in nu.atoms() {
            if x >= s.n_cells() || y >= s.n_cells() {
                return Err(Error::InvalidMeasure("atom outside the cost matrix"));
            }
            if s.get(x, y) >= UNREACHABLE_THRESHOLD {
                return Err(Error::InfeasibleCost { source: x, target: y });
            }
        }
    }
    let a: Vec<f64> = mu.atoms().iter().map(|&(_, w)| w).collect();
    let b: Vec<f64> = nu.atoms().iter().map(|&(_, w)| w).collect();
    let cost = cost_table(a.len(), b.len(), |i, j| s.get(mu.atoms()[i].0, nu.atoms()[j].0));
    let plan = solve_transport(&a, &b, &cost).plan;
    Ok((plan.cost, plan))
}

/// Integrated quantities of the optimality identity for a curve measure.
#[derive(Clone, Debug, PartialEq)]
pub struct CertificateReport {
    /// `∫ A dξ`.
    pub integrated_action: f64,
    /// `⟨ξ(0), v(·, 0)⟩`.
    pub initial_value: f64,
    /// `⟨ξ(T), g⟩`.
    pub final_value: f64,
    /// `∫ A dξ − (⟨ξ(0), v(·,0)⟩ − ⟨ξ(T), g⟩)`, accumulated atom by atom.
    pub gap: f64,
    /// `A(ζ) + g(ζ_T) − v(ζ_0, 0)` per atom, in atom order.
    pub atom_gaps: Vec<f64>,
}

impl CertificateReport {
    pub fn is_optimal(&self, tol: f64) -> bool {
        self.gap <= tol
    }
}

/// Certificate of `ξ` against a value field solved for the coupling that `ξ` is tested in.
pub fn optimality_certificate(xi: &CurveMeasure, vf: &ValueField) -> CertificateReport {
    let n_t = vf.n_steps();
    let mut integrated_action = 0.0;
    let mut initial_value = 0.0;
    let mut final_value = 0.0;
    let mut gap = 0.0;
    let mut atom_gaps = Vec::with_capacity(xi.len());
    for (curve, w) in xi.atoms() {
        let nodes = curve.nodes();
        let action = vf.path_cost(nodes);
        let start = vf.value(nodes[0], 0);
        let end = vf.final_datum()[nodes[n_t]];
        let g = (action + end) - start;
        integrated_action += w * action;
        initial_value += w * start;
        final_value += w * end;
        gap += w * g;
        atom_gaps.push(g);
    }
    CertificateReport { integrated_action, initial_value, final_value, gap, atom_gaps }
}

/// Conditional curve measure of the atoms starting at one cell.
#[derive(Clone, Debug, PartialEq)]
pub struct StartGroup {
    pub start: usize,
    pub mass: f64,
    pub conditional: CurveMeasure,
}

/// Disintegration of `ξ` with respect to the starting cell.
pub fn group_by_start(xi: &CurveMeasure) -> Vec<StartGroup> {
    let mut map: BTreeMap<usize, Vec<(DiscreteCurve, f64)>> = BTreeMap::new();
    for (c, w) in xi.atoms() {
        map.entry(c.nodes()[0]).or_default().push((c.clone(), *w));
    }
    map.into_iter()
        .map(|(start, atoms)| {
            let mass: f64 = atoms.iter().map(|&(_, w)| w).sum();
            let conditional = CurveMeasure {
                atoms: atoms.into_iter().map(|(c, w)| (c, w / mass)).collect(),
            };
            StartGroup { start, mass, conditional }
        })
        .collect()
}

/// Inverse of [`group_by_start`]: `ξ = Σ_x mass_x · η_x`.
pub fn recombine(groups: &[StartGroup]) -> Result<CurveMeasure> {
    let atoms = groups
        .iter()
        .flat_map(|g| g.conditional.atoms.iter().map(move |(c, w)| (c.clone(), w * g.mass)))
        .collect();
    CurveMeasure::merge(atoms)
}
