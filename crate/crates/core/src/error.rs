use core::fmt;

/// Errors raised by the grid solvers and measure routines.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Grid parameters out of range.
    InvalidGrid(&'static str),
    /// Model parameters violate the structural assumptions.
    InvalidModel(&'static str),
    /// Weights negative, not normalized, or referring to unknown cells.
    InvalidMeasure(&'static str),
    /// The velocity cap does not reach a neighbouring cell in one time step.
    EmptyStencil { reach: f64, dx: f64 },
    /// A model evaluation produced NaN or infinity.
    NonFiniteValue { cell: usize, step: usize },
    /// A pinned-endpoint minimum could not be produced within the stencil.
    Unreachable { from: usize, to: usize },
    /// Exact transport refused: too many atoms.
    SizeCap { atoms: usize, cap: usize },
    /// A transport cost entry needed by the plan is the unreachable sentinel.
    InfeasibleCost { source: usize, target: usize },
    /// An atom of a curve measure is not optimal for the value field.
    NotOptimalSupport { atom: usize, gap: f64 },
    /// An atom has no velocity sample at some time index.
    CoverageGap { atom: usize, step: usize },
    /// Two objects were built on incompatible grids.
    DimensionMismatch { expected: usize, found: usize },
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidGrid(msg) => write!(f, "invalid grid: {msg}"),
            Error::InvalidModel(msg) => write!(f, "invalid model: {msg}"),
            Error::InvalidMeasure(msg) => write!(f, "invalid measure: {msg}"),
            Error::EmptyStencil { reach, dx } => write!(
                f,
                "empty-stencil: velocity reach {reach} per step is below the cell width {dx}"
            ),
            Error::NonFiniteValue { cell, step } => {
                write!(f, "nonfinite-value at cell {cell}, time index {step}")
            }
            Error::Unreachable { from, to } => {
                write!(f, "unreachable: no stencil path from cell {from} to cell {to}")
            }
            Error::SizeCap { atoms, cap } => {
                write!(f, "size-cap: {atoms} atoms exceed the cap of {cap}")
            }
            Error::InfeasibleCost { source, target } => write!(
                f,
                "infeasible-cost: cost entry ({source}, {target}) is the unreachable sentinel"
            ),
            Error::NotOptimalSupport { atom, gap } => {
                write!(f, "not-optimal-support: atom {atom} has optimality gap {gap}")
            }
            Error::CoverageGap { atom, step } => {
                write!(f, "coverage-gap: atom {atom} has no velocity sample at time index {step}")
            }
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
        }
    }
}

impl core::error::Error for Error {}
