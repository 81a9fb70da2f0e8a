//! Grid laboratory for first-order mean field games on the flat torus.
//!
//! The crate is `no_std` and only needs `alloc`. It covers the periodic
//! geometry ([`torus`]), the Hamiltonian/Lagrangian family and its Fenchel
//! transforms ([`models`]), the backward dynamic-programming solution of the
//! Hamilton–Jacobi equation ([`hj`]), optimal discrete curves and minimal-cost
//! matrices ([`paths`]), atomic measures and exact transport ([`measures`]),
//! the drift field and continuity-equation diagnostics ([`field_ce`]) and the
//! damped fixed-point driver over measures on curves ([`mfg`]).
#![no_std]
#![deny(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod field_ce;
pub mod hj;
pub mod measures;
pub mod mfg;
pub mod models;
pub mod paths;
pub mod torus;

pub use error::{Error, Result};
