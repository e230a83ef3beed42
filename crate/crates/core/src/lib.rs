//! Exciton transport in laser-dressed Rydberg atom chains.
//!
//! The crate builds the exact dressed-chain Hamiltonian and its
//! perturbative effective models, propagates them with closed or open
//! dynamics, and evaluates transport, pumping and bound-state observables.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod basis;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod hamiltonian;
pub mod lattice;
pub mod linalg;
pub mod observables;
pub mod topology;

pub use error::{Error, Result};
