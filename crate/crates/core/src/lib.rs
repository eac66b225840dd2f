//! Koopman-invariant subspace identification from snapshot data.
//!
//! The centralized [`ssd::ssd`] decomposition finds the largest dictionary
//! subspace whose span is preserved by the dynamics on the data. The
//! [`pssd`] module runs the same identification as a network of agents that
//! each hold a slice of the data and exchange coefficient matrices with
//! their in-neighbors over a possibly lossy digraph.

pub mod dictionary;
pub mod dynamics;
pub mod error;
pub mod koopman;
pub mod linalg;
pub mod network;
pub mod pssd;
pub mod rng;
pub mod ssd;

pub use dictionary::{CoefficientMatrix, MonomialDictionary, Observables, ReducedDictionary};
pub use error::{Error, Result};
pub use linalg::{Matrix, Span, Tolerances};
pub use rng::RngSeed;

/// Shortest round-trip text for a float: 17 significant digits, `.` decimal.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}
