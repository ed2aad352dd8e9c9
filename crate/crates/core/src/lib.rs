//! Desk-scale laboratory for noisy variational quantum algorithms:
//! density-matrix simulation with gate-level noise, parameter-shift
//! gradients, zero-noise extrapolation, a physics-informed neural
//! surrogate of the mitigated optimization flow, and the metrics used to
//! compare them.

pub mod analysis;
pub mod circuit;
mod eig;
pub mod error;
pub mod estimators;
pub mod hamiltonians;
pub mod pauli;
pub mod problem;
pub mod rng;
pub mod sim;
pub mod surrogate;
pub mod workflow;
pub mod zne;

pub use error::{Error, Result};
