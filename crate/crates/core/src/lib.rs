//! Numerical lab for ensembles of pure Gaussian states with fixed marginals.

pub mod analytic;
pub mod constants;
pub mod constraints;
pub mod error;
pub mod fock;
pub(crate) mod linalg;
pub mod replica;
pub mod sampler;
pub mod symplectic;
pub mod verify;

pub use error::{Error, Result};
