//! Phase-space quantum filtering.
//!
//! Posterior quasi-characteristic functions (QCFs) and quasi-probability
//! densities (QPDFs) of open quantum systems under continuous nondemolition
//! measurement, the quantum Kalman filter for linear systems, its
//! Gaussian-approximation correction for non-quadratic potentials, and a grid
//! integrator of the full stochastic integro-differential equation.

pub mod error;
pub mod filters;
pub mod linalg;
pub mod linear;
pub mod measurement;
pub mod phase;
pub mod quadrature;
pub mod rng;
pub mod side;
pub mod weyl;

pub use error::{Error, Result};
