//! Single Ring random matrices: sampling, centered spectral statistics, their
//! limit covariances, an exact Weingarten oracle, Monte Carlo checks and
//! multiplicative outliers.

pub mod covariance;
pub mod error;
pub mod laurent;
pub mod linalg;
pub mod model;
pub mod montecarlo;
pub mod outliers;
pub mod rng;
pub mod weingarten;

pub use error::{Error, Result};
pub use num_complex::Complex64;
