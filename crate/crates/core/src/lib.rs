//! Estimation core for emergency-response coverage boundaries.
//!
//! The crate is `no_std` (with `alloc`) and holds every numerical routine:
//! the effectiveness transform and descriptive statistics, the calibrated
//! incident simulator, log-linear decay estimation with HC1 covariance and
//! delta-method boundaries, kernel / local-polynomial / smoothing-spline
//! curve estimation, difference-in-differences and event studies, the
//! residual specification test, and the street-network diffusion model.
//!
//! File formats, configuration files and the command-line front end live in
//! the `boundary-lab` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod causal;
pub mod data;
mod error;
pub mod linalg;
pub mod math;
pub mod network;
pub mod nonparametric;
pub mod ols;
pub mod parametric;
pub mod simulate;
pub mod spectest;
pub mod vulnerable;

pub use error::{Error, Result};
