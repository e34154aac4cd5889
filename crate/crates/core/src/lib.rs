//! Correlation-aware precoder design for over-the-air computation.
//!
//! `K` sensor nodes each hold `n` correlated measurements, precode them onto
//! `m` antennas, and transmit simultaneously so that an `r`-antenna
//! aggregator receives the superposition. The aggregator estimates the sum
//! of the nodes' vectors with an LMMSE receiver.
//!
//! Modules, bottom-up:
//!
//! - [`numerics`]: eigendecomposition, Cholesky and positive-definite solves.
//! - [`model`]: configuration, covariances, summation matrix and block mask.
//! - [`waterfill`]: power allocation over joint eigenmodes.
//! - [`precoder`]: the correlation-aware design and three baselines.
//! - [`receiver`]: LMMSE matrix and the two MSE evaluations.
//! - [`montecarlo`]: seeded trials and parameter sweeps.
//! - `cli` (feature `cli`): config files, CSV output and figure presets.

#[cfg(feature = "cli")]
pub mod cli;
pub mod error;
pub mod model;
pub mod montecarlo;
pub mod numerics;
pub mod precoder;
pub mod receiver;
pub mod waterfill;

pub use error::{Error, Result};
