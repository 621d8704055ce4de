//! Simulation and identification of causal/noncausal autoregressions with
//! heavy-tailed innovations.
//!
//! The crate provides:
//! - innovation laws with seeded inverse-CDF sampling ([`dist`]);
//! - MAR(r, s) path generation by banded triangular solves and by direct
//!   recursion, plus a two-regime random-coefficient generator ([`simulate`]);
//! - an exact check-function minimizer (Barrodale-Roberts-style simplex) for
//!   quantile regression ([`solver`]);
//! - quantile (non)causal autoregression fitting, Hannan–Quinn order
//!   selection, and a Student-t approximate-ML baseline ([`models`]);
//! - SRAR curves, the aggregate-SRAR selection criterion, and curve shape
//!   diagnostics ([`srar`]);
//! - a seeded, replicate-parallel Monte Carlo harness for selection
//!   frequency tables and binding-function grids ([`montecarlo`]).

pub mod dist;
pub mod error;
pub mod models;
pub mod montecarlo;
mod optim;
pub mod simulate;
pub mod solver;
pub mod special;
pub mod srar;

#[cfg(any(test, feature = "oracle"))]
pub mod oracle;

pub use error::{Error, Result};
