//! Joint estimation of the basic reproduction number and the serial interval
//! from case counts.
//!
//! The crate is organised bottom-up:
//!
//! - [`numerics`]: special functions and the Gaussian copula kernel.
//! - [`models`]: SIR / SEIR / SEAIR integration and Poisson observation sampling.
//! - [`prior`]: truncated log-Gamma marginals joined by a Gaussian copula on an
//!   (R0, γ) grid.
//! - [`estimator`]: the sequential Bayes grid update, medians, HDR regions.
//! - [`wp`]: the White–Pagano maximum-likelihood comparator.
//! - [`harness`]: datasets, studies, the sensitivity grid and real-data ingestion.

// `!(x > 0.0)` deliberately rejects NaN along with non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimator;
pub mod harness;
pub mod models;
pub mod numerics;
pub mod prior;
pub mod wp;

#[cfg(test)]
mod oracle;

pub use error::{Error, Result};
