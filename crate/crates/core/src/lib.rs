//! Bayesian dynamic zero-inflated Poisson state-space models.
//!
//! Counts `y_t` are generated by a gate `s_t ~ Bernoulli(pi)` and, when the
//! gate is open, a Poisson draw with log-intensity `z_t`. The log-intensity
//! follows a random walk whose increments come from one of four innovation
//! models (Gaussian, Student-t, two-component Gaussian scale mixture, or
//! stochastic volatility). Posterior simulation is a Gibbs-Metropolis sampler;
//! the crate also provides one-step-ahead density forecasts and a
//! rolling-origin backtest harness.
//!
//! Module map:
//!
//! - [`count_model`]: observed series and the zero-inflated Poisson density.
//! - [`latent`]: tridiagonal random-walk precision, single-site updates of
//!   the log-intensity path, gate indicators and `pi`.
//! - [`innovations`]: the four increment models and their hyperparameter
//!   updates.
//! - [`engine`]: the full sampler, draw storage and [`diagnostics`].
//! - [`forecast`]: predictive draws, log predictive score, coverage and point
//!   metrics.
//! - [`backtest`]: rolling-origin evaluation.
//! - [`io`] and [`simulate`]: CSV ingestion, report emission and synthetic
//!   data.

pub mod backtest;
pub mod count_model;
pub mod diagnostics;
pub mod dist;
pub mod engine;
mod error;
pub mod forecast;
pub mod innovations;
pub mod io;
pub mod latent;
pub mod priors;
pub mod simulate;
pub mod tridiag;

pub use count_model::{poisson_log_pmf, zip_log_pmf, CountSeries, ZipParams};
pub use engine::{run_chain, DrawStore, McmcConfig};
pub use error::{Error, Result};
pub use innovations::{InnovationModel, InnovationState};
pub use priors::{Priors, Z0Prior};

/// Deterministic per-stream RNG used throughout the crate.
pub type ChainRng = rand_chacha::ChaCha8Rng;
