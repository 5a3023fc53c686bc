//! Turns an ensemble of deterministic day-ahead price forecasts into sets of
//! joint 24-hour price scenarios.
//!
//! The centerpiece is a linear implicit generative model ([`igep`]) whose latent
//! noise adapts to the dispersion of the ensemble and which is trained by
//! minimising the energy score. Around it sit the proper scoring rules
//! ([`scoring`]), the benchmark scenario generators ([`baselines`]), the expert
//! point-forecasting ensemble ([`ensemble`]) and a rolling backtest harness
//! ([`harness`]).

pub mod baselines;
pub mod data;
pub mod ensemble;
mod error;
pub mod harness;
pub mod igep;
pub mod linalg;
pub mod rng;
pub mod scoring;
pub mod stats;

pub use error::{Error, Result};

/// Number of delivery hours per day, i.e. the output dimension of every model.
pub const HOURS: usize = 24;
