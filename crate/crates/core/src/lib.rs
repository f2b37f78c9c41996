//! Time-varying parameter VAR with stochastic volatility, estimated by
//! Gibbs sampling, and the date-specific impulse-response analysis used to
//! measure the economy-wide energy rebound effect.
//!
//! The crate is organised bottom-up:
//!
//! * [`series`] dated series, CSV ingestion and pre-estimation transforms
//! * [`var`] constant-parameter VAR estimation, lag selection and impulse responses
//! * [`kalman`] linear Gaussian state-space filtering, smoothing and path sampling
//! * [`tvp`] priors, conditional draws and the sampler itself
//! * [`analysis`] responses at a date, rebound paths and percentile tables
//! * [`synthetic`] generators with known truth

pub mod analysis;
pub mod error;
pub mod kalman;
pub mod linalg;
pub mod series;
pub mod synthetic;
pub mod tvp;
pub mod var;

pub use error::{Error, Result};
