//! Small-area estimation from complex survey panels.
//!
//! The crate fits Bayesian unit-level models to survey microdata observed
//! over repeated weeks under informative sampling, corrects for the design
//! through survey-weighted pseudo-likelihoods, and turns posterior draws
//! into poststratified domain estimates with credible intervals. It also
//! ships the design-based direct estimator and a repeated-sampling
//! evaluation harness that scores every estimator against known population
//! truth.
//!
//! Modules:
//! - [`data`]: panel data model, microdata ingest, weight scaling.
//! - [`rng`]: deterministic random streams and distribution kernels.
//! - [`gtulm`] / [`btulm`]: longitudinal Gaussian and binomial samplers.
//! - [`baselines`]: per-week cross-sectional models and the direct estimator.
//! - [`prediction`]: posterior-predictive poststratification.
//! - [`evaluation`]: synthetic populations, informative sampling, metrics,
//!   and the replicated study driver.
//! - [`diagnostics`]: KS / chi-square / MCSE helpers used by validation.
//! - [`parallel`]: data-parallel maps with a sequential fallback.

pub mod baselines;
pub mod btulm;
pub mod data;
pub mod diagnostics;
pub mod draws;
pub mod error;
pub mod evaluation;
pub mod gtulm;
pub mod parallel;
pub mod prediction;
pub mod rng;

pub use error::{Error, Result};
