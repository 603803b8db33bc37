//! Statistical core for evaluating state-level policy exposures on relative
//! outcome growth.
//!
//! The crate is organised the way an analysis flows:
//!
//! - [`dataset`] ingests policy, panel and covariate snapshots and builds the
//!   per-state observed data `(W, A, Y)`.
//! - [`learners`] holds the base-learner library (mean, additive splines,
//!   regression trees, gradient boosting, MARS) and correlation screening.
//! - [`super_learner`] stacks the library by cross-validation.
//! - [`estimators`] computes TMLE, G-computation and unadjusted contrasts with
//!   influence-curve inference.
//! - [`simlab`] generates data with known counterfactual truth and runs
//!   estimator validation experiments.

pub mod dataset;
pub mod error;
pub mod estimators;
pub mod learners;
pub mod simlab;
pub mod stats;
pub mod super_learner;

pub use error::{Error, Result};
