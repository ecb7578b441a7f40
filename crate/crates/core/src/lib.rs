//! Multiply robust one-step and TMLE estimators of transported stochastic
//! direct and indirect effects with a binary intermediate confounder, plus an
//! exact-oracle simulation harness.
//!
//! The usual entry point is [`estimate::estimate_effects`]; see the cargo
//! examples for end-to-end use.

pub mod cli;
pub mod data;
pub mod eif;
pub mod error;
pub mod estimate;
pub mod nuisance;
pub mod regress;
pub mod sim;

pub use data::{Dataset, EffectSpec, Observation};
pub use error::{Error, Result};
pub use estimate::{estimate_effects, EffectEstimates, Estimate, EstimatorKind, EstimatorOptions};
pub use nuisance::{Component, Designs, MisspecSet, Nuisance};
