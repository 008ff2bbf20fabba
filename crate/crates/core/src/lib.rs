//! Context-aware classification on synthetic Gaussian data: data generation,
//! linear and MLP predictors, population and empirical objectives, closed-form
//! oracles, Monte-Carlo evaluation and an experiment harness.

pub mod error;
pub mod eval;
pub mod harness;
pub mod objectives;
pub mod oracle;
pub mod predictors;
pub mod rng;
pub mod synthdata;

pub use error::{Error, Result};
