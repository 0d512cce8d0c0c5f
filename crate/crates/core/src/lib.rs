//! Demographic bias auditing for face-identification systems.
//!
//! The crate turns prediction logs plus subject attribute metadata into
//! per-group accuracy, FNMR and FMR ([`metrics`]), weighs those rates into a
//! risk of bias per group and an ensemble risk per subject ([`risk`]), and
//! supports what-if queries over a causal network of the bias attributes
//! ([`beliefnet`]).

pub mod beliefnet;
pub mod dataset;
mod error;
pub mod fixtures;
pub mod metrics;
pub mod report;
pub mod risk;

pub use error::{Error, Result};
