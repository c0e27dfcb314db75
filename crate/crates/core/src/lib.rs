//! Desk-scale machine-unlearning benchmark: trains ensembles of small
//! classifiers, applies unlearning methods, and scores them against
//! retrained oracles with the KL divergence of margins (KLoM).

pub mod error;
pub mod metrics;

pub use error::{Error, Result};
pub mod data;
pub mod forget;
pub mod model;
pub mod orchestrator;
mod rng;
pub mod store;
pub mod unlearn;
