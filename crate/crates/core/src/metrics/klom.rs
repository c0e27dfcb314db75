use serde::{Deserialize, Serialize};

use super::divergence::kl_divergence;
use super::histogram::{build_histogram_pair, HistogramConfig};
use super::stats::{mean, percentile};
use super::tensor::{MarginTensor, Split};
use crate::error::{Error, Result};

/// Pointwise KLoM values for one split with their aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlomReport {
    pub per_point: Vec<f64>,
    pub mean: f64,
    pub p95: f64,
    pub split: Split,
    pub n_models_used: usize,
}

impl KlomReport {
    pub fn from_scores(per_point: Vec<f64>, split: Split, n_models_used: usize) -> Self {
        Self {
            mean: mean(&per_point),
            p95: percentile(&per_point, 95.0),
            per_point,
            split,
            n_models_used,
        }
    }
}

/// KL divergence from the oracle margin histogram to the unlearned one at a
/// single example, with default bins and smoothing.
pub fn klom_point(oracle: &[f64], unlearned: &[f64]) -> Result<f64> {
    klom_point_with(oracle, unlearned, HistogramConfig::default())
}

pub fn klom_point_with(oracle: &[f64], unlearned: &[f64], config: HistogramConfig) -> Result<f64> {
    let h = build_histogram_pair(oracle, unlearned, config)?;
    kl_divergence(&h.p_oracle, &h.q_unlearned)
}

/// Pointwise KLoM over every column, using the first `n_models` rows of each
/// ensemble.
pub fn klom_set(
    oracle: &MarginTensor,
    unlearned: &MarginTensor,
    n_models: usize,
) -> Result<KlomReport> {
    klom_set_with(oracle, unlearned, n_models, HistogramConfig::default())
}

pub fn klom_set_with(
    oracle: &MarginTensor,
    unlearned: &MarginTensor,
    n_models: usize,
    config: HistogramConfig,
) -> Result<KlomReport> {
    if oracle.n_points() != unlearned.n_points() {
        return Err(Error::invalid(format!(
            "point columns differ: oracle has {}, unlearned has {}",
            oracle.n_points(),
            unlearned.n_points()
        )));
    }
    if oracle.split() != unlearned.split() {
        return Err(Error::invalid(format!(
            "split mismatch: oracle is {}, unlearned is {}",
            oracle.split(),
            unlearned.split()
        )));
    }
    if n_models < 2 {
        return Err(Error::invalid(format!(
            "n_models must be at least 2, got {n_models}"
        )));
    }
    let available = oracle.n_models().min(unlearned.n_models());
    if n_models > available {
        return Err(Error::invalid(format!(
            "requested {n_models} models but only {available} are available"
        )));
    }
    let per_point = (0..oracle.n_points())
        .map(|j| {
            klom_point_with(
                &oracle.column(j, n_models),
                &unlearned.column(j, n_models),
                config,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(KlomReport::from_scores(per_point, oracle.split(), n_models))
}
