use serde::{Deserialize, Serialize};

use super::tensor::clip_value;
use crate::error::{Error, Result};

pub const DEFAULT_BINS: usize = 20;
pub const DEFAULT_EPSILON: f64 = 1e-5;

/// Binning and smoothing hyperparameters shared by every KLoM computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramConfig {
    pub bins: usize,
    pub epsilon: f64,
}

impl Default for HistogramConfig {
    fn default() -> Self {
        Self {
            bins: DEFAULT_BINS,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

impl HistogramConfig {
    /// Probability floor every bin reaches after smoothing.
    pub fn floor(&self) -> f64 {
        self.epsilon / (1.0 + self.bins as f64 * self.epsilon)
    }

    /// KL divergence between two point masses in different bins, the largest
    /// value the smoothed estimator can produce.
    pub fn max_divergence(&self) -> f64 {
        ((1.0 + self.epsilon) / self.epsilon).ln() / (1.0 + self.bins as f64 * self.epsilon)
    }
}

/// Oracle and unlearned margin samples binned onto one shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedHistogramPair {
    pub bin_edges: Vec<f64>,
    pub p_oracle: Vec<f64>,
    pub q_unlearned: Vec<f64>,
    pub epsilon: f64,
}

/// Bin both sample sets over the joint `[min, max]` of their union.
///
/// Bins have equal width and are half-open except the last, which is closed.
/// Each normalized count gets `epsilon` added and the vector is renormalized
/// by `1 + bins * epsilon`. Samples are clipped first. When every sample is
/// identical both distributions put all mass in bin 0 of a unit-width grid.
pub fn build_histogram_pair(
    oracle: &[f64],
    unlearned: &[f64],
    config: HistogramConfig,
) -> Result<SmoothedHistogramPair> {
    let HistogramConfig { bins, epsilon } = config;
    if bins < 1 {
        return Err(Error::invalid("histogram needs at least one bin"));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::invalid(format!(
            "smoothing epsilon must be positive, got {epsilon}"
        )));
    }
    for (name, samples) in [("oracle", oracle), ("unlearned", unlearned)] {
        if samples.len() < 2 {
            return Err(Error::invalid(format!(
                "{name} sample set has {} values, need at least 2",
                samples.len()
            )));
        }
        if samples.iter().any(|v| v.is_nan()) {
            return Err(Error::invalid(format!("{name} samples contain NaN")));
        }
    }

    let (lo, hi) = oracle
        .iter()
        .chain(unlearned)
        .map(|&v| clip_value(v))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });

    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo, lo + 1.0) };
    let width = (hi - lo) / bins as f64;
    let mut bin_edges: Vec<f64> = (0..bins).map(|i| lo + i as f64 * width).collect();
    bin_edges.push(hi);

    let p_oracle = smoothed_probabilities(oracle, &bin_edges, epsilon);
    let q_unlearned = smoothed_probabilities(unlearned, &bin_edges, epsilon);
    Ok(SmoothedHistogramPair {
        bin_edges,
        p_oracle,
        q_unlearned,
        epsilon,
    })
}

fn bin_index(v: f64, edges: &[f64]) -> usize {
    let bins = edges.len() - 1;
    let (lo, hi) = (edges[0], edges[bins]);
    let mut idx = (((v - lo) / (hi - lo)) * bins as f64).floor().max(0.0) as usize;
    idx = idx.min(bins - 1);
    // The arithmetic guess can land one bin off right at an edge.
    while idx + 1 < bins && v >= edges[idx + 1] {
        idx += 1;
    }
    while idx > 0 && v < edges[idx] {
        idx -= 1;
    }
    idx
}

fn smoothed_probabilities(samples: &[f64], edges: &[f64], epsilon: f64) -> Vec<f64> {
    let bins = edges.len() - 1;
    let mut counts = vec![0usize; bins];
    for &v in samples {
        counts[bin_index(clip_value(v), edges)] += 1;
    }
    let n = samples.len() as f64;
    let norm = 1.0 + bins as f64 * epsilon;
    counts
        .into_iter()
        .map(|c| (c as f64 / n + epsilon) / norm)
        .collect()
}
