use serde::{Deserialize, Serialize};

use super::histogram::HistogramConfig;
use super::klom::klom_point_with;
use crate::error::{Error, Result};

/// Next-token margins of one sequence under every model of an ensemble.
///
/// Row-major `n_models x positions`; column `t` is the margin of the true
/// token `w[t + 1]` given the prefix `w[..=t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenMarginTensor {
    pub sequence_id: String,
    n_models: usize,
    positions: usize,
    values: Vec<f64>,
}

impl TokenMarginTensor {
    pub fn from_rows(sequence_id: impl Into<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let sequence_id = sequence_id.into();
        let positions = rows.first().map_or(0, Vec::len);
        if rows.len() < 2 {
            return Err(Error::invalid(format!(
                "sequence `{sequence_id}` needs margins from at least 2 models"
            )));
        }
        if positions == 0 || rows.iter().any(|r| r.len() != positions) {
            return Err(Error::invalid(format!(
                "sequence `{sequence_id}` has empty or ragged position rows"
            )));
        }
        Ok(Self {
            sequence_id,
            n_models: rows.len(),
            positions,
            values: rows.concat(),
        })
    }

    pub fn n_models(&self) -> usize {
        self.n_models
    }

    pub fn positions(&self) -> usize {
        self.positions
    }

    pub fn position(&self, t: usize, n_models: usize) -> Vec<f64> {
        (0..n_models)
            .map(|m| self.values[m * self.positions + t])
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeacherForcingReport {
    /// `(sequence_id, mean KLoM over positions)` in input order.
    pub per_sequence: Vec<(String, f64)>,
    pub dataset_mean: f64,
    pub n_models_used: usize,
}

/// Dataset-level teacher-forcing KLoM: per-position KLoM averaged over the
/// positions of each sequence, then over sequences.
pub fn teacher_forcing_klom(
    oracle: &[TokenMarginTensor],
    unlearned: &[TokenMarginTensor],
    n_models: usize,
) -> Result<f64> {
    Ok(
        teacher_forcing_report(oracle, unlearned, n_models, HistogramConfig::default())?
            .dataset_mean,
    )
}

pub fn teacher_forcing_report(
    oracle: &[TokenMarginTensor],
    unlearned: &[TokenMarginTensor],
    n_models: usize,
    config: HistogramConfig,
) -> Result<TeacherForcingReport> {
    if oracle.is_empty() {
        return Err(Error::invalid("teacher-forcing KLoM over an empty dataset"));
    }
    if oracle.len() != unlearned.len() {
        return Err(Error::invalid(format!(
            "oracle has {} sequences, unlearned has {}",
            oracle.len(),
            unlearned.len()
        )));
    }
    let mut per_sequence = Vec::with_capacity(oracle.len());
    for (o, u) in oracle.iter().zip(unlearned) {
        if o.sequence_id != u.sequence_id {
            return Err(Error::invalid(format!(
                "sequence mismatch: `{}` vs `{}`",
                o.sequence_id, u.sequence_id
            )));
        }
        if o.positions != u.positions {
            return Err(Error::invalid(format!(
                "sequence `{}` has {} positions in the oracle ensemble and {} in the unlearned one",
                o.sequence_id, o.positions, u.positions
            )));
        }
        if n_models > o.n_models || n_models > u.n_models {
            return Err(Error::invalid(format!(
                "sequence `{}`: requested {n_models} models, have {} and {}",
                o.sequence_id, o.n_models, u.n_models
            )));
        }
        let total = (0..o.positions)
            .map(|t| klom_point_with(&o.position(t, n_models), &u.position(t, n_models), config))
            .sum::<Result<f64>>()?;
        per_sequence.push((o.sequence_id.clone(), total / o.positions as f64));
    }
    let dataset_mean = per_sequence.iter().map(|(_, v)| v).sum::<f64>() / per_sequence.len() as f64;
    Ok(TeacherForcingReport {
        per_sequence,
        dataset_mean,
        n_models_used: n_models,
    })
}
