use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Margins are clipped to `[-CLIP_BOUND, CLIP_BOUND]` before binning.
pub const CLIP_BOUND: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Forget,
    Retain,
    Val,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Forget, Split::Retain, Split::Val];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Forget => "forget",
            Split::Retain => "retain",
            Split::Val => "val",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "forget" => Ok(Split::Forget),
            "retain" => Ok(Split::Retain),
            "val" => Ok(Split::Val),
            other => Err(Error::invalid(format!(
                "unknown split `{other}` (expected forget, retain or val)"
            ))),
        }
    }
}

/// Per-model, per-example margins for one data split.
///
/// Row `i` holds model `i`; column `j` is the same example in every row.
/// Values are kept in single precision, which is also the on-disk format.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginTensor {
    values: Vec<f32>,
    n_models: usize,
    n_points: usize,
    clipped: bool,
    split: Split,
}

impl MarginTensor {
    pub fn new(values: Vec<f32>, n_models: usize, n_points: usize, split: Split) -> Result<Self> {
        if n_models < 2 {
            return Err(Error::invalid(format!(
                "a margin tensor needs at least 2 models, got {n_models}"
            )));
        }
        if values.len() != n_models * n_points {
            return Err(Error::invalid(format!(
                "{} values do not fill a {n_models}x{n_points} tensor",
                values.len()
            )));
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::invalid("margin tensor contains NaN"));
        }
        let clipped = values.iter().all(|&v| (v as f64).abs() <= CLIP_BOUND);
        Ok(Self {
            values,
            n_models,
            n_points,
            clipped,
            split,
        })
    }

    pub fn from_rows(rows: &[Vec<f32>], split: Split) -> Result<Self> {
        let n_points = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != n_points) {
            return Err(Error::invalid(format!(
                "row {bad} has {} points, row 0 has {n_points}",
                rows[bad].len()
            )));
        }
        Self::new(rows.concat(), rows.len(), n_points, split)
    }

    pub fn n_models(&self) -> usize {
        self.n_models
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn split(&self) -> Split {
        self.split
    }

    /// True when every entry lies in `[-CLIP_BOUND, CLIP_BOUND]`.
    pub fn is_clipped(&self) -> bool {
        self.clipped
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn row(&self, model: usize) -> &[f32] {
        &self.values[model * self.n_points..(model + 1) * self.n_points]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        self.values
            .chunks_exact(self.n_points.max(1))
            .take(self.n_models)
    }

    /// Margins of one example across the first `n_models` models.
    pub fn column(&self, point: usize, n_models: usize) -> Vec<f64> {
        (0..n_models)
            .map(|m| self.values[m * self.n_points + point] as f64)
            .collect()
    }

    /// Sub-ensemble made of the models in `range`.
    pub fn select_models(&self, range: Range<usize>) -> Result<Self> {
        if range.end > self.n_models || range.start >= range.end {
            return Err(Error::invalid(format!(
                "model range {range:?} outside 0..{}",
                self.n_models
            )));
        }
        let values = self.values[range.start * self.n_points..range.end * self.n_points].to_vec();
        Self::new(values, range.len(), self.n_points, self.split)
    }
}

/// Clamp every margin into `[-CLIP_BOUND, CLIP_BOUND]`.
pub fn clip_margins(raw: MarginTensor) -> MarginTensor {
    if raw.clipped {
        return raw;
    }
    let bound = CLIP_BOUND as f32;
    let values = raw.values.iter().map(|v| v.clamp(-bound, bound)).collect();
    MarginTensor {
        values,
        clipped: true,
        ..raw
    }
}

pub fn clip_value(v: f64) -> f64 {
    v.clamp(-CLIP_BOUND, CLIP_BOUND)
}
