use serde::{Deserialize, Serialize};

use super::klom::klom_set;
use super::stats::DistributionSummary;
use super::tensor::{MarginTensor, Split};
use crate::error::{Error, Result};

pub const DEFAULT_N_GRID: [usize; 6] = [2, 5, 10, 20, 50, 100];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRow {
    pub split: Split,
    pub n_models: usize,
    pub summary: DistributionSummary,
}

/// Distribution of pointwise KLoM as a function of ensemble size.
///
/// Each row compares the first `N` models of both ensembles. Rows come back
/// in ascending `N` with duplicates removed.
pub fn sensitivity_curve(
    oracle: &MarginTensor,
    unlearned: &MarginTensor,
    n_values: &[usize],
) -> Result<Vec<SensitivityRow>> {
    let mut grid = n_values.to_vec();
    grid.sort_unstable();
    grid.dedup();
    if let Some(&n) = grid.first() {
        if n < 2 {
            return Err(Error::invalid(format!("ensemble size {n} is below 2")));
        }
    } else {
        return Err(Error::invalid("empty ensemble-size grid"));
    }
    grid.into_iter()
        .map(|n| {
            let report = klom_set(oracle, unlearned, n)?;
            Ok(SensitivityRow {
                split: report.split,
                n_models: n,
                summary: DistributionSummary::from_values(&report.per_point),
            })
        })
        .collect()
}
