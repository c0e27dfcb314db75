use super::network::forward_batch;
use super::params::ModelParams;
use crate::data::LabeledDataset;
use crate::error::Result;
use crate::metrics::compute_margin;

/// Margin of each example in `indices` under `params`.
pub fn compute_margins(
    params: &ModelParams,
    dataset: &LabeledDataset,
    indices: &[usize],
) -> Result<Vec<f64>> {
    forward_batch(params, dataset, indices)?
        .iter()
        .zip(indices)
        .map(|(logits, &i)| compute_margin(logits, dataset.label(i)))
        .collect()
}

pub fn compute_all_margins(params: &ModelParams, dataset: &LabeledDataset) -> Result<Vec<f64>> {
    let all: Vec<usize> = (0..dataset.len()).collect();
    compute_margins(params, dataset, &all)
}
