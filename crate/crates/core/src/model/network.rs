use super::params::ModelParams;
use crate::data::LabeledDataset;
use crate::error::{Error, Result};

/// Activations of every layer for one input; `acts[0]` is the input.
struct Activations {
    acts: Vec<Vec<f64>>,
}

impl Activations {
    fn new(params: &ModelParams) -> Self {
        Self {
            acts: params
                .arch()
                .widths()
                .iter()
                .map(|&w| vec![0.0; w])
                .collect(),
        }
    }

    fn forward(&mut self, params: &ModelParams, x: &[f64]) -> &[f64] {
        self.acts[0].copy_from_slice(x);
        let n_layers = params.arch().n_layers();
        for l in 0..n_layers {
            let (w, b) = params.layer(l);
            let (inputs, outputs) = self.acts.split_at_mut(l + 1);
            let z = &inputs[l];
            let out = &mut outputs[0];
            let fan_in = z.len();
            for (j, o) in out.iter_mut().enumerate() {
                let row = &w[j * fan_in..(j + 1) * fan_in];
                let a = b[j] + row.iter().zip(z).map(|(wi, zi)| wi * zi).sum::<f64>();
                *o = if l + 1 < n_layers { a.tanh() } else { a };
            }
        }
        &self.acts[n_layers]
    }
}

fn check_input(params: &ModelParams, features: &[f64]) -> Result<()> {
    if features.len() != params.arch().input_dim() {
        return Err(Error::invalid(format!(
            "input has dimension {}, model expects {}",
            features.len(),
            params.arch().input_dim()
        )));
    }
    Ok(())
}

pub(crate) fn check_dataset(params: &ModelParams, dataset: &LabeledDataset) -> Result<()> {
    if dataset.dim() != params.arch().input_dim() {
        return Err(Error::invalid(format!(
            "dataset has dimension {}, model expects {}",
            dataset.dim(),
            params.arch().input_dim()
        )));
    }
    if dataset.n_classes() > params.arch().n_outputs() {
        return Err(Error::invalid(format!(
            "dataset has {} classes, model has {} outputs",
            dataset.n_classes(),
            params.arch().n_outputs()
        )));
    }
    Ok(())
}

/// Output logits `f(x; params)`.
pub fn forward_logits(params: &ModelParams, features: &[f64]) -> Result<Vec<f64>> {
    check_input(params, features)?;
    Ok(Activations::new(params).forward(params, features).to_vec())
}

/// Logits for every example of a dataset, row-major `n x K`.
pub fn forward_batch(
    params: &ModelParams,
    dataset: &LabeledDataset,
    indices: &[usize],
) -> Result<Vec<Vec<f64>>> {
    check_dataset(params, dataset)?;
    let mut work = Activations::new(params);
    indices
        .iter()
        .map(|&i| {
            if i >= dataset.len() {
                return Err(Error::invalid(format!(
                    "index {i} outside dataset of {}",
                    dataset.len()
                )));
            }
            Ok(work.forward(params, dataset.row(i)).to_vec())
        })
        .collect()
}

fn log_softmax_loss(logits: &[f64], label: usize, probs: &mut [f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (p, &z) in probs.iter_mut().zip(logits) {
        *p = (z - max).exp();
        total += *p;
    }
    for p in probs.iter_mut() {
        *p /= total;
    }
    max + total.ln() - logits[label]
}

/// Mean cross-entropy over `batch` and its exact gradient, laid out like
/// [`ModelParams::values`].
pub fn loss_and_grad(
    params: &ModelParams,
    dataset: &LabeledDataset,
    batch: &[usize],
) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    check_dataset(params, dataset)?;
    let arch = params.arch();
    let offsets = ModelParams::layer_offsets(arch);
    let shapes: Vec<(usize, usize)> = arch.layer_shapes().collect();
    let n_layers = shapes.len();
    let scale = 1.0 / batch.len() as f64;

    let mut work = Activations::new(params);
    let mut grads = vec![0.0; arch.n_params()];
    let mut probs = vec![0.0; arch.n_outputs()];
    let mut delta: Vec<f64> = Vec::new();
    let mut prev: Vec<f64> = Vec::new();
    let mut loss = 0.0;

    for &i in batch {
        if i >= dataset.len() {
            return Err(Error::invalid(format!(
                "index {i} outside dataset of {}",
                dataset.len()
            )));
        }
        let label = dataset.label(i);
        let logits = work.forward(params, dataset.row(i));
        loss += log_softmax_loss(logits, label, &mut probs);

        delta.clear();
        delta.extend(probs.iter().map(|p| p * scale));
        delta[label] -= scale;

        for l in (0..n_layers).rev() {
            let (fan_in, fan_out) = shapes[l];
            let z = &work.acts[l];
            let (gw, gb) = grads[offsets[l]..offsets[l + 1]].split_at_mut(fan_in * fan_out);
            for j in 0..fan_out {
                let d = delta[j];
                gb[j] += d;
                for (g, zi) in gw[j * fan_in..(j + 1) * fan_in].iter_mut().zip(z) {
                    *g += d * zi;
                }
            }
            if l > 0 {
                let (w, _) = params.layer(l);
                prev.clear();
                prev.resize(fan_in, 0.0);
                for j in 0..fan_out {
                    let d = delta[j];
                    for (p, wi) in prev.iter_mut().zip(&w[j * fan_in..(j + 1) * fan_in]) {
                        *p += wi * d;
                    }
                }
                for (p, zi) in prev.iter_mut().zip(z) {
                    *p *= 1.0 - zi * zi;
                }
                std::mem::swap(&mut delta, &mut prev);
            }
        }
    }
    Ok((loss * scale, grads))
}

/// Mean cross-entropy without gradients.
pub fn mean_loss(params: &ModelParams, dataset: &LabeledDataset, batch: &[usize]) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    let mut probs = vec![0.0; params.arch().n_outputs()];
    let total: f64 = forward_batch(params, dataset, batch)?
        .iter()
        .zip(batch)
        .map(|(logits, &i)| log_softmax_loss(logits, dataset.label(i), &mut probs))
        .sum();
    Ok(total / batch.len() as f64)
}

/// Fraction of `indices` whose argmax logit equals the label.
pub fn accuracy(params: &ModelParams, dataset: &LabeledDataset, indices: &[usize]) -> Result<f64> {
    if indices.is_empty() {
        return Err(Error::invalid("accuracy over an empty index set"));
    }
    let correct = forward_batch(params, dataset, indices)?
        .iter()
        .zip(indices)
        .filter(|(logits, &i)| {
            let best = logits
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(k, _)| k);
            best == Some(dataset.label(i))
        })
        .count();
    Ok(correct as f64 / indices.len() as f64)
}
