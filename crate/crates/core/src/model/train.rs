use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::arch::Architecture;
use super::network::{check_dataset, loss_and_grad};
use super::params::{init_params, ModelParams};
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub weight_decay: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            momentum: 0.9,
            epochs: 30,
            batch_size: 32,
            seed: 0,
            weight_decay: 0.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid(format!(
                "learning rate {} must be finite and >= 0",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid(format!(
                "momentum {} outside [0, 1)",
                self.momentum
            )));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::invalid("epochs and batch size must be at least 1"));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::invalid(format!(
                "weight decay {} must be finite and >= 0",
                self.weight_decay
            )));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }
}

/// Heavy-ball SGD: `v = momentum * v + g + wd * theta; theta -= lr * v`.
#[derive(Debug, Clone)]
pub struct Momentum {
    velocity: Vec<f64>,
    momentum: f64,
    weight_decay: f64,
}

impl Momentum {
    pub fn new(n_params: usize, momentum: f64, weight_decay: f64) -> Self {
        Self {
            velocity: vec![0.0; n_params],
            momentum,
            weight_decay,
        }
    }

    pub fn step(&mut self, params: &mut ModelParams, grads: &[f64], learning_rate: f64) {
        let (mu, wd) = (self.momentum, self.weight_decay);
        for ((theta, v), g) in params
            .values_mut()
            .iter_mut()
            .zip(&mut self.velocity)
            .zip(grads)
        {
            *v = mu * *v + g + wd * *theta;
            *theta -= learning_rate * *v;
        }
    }
}

/// Shuffled minibatches over a fixed index set; reshuffles after each pass.
pub struct BatchSampler {
    order: Vec<usize>,
    batch_size: usize,
    cursor: usize,
    rng: ChaCha8Rng,
}

impl BatchSampler {
    pub fn new(indices: &[usize], batch_size: usize, seed: u64) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::invalid(
                "cannot sample batches from an empty index set",
            ));
        }
        let mut sampler = Self {
            order: indices.to_vec(),
            batch_size: batch_size.max(1),
            cursor: 0,
            rng: stream_rng(seed, Stream::Shuffle),
        };
        sampler.order.shuffle(&mut sampler.rng);
        Ok(sampler)
    }

    pub fn batches_per_epoch(&self) -> usize {
        self.order.len().div_ceil(self.batch_size)
    }

    pub fn next_batch(&mut self) -> &[usize] {
        if self.cursor >= self.order.len() {
            self.order.shuffle(&mut self.rng);
            self.cursor = 0;
        }
        let start = self.cursor;
        self.cursor = (start + self.batch_size).min(self.order.len());
        &self.order[start..self.cursor]
    }
}

pub fn train(
    arch: &Architecture,
    dataset: &LabeledDataset,
    config: &TrainConfig,
) -> Result<ModelParams> {
    let all: Vec<usize> = (0..dataset.len()).collect();
    train_subset(arch, dataset, &all, config)
}

/// Train from a fresh `init_params(arch, config.seed)` on `indices` only.
pub fn train_subset(
    arch: &Architecture,
    dataset: &LabeledDataset,
    indices: &[usize],
    config: &TrainConfig,
) -> Result<ModelParams> {
    let params = init_params(arch, config.seed)?;
    fit(params, dataset, indices, config)
}

/// Continue training `params` for `config.epochs` passes over `indices`.
pub fn fit(
    mut params: ModelParams,
    dataset: &LabeledDataset,
    indices: &[usize],
    config: &TrainConfig,
) -> Result<ModelParams> {
    config.validate()?;
    check_dataset(&params, dataset)?;
    let mut sampler = BatchSampler::new(indices, config.batch_size, config.seed)?;
    let mut opt = Momentum::new(params.values().len(), config.momentum, config.weight_decay);
    for epoch in 0..config.epochs {
        for _ in 0..sampler.batches_per_epoch() {
            let (loss, grads) = loss_and_grad(&params, dataset, sampler.next_batch())?;
            if !loss.is_finite() {
                return Err(Error::TrainingDiverged { epoch });
            }
            opt.step(&mut params, &grads, config.learning_rate);
        }
        if !params.is_finite() {
            return Err(Error::TrainingDiverged { epoch });
        }
    }
    Ok(params)
}
