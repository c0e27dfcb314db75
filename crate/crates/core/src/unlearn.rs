//! Unlearning algorithms behind a uniform `(params, dataset, forget, config)`
//! interface, looked up by name.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::forget::ForgetSpec;
use crate::model::{loss_and_grad, train_subset, BatchSampler, ModelParams, Momentum, TrainConfig};
use crate::rng::{stream_rng, Stream};

pub const NOISY_DESCENT: &str = "noisy_descent";
pub const FINETUNE_RETAIN: &str = "finetune_retain";
pub const GRADIENT_ASCENT: &str = "gradient_ascent_forget";
pub const RETRAIN: &str = "retrain";
pub const CONSTANT_MARGIN: &str = "constant_margin_adversary";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnlearnConfig {
    pub method_name: String,
    pub steps: usize,
    pub learning_rate: f64,
    /// Standard deviation of the Gaussian noise added to every gradient entry.
    pub noise_scale: f64,
    pub seed: u64,
    pub batch_size: usize,
    pub momentum: f64,
    /// Recipe used by `retrain`; the orchestrator fills it with the
    /// pretraining configuration.
    pub retrain: TrainConfig,
}

impl Default for UnlearnConfig {
    fn default() -> Self {
        Self {
            method_name: NOISY_DESCENT.to_string(),
            steps: 1000,
            learning_rate: 0.2,
            noise_scale: 0.01,
            seed: 0,
            batch_size: 32,
            momentum: 0.9,
            retrain: TrainConfig::default(),
        }
    }
}

impl UnlearnConfig {
    /// Defaults per built-in method, tuned on the desk benchmark. Unknown
    /// names get the descent schedule without noise.
    pub fn for_method(name: &str) -> Self {
        let base = Self {
            method_name: name.to_string(),
            noise_scale: 0.0,
            ..Self::default()
        };
        match name {
            NOISY_DESCENT => Self {
                noise_scale: 0.01,
                ..base
            },
            GRADIENT_ASCENT => Self {
                steps: 20,
                learning_rate: 0.01,
                ..base
            },
            _ => base,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.noise_scale >= 0.0 && self.noise_scale.is_finite()) {
            return Err(Error::invalid(format!(
                "noise scale {} must be finite and >= 0",
                self.noise_scale
            )));
        }
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
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        Ok(())
    }
}

pub type UnlearnFn = Arc<
    dyn Fn(&ModelParams, &LabeledDataset, &ForgetSpec, &UnlearnConfig) -> Result<ModelParams>
        + Send
        + Sync,
>;

/// Name-to-method table. Names are unique; unknown names are an error.
#[derive(Clone, Default)]
pub struct MethodRegistry {
    methods: BTreeMap<String, UnlearnFn>,
}

impl std::fmt::Debug for MethodRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.methods.keys()).finish()
    }
}

impl MethodRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registry holding every method shipped with the crate.
    pub fn with_builtins() -> Self {
        let mut r = Self::new();
        r.register(NOISY_DESCENT, Arc::new(noisy_descent)).unwrap();
        r.register(FINETUNE_RETAIN, Arc::new(finetune_retain))
            .unwrap();
        r.register(GRADIENT_ASCENT, Arc::new(gradient_ascent_forget))
            .unwrap();
        r.register(RETRAIN, Arc::new(retrain)).unwrap();
        r.register(
            CONSTANT_MARGIN,
            Arc::new(
                |p: &ModelParams, _: &LabeledDataset, _: &ForgetSpec, _: &UnlearnConfig| {
                    Ok(constant_margin_adversary(p))
                },
            ),
        )
        .unwrap();
        r
    }

    pub fn register(&mut self, name: &str, method: UnlearnFn) -> Result<()> {
        if self.methods.contains_key(name) {
            return Err(Error::DuplicateMethod(name.to_string()));
        }
        self.methods.insert(name.to_string(), method);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&UnlearnFn> {
        self.methods.get(name).ok_or_else(|| Error::NotFound {
            what: format!("unlearning method `{name}`"),
            available: self.names(),
        })
    }

    pub fn names(&self) -> Vec<String> {
        self.methods.keys().cloned().collect()
    }

    pub fn apply(
        &self,
        params: &ModelParams,
        dataset: &LabeledDataset,
        forget: &ForgetSpec,
        config: &UnlearnConfig,
    ) -> Result<ModelParams> {
        self.get(&config.method_name)?(params, dataset, forget, config)
    }
}

#[derive(Clone, Copy)]
enum Direction {
    Descent,
    Ascent,
}

fn sgd_steps(
    method: &str,
    params: &ModelParams,
    dataset: &LabeledDataset,
    indices: &[usize],
    config: &UnlearnConfig,
    direction: Direction,
    noise_scale: f64,
) -> Result<ModelParams> {
    config.validate()?;
    if config.steps == 0 {
        return Ok(params.clone());
    }
    let mut params = params.clone();
    let mut sampler = BatchSampler::new(indices, config.batch_size, config.seed)?;
    let mut opt = Momentum::new(params.values().len(), config.momentum, 0.0);
    let mut noise_rng = stream_rng(config.seed, Stream::Noise);
    let noise = Normal::new(0.0, noise_scale).map_err(|e| Error::invalid(e.to_string()))?;
    for step in 0..config.steps {
        let (loss, mut grads) = loss_and_grad(&params, dataset, sampler.next_batch())?;
        if let Direction::Ascent = direction {
            grads.iter_mut().for_each(|g| *g = -*g);
        }
        if noise_scale > 0.0 {
            grads.iter_mut().for_each(|g| *g += noise_rng.sample(noise));
        }
        opt.step(&mut params, &grads, config.learning_rate);
        if !loss.is_finite() || !params.is_finite() {
            return Err(Error::UnlearningDiverged {
                method: method.to_string(),
                step,
            });
        }
    }
    Ok(params)
}

fn retain_of(dataset: &LabeledDataset, forget: &ForgetSpec) -> Vec<usize> {
    forget.retain_indices(dataset.len())
}

/// Retain-set SGD with isotropic Gaussian noise on each gradient. The noise
/// stream is separate from batch shuffling, so `noise_scale = 0` reproduces
/// [`finetune_retain`] exactly.
pub fn noisy_descent(
    params: &ModelParams,
    dataset: &LabeledDataset,
    forget: &ForgetSpec,
    config: &UnlearnConfig,
) -> Result<ModelParams> {
    sgd_steps(
        NOISY_DESCENT,
        params,
        dataset,
        &retain_of(dataset, forget),
        config,
        Direction::Descent,
        config.noise_scale,
    )
}

/// Plain SGD on retain-set minibatches.
pub fn finetune_retain(
    params: &ModelParams,
    dataset: &LabeledDataset,
    forget: &ForgetSpec,
    config: &UnlearnConfig,
) -> Result<ModelParams> {
    sgd_steps(
        FINETUNE_RETAIN,
        params,
        dataset,
        &retain_of(dataset, forget),
        config,
        Direction::Descent,
        0.0,
    )
}

/// Gradient ascent on the forget-set loss.
pub fn gradient_ascent_forget(
    params: &ModelParams,
    dataset: &LabeledDataset,
    forget: &ForgetSpec,
    config: &UnlearnConfig,
) -> Result<ModelParams> {
    if config.steps == 0 {
        return Ok(params.clone());
    }
    sgd_steps(
        GRADIENT_ASCENT,
        params,
        dataset,
        &forget.indices,
        config,
        Direction::Ascent,
        0.0,
    )
}

/// Train from scratch on the retain set: the exact unlearning answer.
pub fn retrain_oracle(
    dataset: &LabeledDataset,
    forget: &ForgetSpec,
    arch_of: &ModelParams,
    config: &TrainConfig,
) -> Result<ModelParams> {
    let retain = retain_of(dataset, forget);
    if retain.is_empty() {
        return Err(Error::invalid("retain set is empty"));
    }
    train_subset(arch_of.arch(), dataset, &retain, config)
}

/// Registry adapter: retrains with the original model's seed so unlearned
/// member `i` stays tied to pretrain member `i`.
fn retrain(
    params: &ModelParams,
    dataset: &LabeledDataset,
    forget: &ForgetSpec,
    config: &UnlearnConfig,
) -> Result<ModelParams> {
    retrain_oracle(
        dataset,
        forget,
        params,
        &config.retrain.with_seed(params.seed()),
    )
}

/// Cuts the input pathway: first-layer weights are zeroed, biases and deeper
/// layers kept, so every input produces the same logits.
pub fn constant_margin_adversary(params: &ModelParams) -> ModelParams {
    let mut out = params.clone();
    let (w, _) = out.layer_mut(0);
    w.iter_mut().for_each(|x| *x = 0.0);
    out
}
