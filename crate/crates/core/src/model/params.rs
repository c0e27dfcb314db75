use rand::Rng;

use super::arch::Architecture;
use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

/// Flat parameter vector of a dense network.
///
/// Layer `l` stores its `fan_out x fan_in` row-major weights followed by
/// `fan_out` biases.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    arch: Architecture,
    seed: u64,
    values: Vec<f64>,
}

impl ModelParams {
    pub fn from_values(arch: Architecture, seed: u64, values: Vec<f64>) -> Result<Self> {
        arch.validate()?;
        if values.len() != arch.n_params() {
            return Err(Error::invalid(format!(
                "architecture expects {} parameters, got {}",
                arch.n_params(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("parameters must be finite"));
        }
        Ok(Self { arch, seed, values })
    }

    pub fn zeros(arch: Architecture) -> Result<Self> {
        let n = arch.n_params();
        Self::from_values(arch, 0, vec![0.0; n])
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub(crate) fn layer_offsets(arch: &Architecture) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(arch.n_layers() + 1);
        let mut at = 0;
        offsets.push(0);
        for (i, o) in arch.layer_shapes() {
            at += i * o + o;
            offsets.push(at);
        }
        offsets
    }

    /// `(weights, biases)` of layer `l`.
    pub fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        let offsets = Self::layer_offsets(&self.arch);
        let (fan_in, fan_out) = self.arch.layer_shapes().nth(l).expect("layer index");
        let block = &self.values[offsets[l]..offsets[l + 1]];
        block.split_at(fan_in * fan_out)
    }

    pub fn layer_mut(&mut self, l: usize) -> (&mut [f64], &mut [f64]) {
        let offsets = Self::layer_offsets(&self.arch);
        let (fan_in, fan_out) = self.arch.layer_shapes().nth(l).expect("layer index");
        let block = &mut self.values[offsets[l]..offsets[l + 1]];
        block.split_at_mut(fan_in * fan_out)
    }
}

/// Fan-in scaled uniform init: weights in `±1/sqrt(fan_in)`, zero biases.
pub fn init_params(arch: &Architecture, seed: u64) -> Result<ModelParams> {
    arch.validate()?;
    let mut rng = stream_rng(seed, Stream::Init);
    let mut values = Vec::with_capacity(arch.n_params());
    for (fan_in, fan_out) in arch.layer_shapes() {
        let bound = 1.0 / (fan_in as f64).sqrt();
        values.extend((0..fan_in * fan_out).map(|_| rng.random_range(-bound..bound)));
        values.extend(std::iter::repeat_n(0.0, fan_out));
    }
    ModelParams::from_values(arch.clone(), seed, values)
}
