use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_VOCAB: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelKind {
    Classifier,
    /// Next-token model over a fixed window of `context` one-hot tokens.
    /// Token id `vocab` is reserved for left padding.
    Autoregressive {
        vocab: usize,
        context: usize,
    },
}

/// Dense layer widths from input to output, plus how inputs are formed.
///
/// Hidden layers use `tanh`; the output layer is linear.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Architecture {
    widths: Vec<usize>,
    kind: ModelKind,
}

impl Architecture {
    /// `widths = [input, hidden.., classes]`.
    pub fn classifier(widths: Vec<usize>) -> Result<Self> {
        let arch = Self {
            widths,
            kind: ModelKind::Classifier,
        };
        arch.validate()?;
        Ok(arch)
    }

    pub fn autoregressive(vocab: usize, context: usize, hidden: &[usize]) -> Result<Self> {
        let mut widths = vec![context * (vocab + 1)];
        widths.extend_from_slice(hidden);
        widths.push(vocab);
        let arch = Self {
            widths,
            kind: ModelKind::Autoregressive { vocab, context },
        };
        arch.validate()?;
        Ok(arch)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.widths.len() < 2 {
            return Err(Error::invalid(
                "architecture needs an input and an output width",
            ));
        }
        if let Some(pos) = self.widths.iter().position(|&w| w == 0) {
            return Err(Error::invalid(format!("layer {pos} has zero width")));
        }
        if self.n_outputs() < 2 {
            return Err(Error::invalid("model needs at least 2 outputs"));
        }
        if let ModelKind::Autoregressive { vocab, context } = self.kind {
            if !(2..=MAX_VOCAB).contains(&vocab) {
                return Err(Error::invalid(format!(
                    "vocabulary size {vocab} outside 2..={MAX_VOCAB}"
                )));
            }
            if context == 0 || self.widths[0] != context * (vocab + 1) || self.n_outputs() != vocab
            {
                return Err(Error::invalid(
                    "autoregressive widths do not match vocab/context",
                ));
            }
        }
        Ok(())
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn n_outputs(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn n_layers(&self) -> usize {
        self.widths.len() - 1
    }

    /// `(fan_in, fan_out)` of each dense layer.
    pub fn layer_shapes(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.widths.windows(2).map(|w| (w[0], w[1]))
    }

    pub fn n_params(&self) -> usize {
        self.layer_shapes().map(|(i, o)| i * o + o).sum()
    }
}
