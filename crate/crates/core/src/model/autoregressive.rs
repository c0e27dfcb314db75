use super::arch::{Architecture, ModelKind};
use super::network::forward_logits;
use super::params::ModelParams;
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::metrics::compute_margin;

fn vocab_and_context(arch: &Architecture) -> Result<(usize, usize)> {
    match arch.kind() {
        ModelKind::Autoregressive { vocab, context } => Ok((vocab, context)),
        ModelKind::Classifier => Err(Error::invalid("model is not autoregressive")),
    }
}

fn check_tokens(tokens: &[usize], vocab: usize) -> Result<()> {
    match tokens.iter().find(|&&t| t >= vocab) {
        Some(bad) => Err(Error::invalid(format!(
            "token {bad} outside vocabulary of {vocab}"
        ))),
        None => Ok(()),
    }
}

/// One-hot encoding of the last `context` tokens of `prefix`, left-padded
/// with the reserved pad id `vocab`.
pub fn context_features(arch: &Architecture, prefix: &[usize]) -> Result<Vec<f64>> {
    let (vocab, context) = vocab_and_context(arch)?;
    check_tokens(prefix, vocab)?;
    let slot = vocab + 1;
    let mut features = vec![0.0; context * slot];
    let start = prefix.len().saturating_sub(context);
    let pad = context - (prefix.len() - start);
    for s in 0..pad {
        features[s * slot + vocab] = 1.0;
    }
    for (k, &tok) in prefix[start..].iter().enumerate() {
        features[(pad + k) * slot + tok] = 1.0;
    }
    Ok(features)
}

/// Teacher-forced margins: entry `t` is the margin of `sequence[t + 1]` given
/// `sequence[..=t]`.
pub fn next_token_margins(params: &ModelParams, sequence: &[usize]) -> Result<Vec<f64>> {
    let (vocab, _) = vocab_and_context(params.arch())?;
    if sequence.len() < 2 {
        return Err(Error::invalid("sequence needs at least 2 tokens"));
    }
    check_tokens(sequence, vocab)?;
    (0..sequence.len() - 1)
        .map(|t| {
            let x = context_features(params.arch(), &sequence[..=t])?;
            compute_margin(&forward_logits(params, &x)?, sequence[t + 1])
        })
        .collect()
}

/// Every (prefix, next token) pair of `sequences` as a classification dataset.
pub fn sequences_to_dataset(
    arch: &Architecture,
    sequences: &[Vec<usize>],
) -> Result<LabeledDataset> {
    let (vocab, _) = vocab_and_context(arch)?;
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for seq in sequences {
        check_tokens(seq, vocab)?;
        for t in 1..seq.len() {
            features.extend(context_features(arch, &seq[..t])?);
            labels.push(seq[t]);
        }
    }
    LabeledDataset::new(features, labels, arch.input_dim(), vocab)
}
