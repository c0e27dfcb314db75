use crate::error::{Error, Result};

/// Logit-gap margin of the true class:
/// `z[label] - log(sum_{k != label} exp(z[k]))`.
///
/// The log-sum-exp over the competing classes is evaluated relative to their
/// maximum, so the result is finite for any finite logits.
pub fn compute_margin(logits: &[f64], label: usize) -> Result<f64> {
    if logits.len() < 2 {
        return Err(Error::invalid(format!(
            "margin needs at least 2 classes, got {}",
            logits.len()
        )));
    }
    if label >= logits.len() {
        return Err(Error::invalid(format!(
            "label {label} out of range for {} classes",
            logits.len()
        )));
    }
    if let Some(bad) = logits.iter().find(|z| !z.is_finite()) {
        return Err(Error::invalid(format!("non-finite logit {bad}")));
    }

    let (argmax, max) = logits.iter().enumerate().filter(|&(k, _)| k != label).fold(
        (usize::MAX, f64::NEG_INFINITY),
        |acc, (k, &z)| {
            if z > acc.1 {
                (k, z)
            } else {
                acc
            }
        },
    );
    // The argmax term contributes exp(0) = 1; accumulate the rest and use ln_1p.
    let rest: f64 = logits
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != label && k != argmax)
        .map(|(_, &z)| (z - max).exp())
        .sum();
    Ok(logits[label] - max - rest.ln_1p())
}
