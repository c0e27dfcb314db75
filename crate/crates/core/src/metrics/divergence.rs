use crate::error::{Error, Result};

const SUM_TOLERANCE: f64 = 1e-9;

/// `D_KL(p || q) = sum_i p_i ln(p_i / q_i)` in nats.
///
/// Both vectors must be strictly positive probability vectors of the same
/// length. The argument order is significant; nothing is symmetrized.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::invalid(format!(
            "probability vectors differ in length ({} vs {})",
            p.len(),
            q.len()
        )));
    }
    if p.is_empty() {
        return Err(Error::invalid("empty probability vectors"));
    }
    for (name, v) in [("p", p), ("q", q)] {
        if let Some(bad) = v.iter().find(|&&x| !(x > 0.0 && x.is_finite())) {
            return Err(Error::invalid(format!(
                "{name} has non-positive or non-finite entry {bad}"
            )));
        }
        let total: f64 = v.iter().sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::invalid(format!("{name} sums to {total}, not 1")));
        }
    }
    let kl: f64 = p.iter().zip(q).map(|(&pi, &qi)| pi * (pi / qi).ln()).sum();
    Ok(kl.max(0.0))
}
