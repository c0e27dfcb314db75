use serde::{Deserialize, Serialize};

/// Percentile with linear interpolation between order statistics
/// (`q` in `[0, 100]`). Returns NaN for an empty slice.
pub fn percentile(values: &[f64], q: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    percentile_sorted(&sorted, q)
}

fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let rank = (q.clamp(0.0, 100.0) / 100.0) * (n - 1) as f64;
            let lo = rank.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            let frac = rank - lo as f64;
            sorted[lo] + (sorted[hi] - sorted[lo]) * frac
        }
    }
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Box-plot summary of a set of per-point scores. Whiskers extend to the
/// most extreme values within 1.5 IQR of the quartiles, never inside the box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistributionSummary {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub mean: f64,
    pub p95: f64,
}

impl DistributionSummary {
    pub fn from_values(values: &[f64]) -> Self {
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let q1 = percentile_sorted(&sorted, 25.0);
        let q3 = percentile_sorted(&sorted, 75.0);
        let iqr = q3 - q1;
        let (lo_fence, hi_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
        let whisker_low = sorted
            .iter()
            .copied()
            .find(|&v| v >= lo_fence)
            .map_or(f64::NAN, |v| v.min(q1));
        let whisker_high = sorted
            .iter()
            .rev()
            .copied()
            .find(|&v| v <= hi_fence)
            .map_or(f64::NAN, |v| v.max(q3));
        Self {
            min: sorted.first().copied().unwrap_or(f64::NAN),
            q1,
            median: percentile_sorted(&sorted, 50.0),
            q3,
            max: sorted.last().copied().unwrap_or(f64::NAN),
            whisker_low,
            whisker_high,
            mean: mean(&sorted),
            p95: percentile_sorted(&sorted, 95.0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_interpolates() {
        let v = [4.0, 1.0, 3.0, 2.0, 5.0];
        assert_eq!(percentile(&v, 0.0), 1.0);
        assert_eq!(percentile(&v, 50.0), 3.0);
        assert_eq!(percentile(&v, 100.0), 5.0);
        // rank 0.95*4 = 3.8 -> 4 + 0.8*(5-4)
        assert!((percentile(&v, 95.0) - 4.8).abs() < 1e-12);
        assert!((percentile(&[0.0, 10.0], 25.0) - 2.5).abs() < 1e-12);
        assert!(percentile(&[], 50.0).is_nan());
    }

    #[test]
    fn summary_whiskers_exclude_outliers() {
        let mut v: Vec<f64> = (1..=20).map(f64::from).collect();
        v.push(1000.0);
        let s = DistributionSummary::from_values(&v);
        assert_eq!(s.max, 1000.0);
        assert_eq!(s.whisker_high, 20.0);
        assert_eq!(s.whisker_low, 1.0);
        assert_eq!(s.median, 11.0);
    }
}
