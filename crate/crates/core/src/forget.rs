//! Forget-set construction: uniform random subsets and extremes along the
//! first principal component.

use std::fmt;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

const POWER_TOLERANCE: f64 = 1e-8;
const POWER_MAX_ITERS: usize = 1000;
const TIE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionStrategy {
    Random,
    Pca,
}

impl fmt::Display for SelectionStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SelectionStrategy::Random => "random",
            SelectionStrategy::Pca => "pca",
        })
    }
}

/// A named set of training indices to unlearn. The retain set is its
/// complement.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ForgetSpec {
    pub name: String,
    pub strategy: SelectionStrategy,
    pub size: usize,
    pub indices: Vec<usize>,
}

impl ForgetSpec {
    pub fn new(
        name: impl Into<String>,
        strategy: SelectionStrategy,
        mut indices: Vec<usize>,
    ) -> Self {
        indices.sort_unstable();
        indices.dedup();
        Self {
            name: name.into(),
            strategy,
            size: indices.len(),
            indices,
        }
    }

    /// A spec that removes nothing. Only useful as a control: retraining on
    /// its retain set reproduces the full-data model.
    pub fn empty(name: impl Into<String>) -> Self {
        Self::new(name, SelectionStrategy::Random, Vec::new())
    }

    pub fn with_name(self, name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            ..self
        }
    }

    /// Checks the spec against a training set of `n` examples.
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.size != self.indices.len() {
            return Err(Error::invalid(format!(
                "forget spec `{}` declares size {} but lists {} indices",
                self.name,
                self.size,
                self.indices.len()
            )));
        }
        if self.indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid(format!(
                "forget spec `{}` indices are not sorted and unique",
                self.name
            )));
        }
        if let Some(&last) = self.indices.last() {
            if last >= n {
                return Err(Error::invalid(format!(
                    "forget spec `{}` index {last} outside training set of {n}",
                    self.name
                )));
            }
        }
        if self.size >= n {
            return Err(Error::invalid(format!(
                "forget spec `{}` leaves an empty retain set",
                self.name
            )));
        }
        Ok(())
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    pub fn retain_indices(&self, n: usize) -> Vec<usize> {
        let mut forget = self.indices.iter().peekable();
        (0..n)
            .filter(|i| {
                if forget.peek() == Some(&i) {
                    forget.next();
                    false
                } else {
                    true
                }
            })
            .collect()
    }
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k == 0 || k >= n {
        return Err(Error::invalid(format!(
            "forget-set size {k} must lie in 1..{n}"
        )));
    }
    Ok(())
}

/// `k` indices drawn uniformly without replacement.
pub fn random_forget(dataset: &LabeledDataset, k: usize, seed: u64) -> Result<ForgetSpec> {
    let n = dataset.len();
    check_k(k, n)?;
    let mut rng = stream_rng(seed, Stream::Selection);
    let indices = index::sample(&mut rng, n, k).into_vec();
    Ok(ForgetSpec::new(
        format!("random-{k}-seed{seed}"),
        SelectionStrategy::Random,
        indices,
    ))
}

fn centered(features: &[f64], dim: usize) -> (Vec<f64>, Vec<f64>) {
    let n = features.len() / dim;
    let mut mean = vec![0.0; dim];
    for row in features.chunks_exact(dim) {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let centered = features
        .chunks_exact(dim)
        .flat_map(|row| row.iter().zip(&mean).map(|(v, m)| v - m))
        .collect();
    (centered, mean)
}

fn covariance(centered: &[f64], dim: usize) -> Vec<f64> {
    let n = centered.len() / dim;
    let mut cov = vec![0.0; dim * dim];
    for row in centered.chunks_exact(dim) {
        for a in 0..dim {
            for b in a..dim {
                cov[a * dim + b] += row[a] * row[b];
            }
        }
    }
    for a in 0..dim {
        for b in a..dim {
            let v = cov[a * dim + b] / (n - 1) as f64;
            cov[a * dim + b] = v;
            cov[b * dim + a] = v;
        }
    }
    cov
}

fn mat_vec(m: &[f64], v: &[f64]) -> Vec<f64> {
    m.chunks_exact(v.len())
        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Dominant eigenpair of a symmetric PSD matrix by power iteration.
/// Returns `(0, start)` when the matrix annihilates the start vector.
fn power_iteration(m: &[f64], start: Vec<f64>) -> (f64, Vec<f64>) {
    let s = norm(&start);
    if s == 0.0 {
        return (0.0, start);
    }
    let mut v: Vec<f64> = start.into_iter().map(|x| x / s).collect();
    let mut lambda = 0.0;
    for _ in 0..POWER_MAX_ITERS {
        let w = mat_vec(m, &v);
        let len = norm(&w);
        if len == 0.0 {
            return (0.0, v);
        }
        let next: Vec<f64> = w.into_iter().map(|x| x / len).collect();
        let change = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        v = next;
        lambda = len;
        if change < POWER_TOLERANCE {
            break;
        }
    }
    (lambda, v)
}

/// The centered row of largest norm; it has a nonzero projection on the
/// dominant direction of the rows' span.
fn largest_row(rows: &[f64], dim: usize) -> Vec<f64> {
    rows.chunks_exact(dim)
        .max_by(|a, b| norm(a).total_cmp(&norm(b)))
        .map(<[f64]>::to_vec)
        .unwrap_or_else(|| vec![0.0; dim])
}

/// Unit-norm leading eigenvector of the sample covariance, sign-normalized
/// so its largest-magnitude entry is positive.
pub fn first_principal_component(features: &[f64], dim: usize) -> Result<Vec<f64>> {
    if dim == 0 || !features.len().is_multiple_of(dim) {
        return Err(Error::invalid(
            "feature matrix does not match its dimension",
        ));
    }
    if features.len() / dim < 2 {
        return Err(Error::invalid(
            "principal component needs at least 2 examples",
        ));
    }
    let (rows, _) = centered(features, dim);
    let cov = covariance(&rows, dim);
    let (lambda1, mut u) = power_iteration(&cov, largest_row(&rows, dim));

    // Second eigenvalue from the deflated matrix, seeded by the residual rows.
    let deflated: Vec<f64> = (0..dim * dim)
        .map(|ab| cov[ab] - lambda1 * u[ab / dim] * u[ab % dim])
        .collect();
    let residual: Vec<f64> = rows
        .chunks_exact(dim)
        .flat_map(|row| {
            let p: f64 = row.iter().zip(&u).map(|(a, b)| a * b).sum();
            row.iter()
                .zip(&u)
                .map(move |(x, ui)| x - p * ui)
                .collect::<Vec<_>>()
        })
        .collect();
    let (lambda2, _) = power_iteration(&deflated, largest_row(&residual, dim));
    if lambda1 <= 0.0 || (lambda1 - lambda2).abs() <= TIE_TOLERANCE * lambda1 {
        return Err(Error::DegenerateSpectrum {
            first: lambda1,
            second: lambda2,
        });
    }

    let n = norm(&u);
    u.iter_mut().for_each(|x| *x /= n);
    let pivot = u
        .iter()
        .copied()
        .max_by(|a, b| a.abs().total_cmp(&b.abs()))
        .unwrap_or(1.0);
    if pivot < 0.0 {
        u.iter_mut().for_each(|x| *x = -*x);
    }
    Ok(u)
}

/// The `k` examples with the largest absolute projection on the first
/// principal component; ties go to the lower index.
pub fn pca_forget(dataset: &LabeledDataset, k: usize) -> Result<ForgetSpec> {
    check_k(k, dataset.len())?;
    let dim = dataset.dim();
    let component = first_principal_component(dataset.features(), dim)?;
    let (rows, _) = centered(dataset.features(), dim);
    let mut scored: Vec<(f64, usize)> = rows
        .chunks_exact(dim)
        .map(|row| {
            row.iter()
                .zip(&component)
                .map(|(a, b)| a * b)
                .sum::<f64>()
                .abs()
        })
        .zip(0..)
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let indices = scored.into_iter().take(k).map(|(_, i)| i).collect();
    Ok(ForgetSpec::new(
        format!("pca-{k}"),
        SelectionStrategy::Pca,
        indices,
    ))
}
