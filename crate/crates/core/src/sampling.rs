//! Residual-norm importance sampling of training samples.
//!
//! Samples are drawn with probability proportional to the Euclidean norm of
//! their boosting weights, with replacement, and the least-squares loss of
//! each draw is scaled by `1 / (|D| P_i)` so the sampled loss (and its
//! gradient) is an unbiased estimate of the full-data one.

use rand::Rng;

use crate::error::{domain, Result};
use crate::importance::keep_budget;

/// Probability vector over dataset indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingDistribution {
    probabilities: Vec<f64>,
    cumulative: Vec<f64>,
    degenerate: bool,
}

impl SamplingDistribution {
    pub fn uniform(n: usize) -> Result<Self> {
        Self::from_weights(&vec![1.0; n])
    }

    /// Normalizes non-negative `weights`; all-zero weights fall back to the
    /// uniform distribution and set the degeneracy flag.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        if weights.is_empty() {
            return Err(domain("sampling distribution over an empty dataset"));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(domain("sampling weights must be finite and non-negative"));
        }
        let total: f64 = weights.iter().sum();
        let (probabilities, degenerate) = if total > 0.0 {
            (weights.iter().map(|w| w / total).collect::<Vec<_>>(), false)
        } else {
            log::warn!("all sampling weights are zero; falling back to uniform");
            (vec![1.0 / weights.len() as f64; weights.len()], true)
        };
        let mut cumulative = Vec::with_capacity(probabilities.len());
        let mut acc = 0.0;
        for p in &probabilities {
            acc += p;
            cumulative.push(acc);
        }
        // Pin the tail so inverse-CDF lookups never run off the end.
        let last_positive = probabilities.iter().rposition(|&p| p > 0.0).unwrap_or(0);
        for c in &mut cumulative[last_positive..] {
            *c = 1.0;
        }
        Ok(Self {
            probabilities,
            cumulative,
            degenerate,
        })
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn probability(&self, i: usize) -> f64 {
        self.probabilities[i]
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    /// Inverse-CDF draw of one index.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        self.cumulative.partition_point(|&c| c <= u)
    }
}

/// `P(I = i) ∝ ‖w_i‖`.
pub fn build_distribution(weights: &[Vec<f64>]) -> Result<SamplingDistribution> {
    let norms: Vec<f64> = weights
        .iter()
        .map(|w| w.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    SamplingDistribution::from_weights(&norms)
}

/// Indices drawn independently with replacement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampledSubset {
    pub indices: Vec<usize>,
}

/// `⌈σ · dataset_size⌉` i.i.d. draws from `dist`.
pub fn draw_subset<R: Rng>(
    dist: &SamplingDistribution,
    fraction: f64,
    dataset_size: usize,
    rng: &mut R,
) -> Result<SampledSubset> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(domain(format!("sample fraction {fraction} outside (0, 1]")));
    }
    if dataset_size == 0 || dataset_size != dist.len() {
        return Err(domain("dataset size must match the distribution"));
    }
    let count = keep_budget(dataset_size, fraction);
    Ok(SampledSubset {
        indices: (0..count).map(|_| dist.sample(rng)).collect(),
    })
}

/// Loss scale `1 / (|D| P_i)` for each drawn index.
pub fn importance_scales(
    dist: &SamplingDistribution,
    dataset_size: usize,
    subset: &SampledSubset,
) -> Result<Vec<f64>> {
    subset
        .indices
        .iter()
        .map(|&i| {
            let p = *dist
                .probabilities
                .get(i)
                .ok_or_else(|| domain(format!("index {i} outside the distribution")))?;
            if p > 0.0 {
                Ok(1.0 / (dataset_size as f64 * p))
            } else {
                Err(domain(format!("sample {i} was drawn with zero probability")))
            }
        })
        .collect()
}

/// `Σ_{i ∈ I} (1 / (|D| P_i)) ‖g_i − w_i‖²`, counting repeated draws.
pub fn weighted_loss(
    predictions: &[Vec<f64>],
    targets: &[Vec<f64>],
    dist: &SamplingDistribution,
    dataset_size: usize,
    subset: &SampledSubset,
) -> Result<f64> {
    if predictions.len() != targets.len() {
        return Err(domain("predictions and targets differ in length"));
    }
    let scales = importance_scales(dist, dataset_size, subset)?;
    let mut total = 0.0;
    for (&i, c) in subset.indices.iter().zip(scales) {
        let (g, w) = predictions
            .get(i)
            .zip(targets.get(i))
            .ok_or_else(|| domain(format!("index {i} outside the dataset")))?;
        total += c * g.iter().zip(w).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    }
    Ok(total)
}
