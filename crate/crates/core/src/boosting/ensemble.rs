//! The additive ensemble `f(x) = g₀(x) + Σ_t ν α_t g_t(x^t)`.

use serde::{Deserialize, Serialize};

use super::line_search::LineSearch;
use crate::attention::AttentionRecord;
use crate::error::{config, domain, Result};
use crate::importance::{filter_sample, VocabSubset};
use crate::scalar::Scalar;
use crate::transformer::Transformer;

/// A model that maps a token sequence to `M` scores.
pub trait WeakLearner: Clone {
    fn num_outputs(&self) -> usize;

    fn predict(&self, tokens: &[u32]) -> Result<Vec<f64>>;

    /// Scores together with the head-averaged attention record, when the
    /// learner exposes one.
    fn predict_with_attention(&self, tokens: &[u32]) -> Result<(Vec<f64>, Option<AttentionRecord>)> {
        Ok((self.predict(tokens)?, None))
    }
}

impl<T: Scalar> WeakLearner for Transformer<T> {
    fn num_outputs(&self) -> usize {
        self.config().num_classes
    }

    fn predict(&self, tokens: &[u32]) -> Result<Vec<f64>> {
        Transformer::predict(self, tokens)
    }

    fn predict_with_attention(&self, tokens: &[u32]) -> Result<(Vec<f64>, Option<AttentionRecord>)> {
        let (logits, attention) = self.forward(tokens)?;
        Ok((logits, Some(attention)))
    }
}

/// Boosting hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnsembleConfig {
    pub num_classes: usize,
    /// Boosting rounds `N_b`.
    pub rounds: usize,
    /// Shrinkage `ν`.
    pub shrinkage: f64,
    /// Fraction `σ` of vocabulary ids or samples kept per round.
    pub keep_fraction: f64,
    pub alpha_max: f64,
    pub tolerance: f64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            num_classes: 2,
            rounds: 6,
            shrinkage: 0.5,
            keep_fraction: 0.8,
            alpha_max: 10.0,
            tolerance: 1e-6,
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(config("boosting needs at least 2 classes"));
        }
        if self.rounds == 0 {
            return Err(config("boosting needs at least one round"));
        }
        if !(self.shrinkage > 0.0 && self.shrinkage <= 1.0) {
            return Err(config(format!("shrinkage {} outside (0, 1]", self.shrinkage)));
        }
        if !(self.keep_fraction > 0.0 && self.keep_fraction < 1.0) {
            return Err(config(format!("keep fraction {} outside (0, 1)", self.keep_fraction)));
        }
        if !(self.alpha_max > 0.0 && self.alpha_max.is_finite()) {
            return Err(config(format!("alpha_max {} must be positive", self.alpha_max)));
        }
        if !(self.tolerance > 0.0) {
            return Err(config("line-search tolerance must be positive"));
        }
        Ok(())
    }

    pub fn line_search(&self) -> LineSearch {
        LineSearch {
            upper: self.alpha_max,
            tolerance: self.tolerance,
            ..LineSearch::default()
        }
    }
}

/// One boosting stage. `coefficient = ν · alpha` is what the ensemble uses.
#[derive(Debug, Clone, PartialEq)]
pub struct Stage<L> {
    pub alpha: f64,
    pub coefficient: f64,
    pub learner: L,
    /// Vocabulary the stage's inputs are filtered by; `None` means unfiltered.
    pub vocab: Option<VocabSubset>,
}

impl<L: WeakLearner> Stage<L> {
    pub fn predict(&self, tokens: &[u32]) -> Result<Vec<f64>> {
        match &self.vocab {
            Some(v) => self.learner.predict(&filter_sample(tokens, v)),
            None => self.learner.predict(tokens),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble<L> {
    pub num_classes: usize,
    pub shrinkage: f64,
    /// Full-data learner added with coefficient 1.
    pub base: Option<L>,
    pub stages: Vec<Stage<L>>,
}

impl<L: WeakLearner> Ensemble<L> {
    pub fn new(num_classes: usize, shrinkage: f64) -> Self {
        Self {
            num_classes,
            shrinkage,
            base: None,
            stages: Vec::new(),
        }
    }

    /// Number of learners, base included.
    pub fn len(&self) -> usize {
        self.stages.len() + usize::from(self.base.is_some())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The most recently added learner.
    pub fn last_learner(&self) -> Option<&L> {
        self.stages.last().map(|s| &s.learner).or(self.base.as_ref())
    }

    pub fn predict(&self, tokens: &[u32]) -> Result<Vec<f64>> {
        let mut f = vec![0.0; self.num_classes];
        if let Some(base) = &self.base {
            add_scaled(&mut f, &base.predict(tokens)?, 1.0)?;
        }
        for stage in &self.stages {
            add_scaled(&mut f, &stage.predict(tokens)?, stage.coefficient)?;
        }
        Ok(f)
    }

    /// Predicted 0-based class.
    pub fn classify(&self, tokens: &[u32]) -> Result<usize> {
        Ok(argmax(&self.predict(tokens)?))
    }
}

pub(crate) fn add_scaled(acc: &mut [f64], g: &[f64], scale: f64) -> Result<()> {
    if acc.len() != g.len() {
        return Err(domain(format!(
            "learner produced {} scores for a {}-class ensemble",
            g.len(),
            acc.len()
        )));
    }
    for (a, v) in acc.iter_mut().zip(g) {
        *a += scale * v;
    }
    Ok(())
}

/// Index of the largest score; ties go to the lowest index.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in scores.iter().enumerate().skip(1) {
        if v > scores[best] {
            best = i;
        }
    }
    best
}

/// Fraction of rows whose argmax equals the 0-based label.
pub fn accuracy(scores: &[Vec<f64>], labels: &[usize]) -> f64 {
    if scores.is_empty() {
        return 0.0;
    }
    let hits = scores
        .iter()
        .zip(labels)
        .filter(|(f, &z)| argmax(f) == z)
        .count();
    hits as f64 / scores.len() as f64
}
