//! The boosting loop and its three refinements: vocabulary-pruned
//! subsequences, residual-norm importance sampling, and both combined.

use std::marker::PhantomData;

use serde::{Deserialize, Serialize};

use super::ensemble::{accuracy, add_scaled, Ensemble, EnsembleConfig, Stage, WeakLearner};
use super::line_search::golden_section;
use super::loss::{compute_weights, per_sample_loss};
use crate::clock::Stopwatch;
use crate::data::{Sample, CLS_ID, PAD_ID, UNK_ID};
use crate::error::{config, domain, Result};
use crate::importance::{filter_sample, position_importance, prune_vocab, ImportanceTable, VocabSubset};
use crate::rng::{derive_seed, stream_rng};
use crate::sampling::{build_distribution, draw_subset};
use crate::scalar::Scalar;
use crate::transformer::{train_least_squares, LossVariant, OptimizerConfig, Transformer, TransformerConfig};

/// Which boosting algorithm to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoostVariant {
    #[serde(rename = "boost")]
    Plain,
    #[serde(rename = "subseq-boost")]
    Subsequence,
    #[serde(rename = "is-boost")]
    ImportanceSampling,
    #[serde(rename = "subseq-is-boost")]
    SubsequenceImportanceSampling,
}

impl BoostVariant {
    pub const ALL: [BoostVariant; 4] = [
        BoostVariant::Plain,
        BoostVariant::Subsequence,
        BoostVariant::ImportanceSampling,
        BoostVariant::SubsequenceImportanceSampling,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BoostVariant::Plain => "boost",
            BoostVariant::Subsequence => "subseq-boost",
            BoostVariant::ImportanceSampling => "is-boost",
            BoostVariant::SubsequenceImportanceSampling => "subseq-is-boost",
        }
    }

    pub fn uses_subsequences(self) -> bool {
        matches!(
            self,
            BoostVariant::Subsequence | BoostVariant::SubsequenceImportanceSampling
        )
    }

    pub fn uses_sampling(self) -> bool {
        matches!(
            self,
            BoostVariant::ImportanceSampling | BoostVariant::SubsequenceImportanceSampling
        )
    }

    /// Whether a full-data base learner precedes the boosting rounds.
    pub fn has_base(self) -> bool {
        self != BoostVariant::Plain
    }
}

/// One weak-learner fit.
pub struct FitJob<'a, L> {
    pub inputs: &'a [Vec<u32>],
    pub targets: &'a [Vec<f64>],
    pub variant: LossVariant<'a>,
    /// Learner whose parameters initialize the new one.
    pub warm_start: Option<&'a L>,
    pub seed: u64,
}

pub struct Fitted<L> {
    pub learner: L,
    /// Training epochs consumed by the fit.
    pub epochs: usize,
}

/// Produces weak learners fitted to boosting targets.
pub trait Trainer {
    type Learner: WeakLearner;

    /// Whether fitted learners return attention records.
    fn records_attention(&self) -> bool;

    fn fit(&mut self, job: FitJob<'_, Self::Learner>) -> Result<Fitted<Self::Learner>>;
}

/// Fits transformers by least squares.
#[derive(Debug, Clone)]
pub struct TransformerTrainer<T> {
    pub model: TransformerConfig,
    pub optimizer: OptimizerConfig,
    _scalar: PhantomData<T>,
}

impl<T: Scalar> TransformerTrainer<T> {
    pub fn new(model: TransformerConfig, optimizer: OptimizerConfig) -> Result<Self> {
        model.validate()?;
        optimizer.validate()?;
        if model.precision != T::DTYPE {
            return Err(config(format!(
                "config asks for {:?} but the trainer computes in {:?}",
                model.precision,
                T::DTYPE
            )));
        }
        Ok(Self {
            model,
            optimizer,
            _scalar: PhantomData,
        })
    }
}

impl<T: Scalar> Trainer for TransformerTrainer<T> {
    type Learner = Transformer<T>;

    fn records_attention(&self) -> bool {
        true
    }

    fn fit(&mut self, job: FitJob<'_, Transformer<T>>) -> Result<Fitted<Transformer<T>>> {
        let mut learner = match job.warm_start {
            Some(prev) => Transformer::init_from(prev, &self.model)?,
            None => Transformer::new(self.model.clone(), job.seed)?,
        };
        let report = train_least_squares(
            &mut learner,
            job.inputs,
            job.targets,
            job.variant,
            &self.optimizer,
            job.seed,
        )?;
        log::debug!(
            "weak learner fitted: loss {:?} -> {} (best epoch {})",
            report.initial_loss,
            report.final_loss,
            report.best_epoch
        );
        Ok(Fitted {
            learner,
            epochs: self.optimizer.epochs,
        })
    }
}

/// Metrics after the base learner (step 0) or a boosting round (step ≥ 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundMetrics {
    pub step: usize,
    /// Weak-learner epochs consumed so far.
    pub epochs: usize,
    pub train_acc: f64,
    pub test_acc: f64,
    /// Training risk of the ensemble.
    pub risk: f64,
    pub elapsed_s: f64,
    /// Line-search step (1 for the base learner).
    pub alpha: f64,
    /// `|V_t|` for subsequence variants.
    pub vocab_size: Option<usize>,
    /// Number of (possibly repeated) samples the learner was fitted on.
    pub fit_size: usize,
}

pub struct BoostRun<L> {
    pub ensemble: Ensemble<L>,
    pub metrics: Vec<RoundMetrics>,
}

/// Mutable state of a boosting run. Ensemble scores on the train and test
/// sets are cached so that each round only evaluates the newest learner.
pub struct Booster<'a, Tr: Trainer> {
    config: EnsembleConfig,
    variant: BoostVariant,
    train: &'a [Sample],
    test: &'a [Sample],
    trainer: &'a mut Tr,
    seed: u64,
    clock: Stopwatch,
    ensemble: Ensemble<Tr::Learner>,
    train_scores: Vec<Vec<f64>>,
    test_scores: Vec<Vec<f64>>,
    vocab: VocabSubset,
    /// Per-position importance of each training sample, filtered by `vocab`,
    /// under the latest learner.
    position_scores: Option<Vec<Vec<f64>>>,
    epochs: usize,
    metrics: Vec<RoundMetrics>,
}

impl<'a, Tr: Trainer> Booster<'a, Tr> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        config: &EnsembleConfig,
        variant: BoostVariant,
        train: &'a [Sample],
        test: &'a [Sample],
        vocab_size: usize,
        trainer: &'a mut Tr,
        seed: u64,
        clock: Stopwatch,
    ) -> Result<Self> {
        config.validate()?;
        if variant.uses_subsequences() && !trainer.records_attention() {
            return Err(config_error(variant));
        }
        if train.is_empty() || test.is_empty() {
            return Err(domain("boosting needs non-empty train and test sets"));
        }
        let m = config.num_classes;
        if let Some(s) = train.iter().chain(test).find(|s| s.label >= m) {
            return Err(domain(format!("label {} outside {m} classes", s.label + 1)));
        }
        Ok(Self {
            config: config.clone(),
            variant,
            train,
            test,
            trainer,
            seed,
            clock,
            ensemble: Ensemble::new(m, config.shrinkage),
            train_scores: vec![vec![0.0; m]; train.len()],
            test_scores: vec![vec![0.0; m]; test.len()],
            vocab: VocabSubset::full(vocab_size),
            position_scores: None,
            epochs: 0,
            metrics: Vec::new(),
        })
    }

    pub fn ensemble(&self) -> &Ensemble<Tr::Learner> {
        &self.ensemble
    }

    pub fn train_scores(&self) -> &[Vec<f64>] {
        &self.train_scores
    }

    pub fn metrics(&self) -> &[RoundMetrics] {
        &self.metrics
    }

    pub fn risk(&self) -> Result<f64> {
        risk_along(&self.train_scores, None, self.train, 0.0)
    }

    fn weights(&self) -> Result<Vec<Vec<f64>>> {
        self.train_scores
            .iter()
            .zip(self.train)
            .map(|(f, s)| compute_weights(f, s.label).map(|w| w.values))
            .collect()
    }

    fn inputs_for(&self, sample: &Sample, filtered: bool) -> Vec<u32> {
        if filtered {
            filter_sample(&sample.tokens, &self.vocab)
        } else {
            sample.tokens.clone()
        }
    }

    /// Scores of `learner` on the training set and, for subsequence variants,
    /// per-position importance.
    fn evaluate_train(
        &self,
        learner: &Tr::Learner,
        filtered: bool,
    ) -> Result<(Vec<Vec<f64>>, Option<Vec<Vec<f64>>>)> {
        let mut scores = Vec::with_capacity(self.train.len());
        let mut positions = filtered.then(|| Vec::with_capacity(self.train.len()));
        for s in self.train {
            let x = self.inputs_for(s, filtered);
            if let Some(pos) = positions.as_mut() {
                let (g, att) = learner.predict_with_attention(&x)?;
                let att = att.ok_or_else(|| config_error(self.variant))?;
                pos.push(position_importance(&att)?);
                scores.push(g);
            } else {
                scores.push(learner.predict(&x)?);
            }
        }
        Ok((scores, positions))
    }

    fn add_to_test(&mut self, learner: &Tr::Learner, filtered: bool, coefficient: f64) -> Result<()> {
        for (f, s) in self.test_scores.iter_mut().zip(self.test) {
            let x = if filtered {
                filter_sample(&s.tokens, &self.vocab)
            } else {
                s.tokens.clone()
            };
            add_scaled(f, &learner.predict(&x)?, coefficient)?;
        }
        Ok(())
    }

    fn record(&mut self, step: usize, alpha: f64, fit_size: usize) -> Result<&RoundMetrics> {
        let train_labels: Vec<usize> = self.train.iter().map(|s| s.label).collect();
        let test_labels: Vec<usize> = self.test.iter().map(|s| s.label).collect();
        let row = RoundMetrics {
            step,
            epochs: self.epochs,
            train_acc: accuracy(&self.train_scores, &train_labels),
            test_acc: accuracy(&self.test_scores, &test_labels),
            risk: self.risk()?,
            elapsed_s: self.clock.elapsed_s(),
            alpha,
            vocab_size: self.variant.uses_subsequences().then(|| self.vocab.len()),
            fit_size,
        };
        log::info!(
            "{} step {}: train acc {:.4}, test acc {:.4}, risk {:.6}, alpha {:.4}",
            self.variant.name(),
            row.step,
            row.train_acc,
            row.test_acc,
            row.risk,
            row.alpha
        );
        self.metrics.push(row);
        Ok(self.metrics.last().expect("just pushed"))
    }

    /// Trains the full-data base learner `g₀` and adds it with coefficient 1.
    pub fn fit_base(&mut self) -> Result<&RoundMetrics> {
        if self.ensemble.base.is_some() || !self.ensemble.stages.is_empty() {
            return Err(domain("the base learner must come first"));
        }
        let weights = self.weights()?;
        let inputs: Vec<Vec<u32>> = self.train.iter().map(|s| s.tokens.clone()).collect();
        let fitted = self.trainer.fit(FitJob {
            inputs: &inputs,
            targets: &weights,
            variant: LossVariant::Plain,
            warm_start: None,
            seed: derive_seed(self.seed, 1000),
        })?;
        let subseq = self.variant.uses_subsequences();
        let (g, positions) = self.evaluate_train(&fitted.learner, subseq)?;
        for (f, gi) in self.train_scores.iter_mut().zip(&g) {
            add_scaled(f, gi, 1.0)?;
        }
        self.add_to_test(&fitted.learner, subseq, 1.0)?;
        self.position_scores = positions;
        self.ensemble.base = Some(fitted.learner);
        self.epochs += fitted.epochs;
        self.record(0, 1.0, inputs.len())
    }

    /// One boosting round: weights, optional sampling and pruning, a weak
    /// learner fit, line search, and the stage update.
    pub fn boost_round(&mut self) -> Result<&RoundMetrics> {
        let t = self.ensemble.stages.len() + 1;
        let n = self.train.len();
        let weights = self.weights()?;
        let subseq = self.variant.uses_subsequences();

        let (indices, probabilities) = if self.variant.uses_sampling() {
            let dist = build_distribution(&weights)?;
            let mut rng = stream_rng(derive_seed(self.seed, 2000), t as u64);
            let subset = draw_subset(&dist, self.config.keep_fraction, n, &mut rng)?;
            let probs: Vec<f64> = subset.indices.iter().map(|&i| dist.probability(i)).collect();
            (subset.indices, Some(probs))
        } else {
            ((0..n).collect::<Vec<_>>(), None)
        };

        if subseq {
            let positions = self
                .position_scores
                .as_ref()
                .ok_or_else(|| domain("subsequence rounds need a previous learner"))?;
            let mut table = ImportanceTable::zeros(&self.vocab);
            for &i in &indices {
                let x = filter_sample(&self.train[i].tokens, &self.vocab);
                table.accumulate(&x, &positions[i])?;
            }
            let pruned = prune_vocab(&table, self.config.keep_fraction, &[CLS_ID, UNK_ID, PAD_ID])?;
            self.vocab = pruned.subset;
        }

        let inputs: Vec<Vec<u32>> = indices
            .iter()
            .map(|&i| self.inputs_for(&self.train[i], subseq))
            .collect();
        let targets: Vec<Vec<f64>> = indices.iter().map(|&i| weights[i].clone()).collect();
        let loss_variant = match &probabilities {
            Some(p) => LossVariant::ImportanceWeighted {
                probabilities: p,
                dataset_size: n,
            },
            None => LossVariant::Plain,
        };
        let warm_start = if subseq {
            self.ensemble.last_learner()
        } else {
            None
        };
        let fitted = self.trainer.fit(FitJob {
            inputs: &inputs,
            targets: &targets,
            variant: loss_variant,
            warm_start,
            seed: derive_seed(self.seed, 1000 + t as u64),
        })?;

        let (g, positions) = self.evaluate_train(&fitted.learner, subseq)?;
        let alpha = golden_section(
            |a| risk_along(&self.train_scores, Some(&g), self.train, a).unwrap_or(f64::INFINITY),
            &self.config.line_search(),
        )?;
        let coefficient = self.config.shrinkage * alpha;
        for (f, gi) in self.train_scores.iter_mut().zip(&g) {
            add_scaled(f, gi, coefficient)?;
        }
        self.add_to_test(&fitted.learner, subseq, coefficient)?;
        self.position_scores = positions;
        self.ensemble.stages.push(Stage {
            alpha,
            coefficient,
            learner: fitted.learner,
            vocab: subseq.then(|| self.vocab.clone()),
        });
        self.epochs += fitted.epochs;
        self.record(t, alpha, inputs.len())
    }

    pub fn finish(self) -> BoostRun<Tr::Learner> {
        BoostRun {
            ensemble: self.ensemble,
            metrics: self.metrics,
        }
    }
}

fn config_error(variant: BoostVariant) -> crate::Error {
    config(format!(
        "variant {} needs a learner that records attention",
        variant.name()
    ))
}

/// Mean loss of `f + α g` over the samples.
fn risk_along(f: &[Vec<f64>], g: Option<&[Vec<f64>]>, samples: &[Sample], alpha: f64) -> Result<f64> {
    let mut total = 0.0;
    let mut point = Vec::new();
    for (i, (fi, s)) in f.iter().zip(samples).enumerate() {
        point.clear();
        point.extend_from_slice(fi);
        if let Some(g) = g {
            for (p, v) in point.iter_mut().zip(&g[i]) {
                *p += alpha * v;
            }
        }
        total += per_sample_loss(&point, s.label)?;
    }
    Ok(total / f.len() as f64)
}

/// Runs `config.rounds` boosting rounds of `variant`, preceded by the base
/// learner for every variant except plain boosting.
#[allow(clippy::too_many_arguments)]
pub fn run_boost<Tr: Trainer>(
    config: &EnsembleConfig,
    variant: BoostVariant,
    train: &[Sample],
    test: &[Sample],
    vocab_size: usize,
    trainer: &mut Tr,
    seed: u64,
    clock: Stopwatch,
) -> Result<BoostRun<Tr::Learner>> {
    let mut booster = Booster::new(config, variant, train, test, vocab_size, trainer, seed, clock)?;
    if variant.has_base() {
        booster.fit_base()?;
    }
    for _ in 0..config.rounds {
        booster.boost_round()?;
    }
    Ok(booster.finish())
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::attention::AttentionRecord;

    /// Memorizes the mean target of every distinct input; unseen inputs map
    /// to zero.
    #[derive(Clone, Debug, PartialEq)]
    struct Lookup {
        dim: usize,
        table: BTreeMap<Vec<u32>, Vec<f64>>,
        attention: bool,
    }

    impl WeakLearner for Lookup {
        fn num_outputs(&self) -> usize {
            self.dim
        }

        fn predict(&self, tokens: &[u32]) -> Result<Vec<f64>> {
            Ok(self
                .table
                .get(tokens)
                .cloned()
                .unwrap_or_else(|| vec![0.0; self.dim]))
        }

        fn predict_with_attention(&self, tokens: &[u32]) -> Result<(Vec<f64>, Option<AttentionRecord>)> {
            let att = self
                .attention
                .then(|| AttentionRecord::uniform(tokens.len(), 2));
            Ok((self.predict(tokens)?, att))
        }
    }

    struct LookupTrainer {
        dim: usize,
        attention: bool,
        fits: Vec<(usize, bool)>,
    }

    impl Trainer for LookupTrainer {
        type Learner = Lookup;

        fn records_attention(&self) -> bool {
            self.attention
        }

        fn fit(&mut self, job: FitJob<'_, Lookup>) -> Result<Fitted<Lookup>> {
            self.fits.push((job.inputs.len(), job.warm_start.is_some()));
            let mut sums: BTreeMap<Vec<u32>, (Vec<f64>, f64)> = BTreeMap::new();
            for (x, w) in job.inputs.iter().zip(job.targets) {
                let e = sums.entry(x.clone()).or_insert((vec![0.0; self.dim], 0.0));
                add_scaled(&mut e.0, w, 1.0)?;
                e.1 += 1.0;
            }
            let table = sums
                .into_iter()
                .map(|(k, (s, c))| (k, s.iter().map(|v| v / c).collect()))
                .collect();
            Ok(Fitted {
                learner: Lookup {
                    dim: self.dim,
                    table,
                    attention: self.attention,
                },
                epochs: 1,
            })
        }
    }

    fn trainer(attention: bool) -> LookupTrainer {
        LookupTrainer {
            dim: 2,
            attention,
            fits: Vec::new(),
        }
    }

    fn dataset() -> Vec<Sample> {
        (0..20u32)
            .map(|i| Sample {
                tokens: vec![0, 3 + i % 7, 10 + i % 5, 3 + (i * 3) % 11],
                label: (i % 2) as usize,
            })
            .collect()
    }

    fn config(rounds: usize) -> EnsembleConfig {
        EnsembleConfig {
            rounds,
            ..EnsembleConfig::default()
        }
    }

    #[test]
    fn perfect_learner_reduces_risk() {
        let data = vec![Sample {
            tokens: vec![0, 5],
            label: 0,
        }];
        let mut tr = trainer(false);
        let mut b = Booster::new(&config(1), BoostVariant::Plain, &data, &data, 8, &mut tr, 0, Stopwatch::Frozen)
            .unwrap();
        let before = b.risk().unwrap();
        assert_eq!(before, 1.0);
        let row = b.boost_round().unwrap().clone();
        assert!(row.risk < before);
        assert_eq!(b.ensemble().stages.len(), 1);
        assert!(b.ensemble().base.is_none());
    }

    #[test]
    fn plain_variant_has_one_stage_per_round() {
        let data = dataset();
        let mut tr = trainer(false);
        let run = run_boost(&config(1), BoostVariant::Plain, &data, &data, 20, &mut tr, 3, Stopwatch::Frozen)
            .unwrap();
        assert_eq!(run.ensemble.stages.len(), 1);
        assert!(run.ensemble.base.is_none());
        assert_eq!(run.metrics.len(), 1);
        assert_eq!(run.metrics[0].step, 1);
    }

    #[test]
    fn risk_never_increases() {
        let data = dataset();
        for variant in BoostVariant::ALL {
            let mut tr = trainer(true);
            let run = run_boost(&config(4), variant, &data, &data, 20, &mut tr, 1, Stopwatch::Frozen).unwrap();
            let risks: Vec<f64> = run.metrics.iter().map(|m| m.risk).collect();
            for pair in risks.windows(2) {
                assert!(pair[1] <= pair[0] + 1e-12, "{variant:?}: {risks:?}");
            }
            assert!(run.ensemble.stages.iter().all(|s| s.alpha >= 0.0));
        }
    }

    #[test]
    fn subsequence_vocabularies_shrink() {
        let data = dataset();
        let mut tr = trainer(true);
        let run = run_boost(&config(3), BoostVariant::Subsequence, &data, &data, 20, &mut tr, 0, Stopwatch::Frozen)
            .unwrap();
        assert!(run.ensemble.base.is_some());
        assert_eq!(run.ensemble.stages.len(), 3);
        let mut prev = VocabSubset::full(20);
        for stage in &run.ensemble.stages {
            let v = stage.vocab.as_ref().unwrap();
            assert!(v.is_subset_of(&prev) && v.len() < prev.len());
            for id in [CLS_ID, UNK_ID, PAD_ID] {
                assert!(v.contains(id));
            }
            let ratio = (v.len() - 3) as f64 / (prev.len() - 3) as f64;
            assert!((ratio - 0.8).abs() < 0.1, "ratio {ratio}");
            prev = v.clone();
        }
        // Base learner, then warm-started stages.
        assert_eq!(tr.fits[0], (20, false));
        assert!(tr.fits[1..].iter().all(|&(_, warm)| warm));
        assert_eq!(run.metrics.len(), 4);
        assert_eq!(run.metrics[0].step, 0);
    }

    #[test]
    fn sampling_fits_on_a_fraction() {
        let data = dataset();
        let mut tr = trainer(false);
        run_boost(&config(2), BoostVariant::ImportanceSampling, &data, &data, 20, &mut tr, 0, Stopwatch::Frozen)
            .unwrap();
        let sizes: Vec<usize> = tr.fits.iter().map(|f| f.0).collect();
        assert_eq!(sizes, vec![20, 16, 16]);
        assert!(tr.fits.iter().all(|f| !f.1));
    }

    #[test]
    fn subsequences_need_attention() {
        let data = dataset();
        for variant in [BoostVariant::Subsequence, BoostVariant::SubsequenceImportanceSampling] {
            let mut tr = trainer(false);
            let err = run_boost(&config(1), variant, &data, &data, 20, &mut tr, 0, Stopwatch::Frozen);
            assert!(matches!(err, Err(crate::Error::Config(_))));
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let data = dataset();
        for variant in BoostVariant::ALL {
            let a = run_boost(&config(3), variant, &data, &data, 20, &mut trainer(true), 7, Stopwatch::Frozen)
                .unwrap();
            let b = run_boost(&config(3), variant, &data, &data, 20, &mut trainer(true), 7, Stopwatch::Frozen)
                .unwrap();
            assert_eq!(a.metrics, b.metrics);
            assert_eq!(a.ensemble, b.ensemble);
        }
    }

    #[test]
    fn cached_scores_match_ensemble_predictions() {
        let data = dataset();
        for variant in BoostVariant::ALL {
            let mut tr = trainer(true);
            let mut b = Booster::new(&config(3), variant, &data, &data, 20, &mut tr, 2, Stopwatch::Frozen).unwrap();
            if variant.has_base() {
                b.fit_base().unwrap();
            }
            for _ in 0..3 {
                b.boost_round().unwrap();
            }
            for (s, cached) in data.iter().zip(b.train_scores()) {
                let direct = b.ensemble().predict(&s.tokens).unwrap();
                for (x, y) in direct.iter().zip(cached) {
                    assert!((x - y).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn transformer_trainer_checks_precision() {
        let cfg = TransformerConfig {
            precision: crate::DType::Float64,
            ..TransformerConfig::default()
        };
        assert!(TransformerTrainer::<f32>::new(cfg.clone(), OptimizerConfig::default()).is_err());
        assert!(TransformerTrainer::<f64>::new(cfg, OptimizerConfig::default()).is_ok());
    }

    #[test]
    fn variant_names_round_trip() {
        for v in BoostVariant::ALL {
            let json = serde_json::to_string(&v).unwrap();
            assert_eq!(json, format!("\"{}\"", v.name()));
            assert_eq!(serde_json::from_str::<BoostVariant>(&json).unwrap(), v);
        }
    }
}
