//! End-to-end runs: configuration, data preparation, the six model variants,
//! and evaluation of trained models.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::attention::AttentionRecord;
use crate::boosting::{
    accuracy, argmax, risk, run_boost, BoostVariant, Ensemble, EnsembleConfig, RoundMetrics,
    TransformerTrainer,
};
use crate::clock::Stopwatch;
use crate::data::{
    generate_synthetic, load_corpus, remove_random_tokens, CorpusFormat, CorpusRecord, Sample,
    SyntheticSpec, Tokenizer, CLS_ID, PAD_ID, UNK_ID,
};
use crate::error::{config, domain, Error, Result};
use crate::importance::{
    filter_sample, position_importance, prune_vocab, ImportanceTable, VocabSubset,
};
use crate::rng::{derive_seed, stream_rng};
use crate::scalar::{DType, Scalar};
use crate::transformer::{
    train, Objective, OptimizerConfig, TrainOptions, Transformer, TransformerConfig,
};

/// The six model variants, in timing-table column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Variant {
    /// A single transformer trained with cross-entropy.
    Vanilla,
    /// The vanilla baseline on inputs with a random fraction of tokens removed.
    SubseqVanilla,
    Boost(BoostVariant),
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::Vanilla,
        Variant::SubseqVanilla,
        Variant::Boost(BoostVariant::Plain),
        Variant::Boost(BoostVariant::Subsequence),
        Variant::Boost(BoostVariant::ImportanceSampling),
        Variant::Boost(BoostVariant::SubsequenceImportanceSampling),
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Vanilla => "vanilla",
            Variant::SubseqVanilla => "subseq-vanilla",
            Variant::Boost(b) => b.name(),
        }
    }

    /// Weak-learner epochs consumed once `step` is complete, for a boosted
    /// variant whose learners train `epochs_per_learner` epochs each.
    pub fn cumulative_epochs(self, step: usize, epochs_per_learner: usize) -> usize {
        match self {
            Variant::Vanilla | Variant::SubseqVanilla => step,
            Variant::Boost(b) if b.has_base() => (step + 1) * epochs_per_learner,
            Variant::Boost(_) => step * epochs_per_learner,
        }
    }
}

// Variants order like the timing-table columns.
impl PartialOrd for Variant {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Variant {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        let pos = |v: &Variant| Variant::ALL.iter().position(|x| x == v);
        pos(self).cmp(&pos(other))
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Variant::ALL.iter().map(|v| v.name()).collect();
                config(format!("unknown variant {s:?}; expected one of {}", names.join(", ")))
            })
    }
}

impl TryFrom<String> for Variant {
    type Error = String;

    fn try_from(s: String) -> std::result::Result<Self, String> {
        s.parse().map_err(|e| match e {
            Error::Config(msg) => msg,
            other => other.to_string(),
        })
    }
}

impl From<Variant> for String {
    fn from(v: Variant) -> String {
        v.name().to_string()
    }
}

/// Labelled train/test files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileSource {
    pub train: PathBuf,
    pub test: PathBuf,
    /// Inferred from the file extension when absent.
    #[serde(default)]
    pub format: Option<CorpusFormat>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DataSource {
    Synthetic(SyntheticSpec),
    Files(FileSource),
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Synthetic(SyntheticSpec::default())
    }
}

/// Settings of the two non-boosted baselines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    pub epochs: usize,
    /// Fraction of content tokens removed per sample by `subseq-vanilla`.
    pub token_removal: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            token_removal: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VocabConfig {
    pub min_freq: usize,
    pub max_size: Option<usize>,
}

impl Default for VocabConfig {
    fn default() -> Self {
        Self {
            min_freq: 1,
            max_size: None,
        }
    }
}

fn default_variant() -> Variant {
    Variant::Boost(BoostVariant::Plain)
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

fn default_true() -> bool {
    true
}

/// Everything a run depends on. The model's `vocab_size` and `num_classes`
/// are derived from the data and the ensemble settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub data: DataSource,
    #[serde(default = "default_variant")]
    pub variant: Variant,
    #[serde(default)]
    pub ensemble: EnsembleConfig,
    #[serde(default)]
    pub model: TransformerConfig,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub baseline: BaselineConfig,
    #[serde(default)]
    pub vocab: VocabConfig,
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Record wall-clock seconds; when false every `elapsed_s` is 0 so that
    /// outputs are byte-reproducible.
    #[serde(default = "default_true")]
    pub wall_clock: bool,
}

impl RunConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            data: DataSource::default(),
            variant: default_variant(),
            ensemble: EnsembleConfig::default(),
            model: TransformerConfig::default(),
            optimizer: OptimizerConfig::default(),
            baseline: BaselineConfig::default(),
            vocab: VocabConfig::default(),
            seed,
            output_dir: default_output_dir(),
            wall_clock: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.ensemble.validate()?;
        self.optimizer.validate()?;
        if self.baseline.epochs == 0 {
            return Err(config("baseline epochs must be positive"));
        }
        if !(0.0..1.0).contains(&self.baseline.token_removal) {
            return Err(config("token_removal must lie in [0, 1)"));
        }
        if let DataSource::Synthetic(spec) = &self.data {
            spec.validate()?;
            if spec.num_classes != self.ensemble.num_classes {
                return Err(config(format!(
                    "synthetic data has {} classes but the ensemble expects {}",
                    spec.num_classes, self.ensemble.num_classes
                )));
            }
        }
        Ok(())
    }
}

/// Encoded data plus the tokenizer and the resolved model shape.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub tokenizer: Tokenizer,
    pub train: Vec<Sample>,
    pub test: Vec<Sample>,
    pub model: TransformerConfig,
}

/// Loads a corpus, inferring the format from the extension when needed.
pub fn read_corpus(
    path: &std::path::Path,
    format: Option<CorpusFormat>,
    num_classes: usize,
) -> Result<Vec<CorpusRecord>> {
    let format = format
        .or_else(|| CorpusFormat::from_path(path))
        .ok_or_else(|| config(format!("cannot infer the format of {}", path.display())))?;
    load_corpus(path, format, num_classes)
}

pub fn load_records(cfg: &RunConfig) -> Result<(Vec<CorpusRecord>, Vec<CorpusRecord>)> {
    match &cfg.data {
        DataSource::Synthetic(spec) => generate_synthetic(spec),
        DataSource::Files(files) => Ok((
            read_corpus(&files.train, files.format, cfg.ensemble.num_classes)?,
            read_corpus(&files.test, files.format, cfg.ensemble.num_classes)?,
        )),
    }
}

pub fn prepare_data(cfg: &RunConfig) -> Result<PreparedData> {
    cfg.validate()?;
    let (train_records, test_records) = load_records(cfg)?;
    let tokenizer =
        Tokenizer::build_from_records(&train_records, cfg.vocab.min_freq, cfg.vocab.max_size)?;
    let model = TransformerConfig {
        vocab_size: tokenizer.vocab_size(),
        num_classes: cfg.ensemble.num_classes,
        ..cfg.model.clone()
    };
    model.validate()?;
    let encode = |records: &[CorpusRecord]| -> Result<Vec<Sample>> {
        records
            .iter()
            .map(|r| tokenizer.encode(r, model.max_seq_len))
            .collect()
    };
    let train = encode(&train_records)?;
    let test = encode(&test_records)?;
    if train.is_empty() || test.is_empty() {
        return Err(domain("train and test sets must be non-empty"));
    }
    Ok(PreparedData {
        tokenizer,
        train,
        test,
        model,
    })
}

/// One line of a metrics file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub variant: String,
    pub step: usize,
    pub train_acc: f64,
    pub test_acc: f64,
    pub risk: f64,
    pub elapsed_s: f64,
}

impl MetricsRow {
    fn from_round(variant: Variant, m: &RoundMetrics) -> Self {
        Self {
            variant: variant.name().to_string(),
            step: m.step,
            train_acc: m.train_acc,
            test_acc: m.test_acc,
            risk: m.risk,
            elapsed_s: m.elapsed_s,
        }
    }
}

/// A trained ensemble in either precision. Baselines are stored as an
/// ensemble holding only a base learner.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    F32(Ensemble<Transformer<f32>>),
    F64(Ensemble<Transformer<f64>>),
}

impl Model {
    pub fn dtype(&self) -> DType {
        match self {
            Model::F32(_) => DType::Float32,
            Model::F64(_) => DType::Float64,
        }
    }

    pub fn num_classes(&self) -> usize {
        match self {
            Model::F32(e) => e.num_classes,
            Model::F64(e) => e.num_classes,
        }
    }

    pub fn predict(&self, tokens: &[u32]) -> Result<Vec<f64>> {
        match self {
            Model::F32(e) => e.predict(tokens),
            Model::F64(e) => e.predict(tokens),
        }
    }

    /// Vocabulary of the most recent stage, if it was pruned.
    pub fn last_vocab(&self) -> Option<&VocabSubset> {
        match self {
            Model::F32(e) => e.stages.last().and_then(|s| s.vocab.as_ref()),
            Model::F64(e) => e.stages.last().and_then(|s| s.vocab.as_ref()),
        }
    }

    /// Scores and attention of the most recently added learner.
    pub fn last_learner_forward(&self, tokens: &[u32]) -> Result<(Vec<f64>, AttentionRecord)> {
        fn go<T: Scalar>(e: &Ensemble<Transformer<T>>, tokens: &[u32]) -> Result<(Vec<f64>, AttentionRecord)> {
            e.last_learner()
                .ok_or_else(|| domain("the model has no learners"))?
                .forward(tokens)
        }
        match self {
            Model::F32(e) => go(e, tokens),
            Model::F64(e) => go(e, tokens),
        }
    }

    /// Configuration shared by every learner.
    pub fn learner_config(&self) -> Option<&TransformerConfig> {
        match self {
            Model::F32(e) => e.last_learner().map(|l| l.config()),
            Model::F64(e) => e.last_learner().map(|l| l.config()),
        }
    }
}

pub struct RunOutput {
    pub rows: Vec<MetricsRow>,
    pub model: Model,
}

/// Runs `cfg.variant` on prepared data.
pub fn run(cfg: &RunConfig, data: &PreparedData) -> Result<RunOutput> {
    cfg.validate()?;
    match data.model.precision {
        DType::Float32 => run_typed::<f32>(cfg, data).map(|(rows, e)| RunOutput {
            rows,
            model: Model::F32(e),
        }),
        DType::Float64 => run_typed::<f64>(cfg, data).map(|(rows, e)| RunOutput {
            rows,
            model: Model::F64(e),
        }),
    }
}

fn run_typed<T: Scalar>(
    cfg: &RunConfig,
    data: &PreparedData,
) -> Result<(Vec<MetricsRow>, Ensemble<Transformer<T>>)> {
    let clock = Stopwatch::start(!cfg.wall_clock);
    match cfg.variant {
        Variant::Boost(variant) => {
            let mut trainer = TransformerTrainer::<T>::new(data.model.clone(), cfg.optimizer.clone())?;
            let run = run_boost(
                &cfg.ensemble,
                variant,
                &data.train,
                &data.test,
                data.model.vocab_size,
                &mut trainer,
                cfg.seed,
                clock,
            )?;
            let rows = run
                .metrics
                .iter()
                .map(|m| MetricsRow::from_round(cfg.variant, m))
                .collect();
            Ok((rows, run.ensemble))
        }
        Variant::Vanilla => run_vanilla(cfg, data, &data.train, &data.test, clock),
        Variant::SubseqVanilla => {
            let fraction = cfg.baseline.token_removal;
            let mut rng = stream_rng(cfg.seed, 77);
            let mut shorten = |samples: &[Sample]| -> Vec<Sample> {
                samples
                    .iter()
                    .map(|s| Sample {
                        tokens: remove_random_tokens(&s.tokens, fraction, &mut rng),
                        label: s.label,
                    })
                    .collect()
            };
            let train_set = shorten(&data.train);
            let test_set = shorten(&data.test);
            run_vanilla(cfg, data, &train_set, &test_set, clock)
        }
    }
}

fn scores<T: Scalar>(model: &Transformer<T>, samples: &[Sample]) -> Result<Vec<Vec<f64>>> {
    samples.iter().map(|s| model.predict(&s.tokens)).collect()
}

fn exp_risk(scores: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
    risk(scores.iter().zip(labels).map(|(f, &z)| (f.as_slice(), z)))
}

fn run_vanilla<T: Scalar>(
    cfg: &RunConfig,
    data: &PreparedData,
    train_set: &[Sample],
    test_set: &[Sample],
    clock: Stopwatch,
) -> Result<(Vec<MetricsRow>, Ensemble<Transformer<T>>)> {
    let seed = derive_seed(cfg.seed, 1000);
    let mut model = Transformer::<T>::new(data.model.clone(), seed)?;
    let inputs: Vec<Vec<u32>> = train_set.iter().map(|s| s.tokens.clone()).collect();
    let train_labels: Vec<usize> = train_set.iter().map(|s| s.label).collect();
    let test_labels: Vec<usize> = test_set.iter().map(|s| s.label).collect();
    let opt = OptimizerConfig {
        epochs: cfg.baseline.epochs,
        ..cfg.optimizer.clone()
    };
    let mut rows = Vec::with_capacity(opt.epochs);
    train(
        &mut model,
        &inputs,
        &Objective::CrossEntropy {
            labels: &train_labels,
        },
        &opt,
        TrainOptions {
            seed,
            keep_best: false,
        },
        |epoch, m| {
            let train_scores = scores(m, train_set)?;
            let test_scores = scores(m, test_set)?;
            let row = MetricsRow {
                variant: cfg.variant.name().to_string(),
                step: epoch + 1,
                train_acc: accuracy(&train_scores, &train_labels),
                test_acc: accuracy(&test_scores, &test_labels),
                risk: exp_risk(&train_scores, &train_labels)?,
                elapsed_s: clock.elapsed_s(),
            };
            log::info!(
                "{} epoch {}: train acc {:.4}, test acc {:.4}",
                row.variant,
                row.step,
                row.train_acc,
                row.test_acc
            );
            rows.push(row);
            Ok(())
        },
    )?;
    let mut ensemble = Ensemble::new(cfg.ensemble.num_classes, cfg.ensemble.shrinkage);
    ensemble.base = Some(model);
    Ok((rows, ensemble))
}

/// Accuracy and confusion counts (rows: true class, columns: predicted).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub samples: usize,
    pub accuracy: f64,
    pub confusion: Vec<Vec<usize>>,
}

pub fn evaluate(model: &Model, samples: &[Sample]) -> Result<EvalReport> {
    let m = model.num_classes();
    if samples.is_empty() {
        return Err(domain("cannot evaluate on an empty dataset"));
    }
    let mut confusion = vec![vec![0usize; m]; m];
    let mut hits = 0;
    for s in samples {
        if s.label >= m {
            return Err(domain(format!("label {} outside {m} classes", s.label + 1)));
        }
        let predicted = argmax(&model.predict(&s.tokens)?);
        confusion[s.label][predicted] += 1;
        hits += usize::from(predicted == s.label);
    }
    Ok(EvalReport {
        samples: samples.len(),
        accuracy: hits as f64 / samples.len() as f64,
        confusion,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenScore {
    pub id: u32,
    pub word: String,
    pub score: f64,
}

/// Token importance under the most recent learner, and the vocabulary that
/// pruning at `keep_fraction` would retain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub keep_fraction: f64,
    /// Sorted by descending score, then ascending id.
    pub tokens: Vec<TokenScore>,
    pub kept: Vec<u32>,
}

pub fn importance_report(
    model: &Model,
    tokenizer: &Tokenizer,
    samples: &[Sample],
    keep_fraction: f64,
) -> Result<ImportanceReport> {
    let vocab = model
        .last_vocab()
        .cloned()
        .unwrap_or_else(|| VocabSubset::full(tokenizer.vocab_size()));
    let mut table = ImportanceTable::zeros(&vocab);
    for s in samples {
        let x = filter_sample(&s.tokens, &vocab);
        let (_, attention) = model.last_learner_forward(&x)?;
        table.accumulate(&x, &position_importance(&attention)?)?;
    }
    let pruned = prune_vocab(&table, keep_fraction, &[CLS_ID, UNK_ID, PAD_ID])?;
    let mut tokens: Vec<TokenScore> = table
        .iter()
        .map(|(id, score)| TokenScore {
            id,
            word: tokenizer.word(id).unwrap_or_default().to_string(),
            score,
        })
        .collect();
    tokens.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.id.cmp(&b.id)));
    Ok(ImportanceReport {
        keep_fraction,
        tokens,
        kept: pruned.subset.iter().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(variant: Variant) -> RunConfig {
        let mut cfg = RunConfig::new(3);
        cfg.variant = variant;
        cfg.data = DataSource::Synthetic(SyntheticSpec {
            vocab_size: 30,
            n_train: 40,
            n_test: 20,
            min_len: 4,
            max_len: 6,
            ..SyntheticSpec::default()
        });
        cfg.model = TransformerConfig {
            layers: 1,
            heads: 2,
            d_model: 8,
            d_ff: 16,
            max_seq_len: 16,
            ..TransformerConfig::default()
        };
        cfg.optimizer.epochs = 1;
        cfg.ensemble.rounds = 2;
        cfg.baseline.epochs = 3;
        cfg.wall_clock = false;
        cfg
    }

    #[test]
    fn variant_names_parse() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
        assert!("boosted".parse::<Variant>().is_err());
    }

    #[test]
    fn row_counts_per_variant() {
        for v in Variant::ALL {
            let cfg = tiny(v);
            let data = prepare_data(&cfg).unwrap();
            let out = run(&cfg, &data).unwrap();
            let expected = match v {
                Variant::Vanilla | Variant::SubseqVanilla => 3,
                Variant::Boost(BoostVariant::Plain) => 2,
                Variant::Boost(_) => 3,
            };
            assert_eq!(out.rows.len(), expected, "{v}");
            assert!(out.rows.iter().all(|r| r.variant == v.name()));
        }
    }

    #[test]
    fn seed_is_required_in_json() {
        assert!(serde_json::from_str::<RunConfig>("{}").is_err());
        let cfg: RunConfig = serde_json::from_str(r#"{"seed": 4, "variant": "is-boost"}"#).unwrap();
        assert_eq!(cfg.variant, Variant::Boost(BoostVariant::ImportanceSampling));
        assert_eq!(cfg.baseline.epochs, 30);
        assert_eq!(cfg.ensemble.rounds, 6);
    }

    #[test]
    fn mismatched_class_counts_are_rejected() {
        let mut cfg = tiny(Variant::Vanilla);
        cfg.ensemble.num_classes = 3;
        assert!(matches!(prepare_data(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn empty_model_predicts_first_class() {
        let model = Model::F32(Ensemble::new(2, 0.5));
        let samples = vec![
            Sample { tokens: vec![0, 4], label: 0 },
            Sample { tokens: vec![0, 5], label: 1 },
        ];
        let report = evaluate(&model, &samples).unwrap();
        assert_eq!(report.confusion, vec![vec![1, 0], vec![1, 0]]);
        assert_eq!(report.accuracy, 0.5);
    }

    #[test]
    fn cumulative_epoch_axis() {
        assert_eq!(Variant::Vanilla.cumulative_epochs(7, 5), 7);
        assert_eq!(Variant::Boost(BoostVariant::Plain).cumulative_epochs(6, 5), 30);
        assert_eq!(Variant::Boost(BoostVariant::Subsequence).cumulative_epochs(5, 5), 30);
    }
}
