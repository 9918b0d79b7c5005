//! `boostformer`: train, evaluate and inspect boosted transformer ensembles.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};

use boostformer_core::checkpoint;
use boostformer_core::data::Sample;
use boostformer_core::experiment::{
    evaluate, importance_report, load_records, prepare_data, read_corpus, run, RunConfig,
};
use boostformer_core::files::{json_bytes, read_metrics, write_atomic, write_json, write_metrics};
use boostformer_core::oracle::{run_suite, SuiteOptions};
use boostformer_core::report::{plot_csv, plot_data, TimingTable};
use boostformer_core::Error;

/// Environment variable that overrides the configured output directory.
const OUTPUT_DIR_ENV: &str = "BOOSTFORMER_OUTPUT_DIR";

#[derive(Parser)]
#[command(name = "boostformer", version, about = "Gradient boosting with transformer weak learners")]
struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model variant and write metrics, checkpoint and resolved config.
    Train(TrainArgs),
    /// Accuracy and confusion counts of a checkpoint on a dataset.
    Eval(EvalArgs),
    /// Token importance under a checkpoint's most recent learner.
    Importance(ImportanceArgs),
    /// Numerically verify the optimal sampling distribution.
    Verify(VerifyArgs),
    /// Accuracy relative to a baseline on a common epoch axis.
    PlotData(PlotArgs),
    /// Total wall-clock seconds per dataset and variant.
    Timing(TimingArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// JSON run configuration.
    #[arg(short, long)]
    config: Option<PathBuf>,
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config file and the environment variable.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Boosting rounds.
    #[arg(long)]
    rounds: Option<usize>,
    /// Epochs per weak learner.
    #[arg(long)]
    epochs: Option<usize>,
    /// Epochs of the vanilla baselines.
    #[arg(long)]
    baseline_epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    shrinkage: Option<f64>,
    #[arg(long)]
    keep_fraction: Option<f64>,
    #[arg(long, value_parser = ["float32", "float64"])]
    precision: Option<String>,
    /// Write 0 for every elapsed time, making outputs byte-reproducible.
    #[arg(long)]
    no_wall_clock: bool,
}

#[derive(Args)]
struct DataArgs {
    /// Labelled JSONL or CSV file.
    #[arg(long, conflicts_with = "config")]
    data: Option<PathBuf>,
    /// Run configuration whose test split is used.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    /// Write the JSON report here instead of stdout.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ImportanceArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 0.8)]
    keep_fraction: f64,
    /// Only report the highest-scoring tokens.
    #[arg(long)]
    top: Option<usize>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    instances: usize,
    /// Monte Carlo draws per estimate.
    #[arg(long, default_value_t = 100_000)]
    draws: usize,
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Perturb closed-form values before comparison (negative control).
    #[arg(long, hide = true)]
    corrupt_closed_form: bool,
}

#[derive(Args)]
struct PlotArgs {
    /// Metrics file of the baseline.
    #[arg(long)]
    baseline: PathBuf,
    /// Metrics files to compare.
    #[arg(long = "metrics", required = true, num_args = 1..)]
    metrics: Vec<PathBuf>,
    #[arg(long, default_value_t = 5)]
    epochs_per_learner: usize,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct TimingArgs {
    /// Metrics files, optionally as DATASET=PATH.
    #[arg(long = "metrics", num_args = 1..)]
    metrics: Vec<String>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

/// Why a command failed, mapped to the process exit code.
enum Failure {
    Core(Error),
    Verification(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Core(Error::Config(_) | Error::Domain(_) | Error::Parse { .. } | Error::Json(_)) => 2,
            Failure::Core(Error::Numeric(_)) => 3,
            Failure::Core(_) => 1,
            Failure::Verification(_) => 4,
        }
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let outcome = match cli.command {
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Importance(a) => importance(a),
        Command::Verify(a) => verify(a),
        Command::PlotData(a) => plot(a),
        Command::Timing(a) => timing(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            match &failure {
                Failure::Core(e) => eprintln!("error: {e}"),
                Failure::Verification(msg) => eprintln!("verification failed: {msg}"),
            }
            ExitCode::from(failure.exit_code())
        }
    }
}

fn set(root: &mut Value, path: &[&str], value: Value) {
    let mut node = root;
    for key in &path[..path.len() - 1] {
        if !node.get(*key).is_some_and(Value::is_object) {
            node[*key] = Value::Object(Map::new());
        }
        node = &mut node[*key];
    }
    node[path[path.len() - 1]] = value;
}

fn read_json(path: &Path) -> Result<Value, Error> {
    let text = std::fs::read_to_string(path)?;
    let value: Value = serde_json::from_str(&text)?;
    if !value.is_object() {
        return Err(Error::Config(format!("{} must hold a JSON object", path.display())));
    }
    Ok(value)
}

/// Merges defaults, the config file, the output-dir environment variable
/// and command-line flags, in increasing precedence.
fn resolve_config(a: &TrainArgs) -> Result<RunConfig, Error> {
    let mut v = match &a.config {
        Some(path) => read_json(path)?,
        None => json!({}),
    };
    if let Ok(dir) = std::env::var(OUTPUT_DIR_ENV) {
        set(&mut v, &["output_dir"], json!(dir));
    }
    let overrides: [(&[&str], Option<Value>); 11] = [
        (&["variant"], a.variant.as_ref().map(|x| json!(x))),
        (&["seed"], a.seed.map(|x| json!(x))),
        (&["output_dir"], a.output_dir.as_ref().map(|x| json!(x))),
        (&["ensemble", "rounds"], a.rounds.map(|x| json!(x))),
        (&["optimizer", "epochs"], a.epochs.map(|x| json!(x))),
        (&["baseline", "epochs"], a.baseline_epochs.map(|x| json!(x))),
        (&["optimizer", "learning_rate"], a.learning_rate.map(|x| json!(x))),
        (&["ensemble", "shrinkage"], a.shrinkage.map(|x| json!(x))),
        (&["ensemble", "keep_fraction"], a.keep_fraction.map(|x| json!(x))),
        (&["model", "precision"], a.precision.as_ref().map(|x| json!(x))),
        (&["wall_clock"], a.no_wall_clock.then(|| json!(false))),
    ];
    for (path, value) in overrides {
        if let Some(value) = value {
            set(&mut v, path, value);
        }
    }
    serde_json::from_value(v).map_err(|e| Error::Config(e.to_string()))
}

fn train(a: TrainArgs) -> CmdResult {
    let cfg = resolve_config(&a)?;
    let data = prepare_data(&cfg)?;
    log::info!(
        "{}: {} train / {} test samples, vocabulary {}",
        cfg.variant,
        data.train.len(),
        data.test.len(),
        data.tokenizer.vocab_size()
    );
    let out = run(&cfg, &data)?;
    let dir = &cfg.output_dir;
    write_metrics(&dir.join("metrics.csv"), &out.rows)?;
    checkpoint::save(&dir.join("model.ckpt"), &out.model, &data.tokenizer)?;
    write_json(&dir.join("config.json"), &cfg)?;
    if let Some(last) = out.rows.last() {
        println!(
            "{} step {}: train_acc {:.4} test_acc {:.4} risk {:.6}",
            cfg.variant, last.step, last.train_acc, last.test_acc, last.risk
        );
    }
    Ok(())
}

/// Encoded evaluation samples using the checkpoint's tokenizer.
fn eval_samples(
    args: &DataArgs,
    tokenizer: &boostformer_core::data::Tokenizer,
    num_classes: usize,
    max_len: usize,
) -> Result<Vec<Sample>, Error> {
    let records = match (&args.data, &args.config) {
        (Some(path), _) => read_corpus(path, None, num_classes)?,
        (None, Some(path)) => {
            let cfg: RunConfig = serde_json::from_value(read_json(path)?)
                .map_err(|e| Error::Config(e.to_string()))?;
            if cfg.ensemble.num_classes != num_classes {
                return Err(Error::Config(format!(
                    "config has {} classes, checkpoint {num_classes}",
                    cfg.ensemble.num_classes
                )));
            }
            load_records(&cfg)?.1
        }
        (None, None) => return Err(Error::Config("pass --data or --config".into())),
    };
    records.iter().map(|r| tokenizer.encode(r, max_len)).collect()
}

fn emit(output: Option<&Path>, bytes: &[u8]) -> Result<(), Error> {
    match output {
        Some(path) => write_atomic(path, bytes),
        None => {
            use std::io::Write;
            std::io::stdout().write_all(bytes)?;
            Ok(())
        }
    }
}

fn load_model(path: &Path) -> Result<(boostformer_core::experiment::Model, boostformer_core::data::Tokenizer, usize), Error> {
    let (model, tokenizer) = checkpoint::load(path)?;
    let max_len = model
        .learner_config()
        .map(|c| c.max_seq_len)
        .ok_or_else(|| Error::Checkpoint("checkpoint holds no learners".into()))?;
    Ok((model, tokenizer, max_len))
}

fn eval(a: EvalArgs) -> CmdResult {
    let (model, tokenizer, max_len) = load_model(&a.checkpoint)?;
    let samples = eval_samples(&a.data, &tokenizer, model.num_classes(), max_len)?;
    let report = evaluate(&model, &samples)?;
    emit(a.output.as_deref(), &json_bytes(&report)?)?;
    Ok(())
}

fn importance(a: ImportanceArgs) -> CmdResult {
    let (model, tokenizer, max_len) = load_model(&a.checkpoint)?;
    let samples = eval_samples(&a.data, &tokenizer, model.num_classes(), max_len)?;
    let mut report = importance_report(&model, &tokenizer, &samples, a.keep_fraction)?;
    if let Some(top) = a.top {
        report.tokens.truncate(top);
    }
    emit(a.output.as_deref(), &json_bytes(&report)?)?;
    Ok(())
}

fn verify(a: VerifyArgs) -> CmdResult {
    let options = SuiteOptions {
        seed: a.seed,
        instances: a.instances,
        draws: a.draws,
        corrupt_closed_form: a.corrupt_closed_form,
        ..SuiteOptions::default()
    };
    let report = run_suite(&options)?;
    emit(a.output.as_deref(), &json_bytes(&report)?)?;
    if report.passed {
        Ok(())
    } else {
        let failed: Vec<&str> = report
            .identities
            .iter()
            .filter(|r| !r.passed)
            .map(|r| r.name.as_str())
            .collect();
        Err(Failure::Verification(failed.join(", ")))
    }
}

fn plot(a: PlotArgs) -> CmdResult {
    let baseline = read_metrics(&a.baseline)?;
    let series = a
        .metrics
        .iter()
        .map(|p| read_metrics(p))
        .collect::<Result<Vec<_>, _>>()?;
    let rows = plot_data(&series, &baseline, a.epochs_per_learner)?;
    emit(a.output.as_deref(), &plot_csv(&rows)?)?;
    Ok(())
}

fn timing(a: TimingArgs) -> CmdResult {
    let mut table = TimingTable::default();
    for spec in &a.metrics {
        let (dataset, path) = match spec.split_once('=') {
            Some((d, p)) => (d.to_string(), PathBuf::from(p)),
            None => ("default".to_string(), PathBuf::from(spec)),
        };
        table.add(&dataset, &read_metrics(&path)?)?;
    }
    emit(a.output.as_deref(), &table.to_csv()?)?;
    Ok(())
}
