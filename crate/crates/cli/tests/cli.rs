use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_boostformer");

fn tiny_config(variant: &str) -> Value {
    json!({
        "seed": 1,
        "variant": variant,
        "data": {"kind": "synthetic", "vocab_size": 40, "n_train": 60, "n_test": 30,
                 "min_len": 4, "max_len": 8},
        "model": {"layers": 1, "heads": 2, "d_model": 8, "d_ff": 16, "max_seq_len": 16},
        "optimizer": {"epochs": 1},
        "ensemble": {"rounds": 2},
        "baseline": {"epochs": 3}
    })
}

fn write_config(dir: &Path, cfg: &Value) -> PathBuf {
    let path = dir.join("config.in.json");
    fs::write(&path, serde_json::to_vec_pretty(cfg).unwrap()).unwrap();
    path
}

fn boostformer(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("BOOSTFORMER_OUTPUT_DIR")
        .output()
        .unwrap()
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn train(cfg: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--output-dir",
        out.to_str().unwrap(),
        "--no-wall-clock",
    ];
    args.extend_from_slice(extra);
    boostformer(&args)
}

fn metric_rows(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(str::to_string)
        .collect()
}

#[test]
fn boosted_variants_write_one_row_per_learner() {
    let tmp = TempDir::new().unwrap();
    for variant in ["boost", "subseq-boost", "is-boost", "subseq-is-boost"] {
        let cfg = write_config(tmp.path(), &tiny_config(variant));
        let out = tmp.path().join(variant);
        ok(&train(&cfg, &out, &[]));
        let rows = metric_rows(&out.join("metrics.csv"));
        let expected = if variant == "boost" { 2 } else { 3 };
        assert_eq!(rows.len(), expected, "{variant}");
        assert!(rows.iter().all(|r| r.starts_with(variant)));
        assert!(out.join("model.ckpt").is_file());
        assert!(out.join("config.json").is_file());
    }
}

#[test]
fn baselines_write_one_row_per_epoch() {
    let tmp = TempDir::new().unwrap();
    for variant in ["vanilla", "subseq-vanilla"] {
        let cfg = write_config(tmp.path(), &tiny_config(variant));
        let out = tmp.path().join(variant);
        ok(&train(&cfg, &out, &[]));
        assert_eq!(metric_rows(&out.join("metrics.csv")).len(), 3, "{variant}");
    }
}

const ARTIFACTS: [&str; 6] = [
    "metrics.csv",
    "config.json",
    "model.ckpt",
    "eval.json",
    "importance.json",
    "verify.json",
];

fn produce_artifacts(cfg: &Path, dir: &Path) -> Vec<Vec<u8>> {
    ok(&train(cfg, dir, &[]));
    let ckpt = dir.join("model.ckpt");
    let run_cfg = dir.join("config.json");
    for (cmd, name) in [("eval", "eval.json"), ("importance", "importance.json")] {
        ok(&boostformer(&[
            cmd,
            "--checkpoint",
            ckpt.to_str().unwrap(),
            "--config",
            run_cfg.to_str().unwrap(),
            "-o",
            dir.join(name).to_str().unwrap(),
        ]));
    }
    ok(&boostformer(&[
        "verify",
        "--instances",
        "5",
        "--draws",
        "4000",
        "-o",
        dir.join("verify.json").to_str().unwrap(),
    ]));
    ARTIFACTS.iter().map(|name| fs::read(dir.join(name)).unwrap()).collect()
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), &tiny_config("subseq-is-boost"));
    let dir = tmp.path().join("run");
    let first = produce_artifacts(&cfg, &dir);
    ARTIFACTS.iter().for_each(|name| fs::remove_file(dir.join(name)).unwrap());
    let second = produce_artifacts(&cfg, &dir);
    for ((name, a), b) in ARTIFACTS.iter().zip(&first).zip(&second) {
        assert!(a == b, "{name} differs between runs");
    }
    let metrics = String::from_utf8(first[0].clone()).unwrap();
    assert!(metrics.lines().skip(1).all(|l| l.ends_with(",0.0")));
}

#[test]
fn eval_reports_accuracy_and_confusion() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), &tiny_config("boost"));
    let out = tmp.path().join("run");
    ok(&train(&cfg, &out, &[]));
    let res = boostformer(&[
        "eval",
        "--checkpoint",
        out.join("model.ckpt").to_str().unwrap(),
        "--config",
        out.join("config.json").to_str().unwrap(),
    ]);
    ok(&res);
    let report: Value = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(report["samples"], 30);
    let acc = report["accuracy"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&acc));
    let total: u64 = report["confusion"]
        .as_array()
        .unwrap()
        .iter()
        .flat_map(|row| row.as_array().unwrap())
        .map(|c| c.as_u64().unwrap())
        .sum();
    assert_eq!(total, 30);
}

#[test]
fn importance_honours_top() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), &tiny_config("subseq-boost"));
    let out = tmp.path().join("run");
    ok(&train(&cfg, &out, &[]));
    let res = boostformer(&[
        "importance",
        "--checkpoint",
        out.join("model.ckpt").to_str().unwrap(),
        "--config",
        out.join("config.json").to_str().unwrap(),
        "--top",
        "5",
    ]);
    ok(&res);
    let report: Value = serde_json::from_slice(&res.stdout).unwrap();
    let tokens = report["tokens"].as_array().unwrap();
    assert_eq!(tokens.len(), 5);
    let scores: Vec<f64> = tokens.iter().map(|t| t["score"].as_f64().unwrap()).collect();
    assert!(scores.windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn output_dir_precedence() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), &tiny_config("boost"));
    let env_dir = tmp.path().join("from-env");
    let flag_dir = tmp.path().join("from-flag");
    let run = |extra: &[&str]| {
        let mut args = vec!["train", "--config", cfg.to_str().unwrap(), "--rounds", "1"];
        args.extend_from_slice(extra);
        Command::new(BIN)
            .args(&args)
            .env("BOOSTFORMER_OUTPUT_DIR", &env_dir)
            .output()
            .unwrap()
    };
    ok(&run(&[]));
    assert!(env_dir.join("metrics.csv").is_file());
    ok(&run(&["--output-dir", flag_dir.to_str().unwrap()]));
    assert!(flag_dir.join("metrics.csv").is_file());
}

#[test]
fn flags_override_config_file() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), &tiny_config("boost"));
    let out = tmp.path().join("run");
    ok(&train(&cfg, &out, &["--variant", "is-boost", "--rounds", "1", "--seed", "9"]));
    let saved: Value = serde_json::from_slice(&fs::read(out.join("config.json")).unwrap()).unwrap();
    assert_eq!(saved["variant"], "is-boost");
    assert_eq!(saved["seed"], 9);
    assert_eq!(saved["ensemble"]["rounds"], 1);
    assert_eq!(saved["wall_clock"], false);
    assert_eq!(metric_rows(&out.join("metrics.csv")).len(), 2);
}

#[test]
fn configuration_errors_exit_2() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), &tiny_config("boost"));
    let out = tmp.path().join("run");
    let res = train(&cfg, &out, &["--variant", "bogus"]);
    assert_eq!(res.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&res.stderr);
    assert!(stderr.contains("unknown variant"), "{stderr}");
    assert_eq!(stderr.matches("configuration error").count(), 1, "{stderr}");

    let res = train(&cfg, &out, &["--shrinkage", "0"]);
    assert_eq!(res.status.code(), Some(2));

    let mut no_seed = tiny_config("boost");
    no_seed.as_object_mut().unwrap().remove("seed");
    let cfg = write_config(tmp.path(), &no_seed);
    let res = train(&cfg, &out, &[]);
    assert_eq!(res.status.code(), Some(2));
    assert!(!out.join("metrics.csv").exists());
}

#[test]
fn verify_passes_and_detects_corruption() {
    let good = boostformer(&["verify", "--instances", "6", "--draws", "20000"]);
    ok(&good);
    let report: Value = serde_json::from_slice(&good.stdout).unwrap();
    assert_eq!(report["passed"], true);

    let bad = boostformer(&[
        "verify",
        "--instances",
        "6",
        "--draws",
        "20000",
        "--corrupt-closed-form",
    ]);
    assert_eq!(bad.status.code(), Some(4));
    let report: Value = serde_json::from_slice(&bad.stdout).unwrap();
    assert_eq!(report["passed"], false);
    let failed: Vec<&str> = report["identities"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|r| r["passed"] == false)
        .map(|r| r["name"].as_str().unwrap())
        .collect();
    assert_eq!(failed, ["closed_form_matches_monte_carlo"]);
}

fn write_metrics(path: &Path, rows: &[(&str, usize, f64, f64)]) {
    let mut text = String::from("variant,step,train_acc,test_acc,risk,elapsed_s\n");
    for (variant, step, test_acc, elapsed) in rows {
        text += &format!("{variant},{step},0.9,{test_acc},0.5,{elapsed}\n");
    }
    fs::write(path, text).unwrap();
}

#[test]
fn timing_table_collects_final_elapsed() {
    let tmp = TempDir::new().unwrap();
    let a = tmp.path().join("a.csv");
    let b = tmp.path().join("b.csv");
    write_metrics(&a, &[("boost", 1, 0.8, 3.0), ("boost", 2, 0.85, 7.31)]);
    write_metrics(&b, &[("vanilla", 1, 0.8, 1.0), ("vanilla", 2, 0.9, 2.0)]);
    let res = boostformer(&[
        "timing",
        "--metrics",
        &format!("syn={}", a.display()),
        &format!("syn={}", b.display()),
    ]);
    ok(&res);
    let text = String::from_utf8(res.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "dataset,vanilla,subseq-vanilla,boost,subseq-boost,is-boost,subseq-is-boost"
    );
    assert_eq!(lines[1], "syn,2.0,,7.3,,,");
}

#[test]
fn plot_data_relates_to_the_baseline() {
    let tmp = TempDir::new().unwrap();
    let base = tmp.path().join("vanilla.csv");
    let boost = tmp.path().join("boost.csv");
    write_metrics(
        &base,
        &(1..=10).map(|e| ("vanilla", e, 0.05 * e as f64, 0.0)).collect::<Vec<_>>(),
    );
    write_metrics(&boost, &[("boost", 1, 0.5, 0.0), ("boost", 2, 0.6, 0.0)]);
    let res = boostformer(&[
        "plot-data",
        "--baseline",
        base.to_str().unwrap(),
        "--metrics",
        boost.to_str().unwrap(),
    ]);
    ok(&res);
    let text = String::from_utf8(res.stdout).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2);
    let last = &rows[1];
    assert_eq!(last[col("epoch")], "10");
    let improvement: f64 = last[col("improvement")].parse().unwrap();
    assert!((improvement - 0.1).abs() < 1e-9, "{improvement}");

    let missing = boostformer(&[
        "plot-data",
        "--baseline",
        tmp.path().join("absent.csv").to_str().unwrap(),
        "--metrics",
        boost.to_str().unwrap(),
    ]);
    assert!(!missing.status.success());
}
