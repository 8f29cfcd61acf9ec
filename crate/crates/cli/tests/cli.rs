use std::path::Path;
use std::process::{Command, Output};

use lmad::anomaly::{AnomalyReport, ConsensusReport};
use lmad::bench::BENCH_CSV_HEADER;
use lmad::optim::TrainReport;
use lmad::pipeline::ModelFile;
use tempfile::TempDir;

fn lmad(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lmad"))
        .arg("--out-dir")
        .arg(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = lmad(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

/// 6 events of 40 samples, anomalies in the last two.
fn small_data(dir: &Path, name: &str) {
    ok(
        dir,
        &["--seed", "3", "gen", "--n-events", "6", "--samples-per-event", "40", "--output", name],
    );
}

const QUICK: &[&str] = &["--train-events", "3", "--epochs", "5"];

#[test]
fn gen_engine_defaults() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["--seed", "7", "gen", "--preset", "engine"]);
    let text = read(dir.path(), "engine.csv");
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "index,input,output,event_end");
    assert_eq!(rows.len(), 6401);
    assert_eq!(rows[1..].iter().filter(|r| r.ends_with(",1")).count(), 32);
}

#[test]
fn gen_is_byte_identical_for_a_seed() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["--seed", "11", "gen", "--output", "a.csv"]);
    ok(dir.path(), &["--seed", "11", "gen", "--output", "b.csv"]);
    ok(dir.path(), &["--seed", "12", "gen", "--output", "c.csv"]);
    assert_eq!(read(dir.path(), "a.csv"), read(dir.path(), "b.csv"));
    assert_ne!(read(dir.path(), "a.csv"), read(dir.path(), "c.csv"));
}

#[test]
fn gen_sinc() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["--seed", "1", "gen", "--preset", "sinc"]);
    let text = read(dir.path(), "sinc.csv");
    assert_eq!(text.lines().count(), 101);
    assert!(text.lines().last().unwrap().ends_with(",1"));
}

#[test]
fn missing_seed_is_drawn_and_printed() {
    let dir = TempDir::new().unwrap();
    let out = lmad(dir.path(), &["gen", "--preset", "sinc"]);
    assert!(out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("using --seed "), "{err}");
}

#[test]
fn train_then_detect() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    small_data(d, "data.csv");
    let data = d.join("data.csv");
    let data = data.to_str().unwrap();
    let mut args = vec!["--seed", "5", "train", "--data", data, "--hidden", "8"];
    args.extend_from_slice(QUICK);
    ok(d, &args);

    let model = ModelFile::load(d.join("model.model.json")).unwrap();
    assert_eq!(model.recipe.seed, 5);
    assert_eq!(model.n_train_events, 3);
    assert_eq!(model.network.param_count, 8 + 8 + 8 + 1);
    let report = TrainReport::<f64>::load(d.join("model.report.json")).unwrap();
    assert_eq!(report.epochs_run(), 5);

    let model_path = d.join("model.model.json");
    let model_path = model_path.to_str().unwrap();
    ok(d, &["--seed", "5", "detect", "--model", model_path, "--data", data]);
    let report = AnomalyReport::load(d.join("anomaly.json")).unwrap();
    assert_eq!(report.per_event.len(), 6);
    assert!(report.flagged_events.iter().all(|&e| e >= 3));
    assert!(report.model_fingerprint.starts_with("seed:5/"));
    let residuals = read(d, "anomaly.residuals.csv");
    assert_eq!(residuals.lines().next(), Some("index,residual,event,region"));
    assert_eq!(residuals.lines().count(), 240 + 1);

    ok(
        d,
        &["detect", "--seed", "5", "--model", model_path, "--data", data, "--threshold", "1e9", "--name", "never"],
    );
    let report = AnomalyReport::load(d.join("never.json")).unwrap();
    assert!(report.flagged_events.is_empty());
}

#[test]
fn train_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    small_data(d, "data.csv");
    let data = d.join("data.csv");
    let data = data.to_str().unwrap();
    for name in ["a", "b"] {
        let mut args = vec!["--seed", "2", "train", "--data", data, "--hidden", "6", "--name", name];
        args.extend_from_slice(QUICK);
        ok(d, &args);
    }
    assert_eq!(read(d, "a.model.json"), read(d, "b.model.json"));
    let a = TrainReport::<f64>::load(d.join("a.report.json")).unwrap();
    let b = TrainReport::<f64>::load(d.join("b.report.json")).unwrap();
    assert!(a.same_run(&b));
}

#[test]
fn autoencoder_train_and_detect() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    small_data(d, "data.csv");
    let data = d.join("data.csv");
    let data = data.to_str().unwrap();
    let mut args = vec![
        "--seed", "1", "train", "--data", data, "--mode", "autoencoder", "--hidden", "3", "--window", "8",
        "--stride", "4",
    ];
    args.extend_from_slice(QUICK);
    ok(d, &args);
    let model = d.join("model.model.json");
    ok(d, &["--seed", "1", "detect", "--model", model.to_str().unwrap(), "--data", data]);
    assert_eq!(read(d, "anomaly.residuals.csv").lines().count(), 241);
}

#[test]
fn consensus_runs() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    small_data(d, "data.csv");
    let data = d.join("data.csv");
    let data = data.to_str().unwrap();
    let mut args = vec!["--seed", "4", "consensus", "--data", data, "--runs", "2", "--quorum", "1.0", "--hidden", "6"];
    args.extend_from_slice(QUICK);
    ok(d, &args);
    let report: ConsensusReport =
        ConsensusReport::from_json(&read(d, "consensus.json")).unwrap();
    assert_eq!(report.runs.len(), 2);
    for run in &report.runs {
        assert!(report.consensus_events.is_subset(&run.flagged_events));
    }
    assert_eq!(report.runs[0].model_fingerprint.split('/').next(), Some("seed:4"));
    assert_eq!(report.runs[1].model_fingerprint.split('/').next(), Some("seed:5"));

    let mut args = vec!["--seed", "4", "consensus", "--data", data, "--runs", "1"];
    args.extend_from_slice(QUICK);
    assert_eq!(code(&lmad(d, &args)), 2);
}

#[test]
fn bench_sinc_csv() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let stdout = ok(d, &["--seed", "0", "bench", "--scenario", "sinc", "--seeds", "2"]);
    let text = read(d, "bench.csv");
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], BENCH_CSV_HEADER.join(","));
    assert_eq!(lines.len(), 1 + 2 * 2);
    assert!(lines[1].starts_with("sinc,0,lm,1-20-1,61,100,"));
    assert!(lines[4].starts_with("sinc,1,adam,"));
    assert!(stdout.contains("scenario"));
    assert!(d.join("bench.summary.json").exists());
}

#[test]
fn config_file_supplies_defaults() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let cfg = d.join("run.toml");
    std::fs::write(&cfg, "[gen]\nn_events = 4\nsamples_per_event = 30\n").unwrap();
    ok(d, &["--seed", "1", "--config", cfg.to_str().unwrap(), "gen"]);
    assert_eq!(read(d, "engine.csv").lines().count(), 121);

    std::fs::write(&cfg, "[gen]\nn_events = 4\nbogus = 1\n").unwrap();
    assert_eq!(code(&lmad(d, &["--seed", "1", "--config", cfg.to_str().unwrap(), "gen"])), 2);
}

#[test]
fn input_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let bad = d.join("bad.csv");
    std::fs::write(&bad, "index,input,output,event_end\n0,1,2,0\n1,x,2,1\n").unwrap();
    let out = lmad(d, &["--seed", "1", "train", "--data", bad.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("row 2") && err.contains("bad.csv"), "{err}");

    let out = lmad(d, &["--seed", "1", "train", "--data", d.join("absent.csv").to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert_eq!(code(&lmad(d, &["--seed", "1", "bench", "--scenario", "lstm"])), 2);
    assert_eq!(code(&lmad(d, &["--seed", "1", "gen", "--n-events", "2"])), 2);
    assert_eq!(code(&lmad(d, &["--seed", "1", "frobnicate"])), 2);
}

#[test]
fn divergence_exits_3() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    small_data(d, "data.csv");
    let data = d.join("data.csv");
    let out = lmad(
        d,
        &[
            "--seed", "1", "train", "--data", data.to_str().unwrap(), "--optimizer", "sgdm", "--learning-rate",
            "1e200", "--train-events", "3", "--epochs", "20",
        ],
    );
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}
