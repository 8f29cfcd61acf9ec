//! Built-in optimizer comparison scenarios.

use std::collections::BTreeSet;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::network::{Loss, Network, NetworkSpec};
use crate::optim::{train_grad, train_lm, GradConfig, LmConfig, Optimizer, TrainReport};
use crate::pipeline::{run, Recipe};
use crate::timeseries::{gen_engine_like, gen_sinc, GenConfig};
use crate::{Error, Result};

pub const SINC_POINTS: usize = 100;
pub const SINC_HALF_RANGE: f64 = 4.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Sinc,
    Engine,
    Autoencoder,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::Sinc, Scenario::Engine, Scenario::Autoencoder];
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::Sinc => "sinc",
            Scenario::Engine => "engine",
            Scenario::Autoencoder => "autoencoder",
        })
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sinc" | "a" => Ok(Scenario::Sinc),
            "engine" | "b" => Ok(Scenario::Engine),
            "autoencoder" | "c" => Ok(Scenario::Autoencoder),
            other => Err(Error::InvalidArgument(format!(
                "unknown scenario `{other}` (expected sinc, engine or autoencoder)"
            ))),
        }
    }
}

/// One row of the comparison table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub scenario: Scenario,
    pub seed: u64,
    pub optimizer: String,
    pub architecture: String,
    pub param_count: usize,
    pub epochs_run: usize,
    pub stop_reason: String,
    /// Loss the train/val columns are measured in.
    pub loss: Loss,
    pub train_loss: f64,
    pub val_loss: f64,
    pub wall_time: f64,
    pub train_max: Option<f64>,
    /// (event, ratio) for each injected anomaly event.
    pub anomaly_ratios: Vec<(usize, f64)>,
    pub flagged_events: BTreeSet<usize>,
}

pub const BENCH_CSV_HEADER: [&str; 14] = [
    "scenario",
    "seed",
    "optimizer",
    "architecture",
    "param_count",
    "epochs_run",
    "stop_reason",
    "loss",
    "train_loss",
    "val_loss",
    "wall_time",
    "train_max",
    "anomaly_ratios",
    "flagged_events",
];

impl BenchResult {
    fn from_report<T: crate::Scalar>(
        scenario: Scenario,
        seed: u64,
        optimizer: String,
        spec: &NetworkSpec,
        report: &TrainReport<T>,
    ) -> Self {
        Self {
            scenario,
            seed,
            optimizer,
            architecture: spec.describe(),
            param_count: spec.param_count(),
            epochs_run: report.epochs_run(),
            stop_reason: report.stop_reason.to_string(),
            loss: report.monitor_loss,
            train_loss: report.final_train_loss,
            val_loss: report.best_val_loss,
            wall_time: report.wall_time,
            train_max: None,
            anomaly_ratios: Vec::new(),
            flagged_events: BTreeSet::new(),
        }
    }

    pub fn max_anomaly_ratio(&self) -> Option<f64> {
        self.anomaly_ratios.iter().map(|r| r.1).reduce(f64::max)
    }

    fn csv_fields(&self) -> Vec<String> {
        let join = |it: Vec<String>| it.join(";");
        vec![
            self.scenario.to_string(),
            self.seed.to_string(),
            self.optimizer.clone(),
            self.architecture.clone(),
            self.param_count.to_string(),
            self.epochs_run.to_string(),
            self.stop_reason.clone(),
            self.loss.to_string(),
            self.train_loss.to_string(),
            self.val_loss.to_string(),
            format!("{:.3}", self.wall_time),
            self.train_max.map(|v| v.to_string()).unwrap_or_default(),
            join(self.anomaly_ratios.iter().map(|(e, r)| format!("{e}:{r}")).collect()),
            join(self.flagged_events.iter().map(|e| e.to_string()).collect()),
        ]
    }
}

pub fn write_bench_csv<W: Write>(rows: &[BenchResult], writer: W) -> Result<()> {
    let csv_err = |e: csv::Error| Error::Csv { row: 0, message: e.to_string() };
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(BENCH_CSV_HEADER).map_err(csv_err)?;
    for row in rows {
        wtr.write_record(row.csv_fields()).map_err(csv_err)?;
    }
    wtr.flush().map_err(|e| Error::Csv { row: 0, message: e.to_string() })
}

/// The sinc fit: dense(20), 100 epochs over the whole budget, LM vs ADAM.
pub fn sinc_configs(seed: u64) -> (LmConfig, GradConfig) {
    let lm = LmConfig {
        max_epochs: 100,
        patience: 0,
        seed,
        ..LmConfig::default()
    };
    let mut adam = GradConfig::new(Optimizer::Adam);
    adam.max_epochs = 100;
    adam.patience = 0;
    adam.batch_size = Some(32);
    adam.seed = seed;
    (lm, adam)
}

pub fn run_sinc(seed: u64) -> Result<Vec<BenchResult>> {
    let batch = gen_sinc::<f64>(SINC_POINTS, SINC_HALF_RANGE)?;
    let spec = NetworkSpec::regressor(1, &[20], 1);
    let (lm, adam) = sinc_configs(seed);

    let mut net = Network::build(spec.clone(), seed)?;
    let lm_report = train_lm(&mut net, &batch, &lm)?;
    let mut net = Network::build(spec.clone(), seed)?;
    let adam_report = train_grad(&mut net, &batch, &adam)?;
    Ok(vec![
        BenchResult::from_report(Scenario::Sinc, seed, "lm".into(), &spec, &lm_report),
        BenchResult::from_report(Scenario::Sinc, seed, "adam".into(), &spec, &adam_report),
    ])
}

/// Recipes compared on generated engine-like data.
pub fn engine_recipes() -> Vec<Recipe> {
    vec![Recipe::lm_dense40(), Recipe::rprop_deep(), Recipe::adam_dense40()]
}

/// Autoencoders: LM (10, 50) against ADAM (10, 50) and ADAM (512, 500).
pub fn autoencoder_recipes() -> Vec<Recipe> {
    vec![
        Recipe::autoencoder_lm(10, 50),
        Recipe::autoencoder_adam(10, 50),
        Recipe::autoencoder_adam(512, 500),
    ]
}

fn run_recipes(scenario: Scenario, seed: u64, recipes: Vec<Recipe>) -> Result<Vec<BenchResult>> {
    let gen = GenConfig { seed, ..GenConfig::default() };
    let raw = gen_engine_like::<f64>(&gen)?;
    let anomalies = gen.anomaly_set();
    recipes
        .into_iter()
        .map(|recipe| {
            let recipe = recipe.with_seed(seed);
            let out = run(&raw, &recipe)?;
            let mut row = BenchResult::from_report(
                scenario,
                seed,
                recipe.trainer.name(),
                out.net.spec(),
                &out.train,
            );
            row.train_max = Some(out.anomaly.train_max);
            row.anomaly_ratios = anomalies
                .iter()
                .filter_map(|&e| out.anomaly.ratio_of(e).map(|r| (e, r)))
                .collect();
            row.flagged_events = out.anomaly.flagged_events;
            Ok(row)
        })
        .collect()
}

pub fn run_scenario(scenario: Scenario, seed: u64) -> Result<Vec<BenchResult>> {
    match scenario {
        Scenario::Sinc => run_sinc(seed),
        Scenario::Engine => run_recipes(scenario, seed, engine_recipes()),
        Scenario::Autoencoder => run_recipes(scenario, seed, autoencoder_recipes()),
    }
}

/// Mean figures per (scenario, optimizer, architecture) over seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    pub scenario: Scenario,
    pub optimizer: String,
    pub architecture: String,
    pub runs: usize,
    pub mean_train_loss: f64,
    pub mean_val_loss: f64,
    pub mean_epochs: f64,
    pub mean_max_anomaly_ratio: Option<f64>,
}

pub fn summarize(rows: &[BenchResult]) -> Vec<BenchSummary> {
    let mut keys: Vec<(Scenario, String, String)> = Vec::new();
    for r in rows {
        let key = (r.scenario, r.optimizer.clone(), r.architecture.clone());
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(scenario, optimizer, architecture)| {
            let group: Vec<&BenchResult> = rows
                .iter()
                .filter(|r| r.scenario == scenario && r.optimizer == optimizer && r.architecture == architecture)
                .collect();
            let n = group.len() as f64;
            let mean = |f: &dyn Fn(&BenchResult) -> f64| group.iter().map(|r| f(r)).sum::<f64>() / n;
            let ratios: Vec<f64> = group.iter().filter_map(|r| r.max_anomaly_ratio()).collect();
            BenchSummary {
                scenario,
                optimizer,
                architecture,
                runs: group.len(),
                mean_train_loss: mean(&|r| r.train_loss),
                mean_val_loss: mean(&|r| r.val_loss),
                mean_epochs: mean(&|r| r.epochs_run as f64),
                mean_max_anomaly_ratio: (!ratios.is_empty())
                    .then(|| ratios.iter().sum::<f64>() / ratios.len() as f64),
            }
        })
        .collect()
}
