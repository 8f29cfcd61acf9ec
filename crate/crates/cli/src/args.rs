use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "lmad", version, about = "Levenberg-Marquardt training and residual anomaly detection")]
pub struct Cli {
    /// Seed for every random choice. Drawn and printed when omitted.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Directory for all output files.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,

    /// TOML file with [gen], [recipe], [detect], [consensus] or [bench]
    /// tables. Command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic series as CSV.
    Gen(GenArgs),
    /// Train a model on a series and save it with its training report.
    Train(TrainArgs),
    /// Score a series with a saved model.
    Detect(DetectArgs),
    /// Train several seeded models and vote on the flagged events.
    Consensus(ConsensusArgs),
    /// Run the optimizer comparison scenarios.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Engine,
    Sinc,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, value_enum, default_value = "engine")]
    pub preset: Preset,
    /// Output file name inside the output directory.
    #[arg(long)]
    pub output: Option<String>,
    #[arg(long)]
    pub n_events: Option<usize>,
    #[arg(long)]
    pub samples_per_event: Option<usize>,
    /// Comma-separated event indices.
    #[arg(long, value_delimiter = ',')]
    pub anomaly_events: Option<Vec<usize>>,
    #[arg(long)]
    pub anomaly_gain: Option<f64>,
    #[arg(long)]
    pub failure_spike: Option<f64>,
    #[arg(long)]
    pub jump_rate: Option<usize>,
    #[arg(long)]
    pub noise_level: Option<f64>,
    /// Neutralize the anomalies and the failure spike.
    #[arg(long)]
    pub clean: bool,
    /// Number of points for the sinc preset.
    #[arg(long, default_value_t = 100)]
    pub points: usize,
    #[arg(long, default_value_t = 4.0)]
    pub half_range: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OptimizerArg {
    Lm,
    Adam,
    Sgdm,
    Rprop,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Regressor,
    Autoencoder,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum LossArg {
    Mse,
    Mae,
}

#[derive(Debug, Clone, Args)]
pub struct RecipeArgs {
    #[arg(long, value_enum)]
    pub optimizer: Option<OptimizerArg>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Hidden layer sizes, comma-separated.
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Epochs without validation improvement before stopping; 0 disables.
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub val_fraction: Option<f64>,
    /// Keep one train/validation split for the whole run.
    #[arg(long)]
    pub fixed_split: bool,
    /// Leading events used for training and normalization.
    #[arg(long)]
    pub train_events: Option<usize>,
    /// Training loss for gradient optimizers, reported loss for LM.
    #[arg(long, value_enum)]
    pub loss: Option<LossArg>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lambda0: Option<f64>,
    /// Autoencoder window width.
    #[arg(long)]
    pub window: Option<usize>,
    /// Autoencoder window stride.
    #[arg(long)]
    pub stride: Option<usize>,
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Series CSV (`index,input,output,event_end`).
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub recipe: RecipeArgs,
    /// Base name for `<name>.model.json` and `<name>.report.json`.
    #[arg(long, default_value = "model")]
    pub name: String,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Ratio threshold; defaults to the one stored with the model.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Base name for `<name>.json` and `<name>.residuals.csv`.
    #[arg(long, default_value = "anomaly")]
    pub name: String,
}

#[derive(Debug, Args)]
pub struct ConsensusArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Number of independently seeded runs.
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long)]
    pub quorum: Option<f64>,
    #[command(flatten)]
    pub recipe: RecipeArgs,
    #[arg(long, default_value = "consensus")]
    pub name: String,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Scenarios to run (sinc, engine, autoencoder); all by default.
    #[arg(long, value_delimiter = ',')]
    pub scenario: Option<Vec<String>>,
    /// Seeds per scenario, counting up from `--seed`.
    #[arg(long)]
    pub seeds: Option<usize>,
    #[arg(long, default_value = "bench")]
    pub name: String,
}
