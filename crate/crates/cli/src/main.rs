mod args;
mod config;

use std::hash::{BuildHasher, Hasher};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use lmad::anomaly::{write_residual_csv, DEFAULT_QUORUM};
use lmad::bench::{run_scenario, summarize, write_bench_csv, Scenario};
use lmad::pipeline::{consensus_seeds, fit, run_consensus, ModelFile, Prepared};
use lmad::timeseries::{gen_engine_like, gen_sinc, load_series_csv, save_series_csv, EventSeries};
use thiserror::Error;

use args::{BenchArgs, Cli, Command, ConsensusArgs, DetectArgs, GenArgs, Preset, TrainArgs};
use config::{build_recipe, FileConfig};

const DEFAULT_CONSENSUS_RUNS: usize = 5;
const DEFAULT_BENCH_SEEDS: usize = 5;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] lmad::Error),
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 3 for numerical failures, 2 for bad input of any kind.
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_numerical() => 3,
            _ => 2,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

struct Context {
    seed: u64,
    out_dir: PathBuf,
    file: FileConfig,
}

impl Context {
    fn output(&self, name: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.out_dir).map_err(|e| CliError::io(&self.out_dir, e))?;
        Ok(self.out_dir.join(name))
    }
}

fn announce(path: &Path) {
    println!("wrote {}", path.display());
}

fn context_for(path: &Path, e: lmad::Error) -> CliError {
    match e {
        lmad::Error::Csv { row, message } => CliError::Core(lmad::Error::Csv {
            row,
            message: format!("{}: {message}", path.display()),
        }),
        other => CliError::Core(other),
    }
}

fn load_data(path: &Path) -> Result<EventSeries<f64>> {
    load_series_csv(path).map_err(|e| context_for(path, e))
}

fn cmd_gen(ctx: &Context, args: &GenArgs) -> Result<()> {
    let series = match args.preset {
        Preset::Engine => {
            let mut g = ctx.file.gen.clone().unwrap_or_default();
            g.seed = ctx.seed;
            if let Some(v) = args.n_events {
                g.n_events = v;
            }
            if let Some(v) = args.samples_per_event {
                g.samples_per_event = v;
            }
            if let Some(v) = &args.anomaly_events {
                g.anomaly_events = Some(v.clone());
            }
            if let Some(v) = args.anomaly_gain {
                g.anomaly_gain = v;
            }
            if let Some(v) = args.failure_spike {
                g.failure_spike = v;
            }
            if let Some(v) = args.jump_rate {
                g.jump_rate = v;
            }
            if let Some(v) = args.noise_level {
                g.noise_level = v;
            }
            if args.clean {
                g = g.clean();
            }
            gen_engine_like::<f64>(&g)?
        }
        Preset::Sinc => {
            let b = gen_sinc::<f64>(args.points, args.half_range)?;
            EventSeries::new(
                "sinc",
                b.inputs.column(0).to_vec(),
                b.targets.column(0).to_vec(),
                vec![args.points - 1],
            )?
        }
    };
    let default_name = match args.preset {
        Preset::Engine => "engine.csv",
        Preset::Sinc => "sinc.csv",
    };
    let path = ctx.output(args.output.as_deref().unwrap_or(default_name))?;
    save_series_csv(&series, &path)?;
    println!("{} samples, {} events", series.len(), series.n_events());
    announce(&path);
    Ok(())
}

fn cmd_train(ctx: &Context, args: &TrainArgs) -> Result<()> {
    let raw = load_data(&args.data)?;
    let recipe = build_recipe(&args.recipe, ctx.file.recipe.as_ref(), ctx.seed)?;
    let prepared = Prepared::new(&raw, recipe.n_train_events)?;
    let (net, report) = fit(&prepared, &recipe)?;
    println!(
        "{} {}: {} epochs, stop {}, best epoch {}, train {} {:.6e}, val {:.6e}",
        recipe.trainer.name(),
        net.spec().describe(),
        report.epochs_run(),
        report.stop_reason,
        report.best_epoch,
        report.monitor_loss,
        report.final_train_loss,
        report.best_val_loss
    );
    let model_path = ctx.output(&format!("{}.model.json", args.name))?;
    ModelFile::new(&recipe, &prepared, &net).save(&model_path)?;
    announce(&model_path);
    let report_path = ctx.output(&format!("{}.report.json", args.name))?;
    report.save(&report_path)?;
    announce(&report_path);
    Ok(())
}

fn cmd_detect(ctx: &Context, args: &DetectArgs) -> Result<()> {
    let model = ModelFile::load(&args.model)?;
    let raw = load_data(&args.data)?;
    let mut recipe = model.recipe.clone();
    if let Some(t) = args.threshold.or(ctx.file.detect.threshold) {
        recipe.ratio_threshold = t;
    }
    let net = model.network()?;
    let prepared = model.prepare(&raw)?;
    let (residuals, report) = prepared.score(&net, &recipe)?;
    println!(
        "train max |r| {:.6}, max test ratio {:.3}, flagged {:?}",
        report.train_max,
        report.max_test_ratio(),
        report.flagged_events
    );
    let report_path = ctx.output(&format!("{}.json", args.name))?;
    report.save(&report_path)?;
    announce(&report_path);
    let csv_path = ctx.output(&format!("{}.residuals.csv", args.name))?;
    let file = std::fs::File::create(&csv_path).map_err(|e| CliError::io(&csv_path, e))?;
    write_residual_csv(&residuals, std::io::BufWriter::new(file))?;
    announce(&csv_path);
    Ok(())
}

fn cmd_consensus(ctx: &Context, args: &ConsensusArgs) -> Result<()> {
    let raw = load_data(&args.data)?;
    let recipe = build_recipe(&args.recipe, ctx.file.recipe.as_ref(), ctx.seed)?;
    let runs = args.runs.or(ctx.file.consensus.runs).unwrap_or(DEFAULT_CONSENSUS_RUNS);
    let quorum = args.quorum.or(ctx.file.consensus.quorum).unwrap_or(DEFAULT_QUORUM);
    let seeds = consensus_seeds(ctx.seed, runs);
    let report = run_consensus(&raw, &recipe, &seeds, quorum)?;
    for (seed, run) in seeds.iter().zip(&report.runs) {
        println!("seed {seed}: flagged {:?}", run.flagged_events);
    }
    println!(
        "consensus {:?}, artefacts {:?} (need {} of {} votes)",
        report.consensus_events,
        report.artefact_events,
        report.required_votes,
        runs
    );
    let path = ctx.output(&format!("{}.json", args.name))?;
    report.save(&path)?;
    announce(&path);
    Ok(())
}

fn cmd_bench(ctx: &Context, args: &BenchArgs) -> Result<()> {
    let names = args
        .scenario
        .clone()
        .or_else(|| ctx.file.bench.scenarios.clone());
    let scenarios: Vec<Scenario> = match names {
        Some(names) => names.iter().map(|n| n.parse()).collect::<lmad::Result<_>>()?,
        None => Scenario::ALL.to_vec(),
    };
    let n_seeds = args.seeds.or(ctx.file.bench.seeds).unwrap_or(DEFAULT_BENCH_SEEDS);
    let seeds = consensus_seeds(ctx.seed, n_seeds);
    let mut rows = Vec::new();
    for &scenario in &scenarios {
        for &seed in &seeds {
            eprintln!("running {scenario} with seed {seed}");
            rows.extend(run_scenario(scenario, seed)?);
        }
    }
    let csv_path = ctx.output(&format!("{}.csv", args.name))?;
    let file = std::fs::File::create(&csv_path).map_err(|e| CliError::io(&csv_path, e))?;
    write_bench_csv(&rows, std::io::BufWriter::new(file))?;
    announce(&csv_path);

    let summary = summarize(&rows);
    println!(
        "{:<12} {:<6} {:<12} {:>4} {:>8} {:>12} {:>12} {:>10}",
        "scenario", "opt", "arch", "runs", "epochs", "train", "val", "max ratio"
    );
    for s in &summary {
        println!(
            "{:<12} {:<6} {:<12} {:>4} {:>8.1} {:>12.4e} {:>12.4e} {:>10}",
            s.scenario.to_string(),
            s.optimizer,
            s.architecture,
            s.runs,
            s.mean_epochs,
            s.mean_train_loss,
            s.mean_val_loss,
            s.mean_max_anomaly_ratio.map(|r| format!("{r:.2}")).unwrap_or_else(|| "-".into())
        );
    }
    let summary_path = ctx.output(&format!("{}.summary.json", args.name))?;
    let text = serde_json::to_string_pretty(&summary).map_err(lmad::Error::from)?;
    std::fs::write(&summary_path, text).map_err(|e| CliError::io(&summary_path, e))?;
    announce(&summary_path);
    Ok(())
}

fn draw_seed() -> u64 {
    let mut h = std::collections::hash_map::RandomState::new().build_hasher();
    h.write_u128(
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_nanos())
            .unwrap_or_default(),
    );
    // keep drawn seeds small enough to retype
    h.finish() % 1_000_000_000
}

fn execute(cli: Cli) -> Result<()> {
    let file = FileConfig::load(cli.config.as_deref())?;
    let seed = match cli.seed {
        Some(s) => s,
        None => {
            let s = draw_seed();
            eprintln!("no --seed given, using --seed {s}");
            s
        }
    };
    let ctx = Context {
        seed,
        out_dir: cli.out_dir,
        file,
    };
    match &cli.command {
        Command::Gen(a) => cmd_gen(&ctx, a),
        Command::Train(a) => cmd_train(&ctx, a),
        Command::Detect(a) => cmd_detect(&ctx, a),
        Command::Consensus(a) => cmd_consensus(&ctx, a),
        Command::Bench(a) => cmd_bench(&ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
