use std::path::Path;

use lmad::network::{Loss, Mode};
use lmad::optim::{GradConfig, Optimizer};
use lmad::pipeline::{Recipe, TrainerConfig};
use lmad::timeseries::{GenConfig, WindowConfig};
use serde::Deserialize;

use crate::args::{LossArg, ModeArg, OptimizerArg, RecipeArgs};
use crate::CliError;

/// Contents of a `--config` file. Every table is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub gen: Option<GenConfig>,
    pub recipe: Option<Recipe>,
    #[serde(default)]
    pub detect: DetectSection,
    #[serde(default)]
    pub consensus: ConsensusSection,
    #[serde(default)]
    pub bench: BenchSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectSection {
    pub threshold: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConsensusSection {
    pub runs: Option<usize>,
    pub quorum: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSection {
    pub scenarios: Option<Vec<String>>,
    pub seeds: Option<usize>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

fn mode_of(arg: ModeArg) -> Mode {
    match arg {
        ModeArg::Regressor => Mode::Regressor,
        ModeArg::Autoencoder => Mode::Autoencoder,
    }
}

fn grad(optimizer: Optimizer, mode: Mode) -> TrainerConfig {
    let mut g = GradConfig::new(optimizer);
    match mode {
        Mode::Regressor => {
            g.max_epochs = 300;
            g.patience = 3;
        }
        Mode::Autoencoder => {
            g.loss = Loss::Mae;
            g.max_epochs = 50;
            g.patience = 0;
        }
    }
    TrainerConfig::Grad(g)
}

/// Built-in recipe for a mode/optimizer pair.
pub fn preset(mode: Mode, optimizer: OptimizerArg) -> Recipe {
    match (mode, optimizer) {
        (Mode::Regressor, OptimizerArg::Lm) => Recipe::lm_dense40(),
        (Mode::Regressor, OptimizerArg::Rprop) => Recipe::rprop_deep(),
        (Mode::Regressor, OptimizerArg::Adam) => Recipe::adam_dense40(),
        (Mode::Regressor, OptimizerArg::Sgdm) => Recipe::regressor(&[40], grad(Optimizer::Sgdm, mode)),
        (Mode::Autoencoder, OptimizerArg::Lm) => Recipe::autoencoder_lm(10, 50),
        (Mode::Autoencoder, OptimizerArg::Adam) => Recipe::autoencoder_adam(10, 50),
        (Mode::Autoencoder, OptimizerArg::Sgdm) => Recipe::autoencoder(&[10], grad(Optimizer::Sgdm, mode)),
        (Mode::Autoencoder, OptimizerArg::Rprop) => Recipe::autoencoder(&[10], grad(Optimizer::Rprop, mode)),
    }
}

fn optimizer_name(arg: OptimizerArg) -> &'static str {
    match arg {
        OptimizerArg::Lm => "lm",
        OptimizerArg::Adam => "adam",
        OptimizerArg::Sgdm => "sgdm",
        OptimizerArg::Rprop => "rprop",
    }
}

/// Resolves the recipe: flags over the config file over the presets.
pub fn build_recipe(args: &RecipeArgs, file: Option<&Recipe>, seed: u64) -> Result<Recipe, CliError> {
    let mut recipe = match file {
        None => preset(
            args.mode.map(mode_of).unwrap_or(Mode::Regressor),
            args.optimizer.unwrap_or(OptimizerArg::Lm),
        ),
        Some(base) => {
            let mut r = base.clone();
            if let Some(m) = args.mode {
                r.mode = mode_of(m);
            }
            if let Some(opt) = args.optimizer {
                if r.trainer.name() != optimizer_name(opt) {
                    r.trainer = preset(r.mode, opt).trainer;
                }
            }
            r
        }
    };
    if let Some(h) = &args.hidden {
        recipe.hidden_layers = h.clone();
    }
    if let Some(n) = args.train_events {
        recipe.n_train_events = n;
    }
    if let Some(t) = args.threshold {
        recipe.ratio_threshold = t;
    }
    if args.window.is_some() || args.stride.is_some() {
        recipe.window = WindowConfig {
            width: args.window.unwrap_or(recipe.window.width),
            stride: args.stride.unwrap_or(recipe.window.stride),
            ..recipe.window
        };
    }
    let loss = args.loss.map(|l| match l {
        LossArg::Mse => Loss::Mse,
        LossArg::Mae => Loss::Mae,
    });
    match &mut recipe.trainer {
        TrainerConfig::Lm(c) => {
            if args.learning_rate.is_some() || args.batch_size.is_some() {
                return Err(CliError::Config(
                    "--learning-rate and --batch-size do not apply to lm".into(),
                ));
            }
            if let Some(v) = args.epochs {
                c.max_epochs = v;
            }
            if let Some(v) = args.patience {
                c.patience = v;
            }
            if let Some(v) = args.val_fraction {
                c.val_fraction = v;
            }
            if let Some(v) = args.lambda0 {
                c.lambda0 = v;
            }
            if let Some(l) = loss {
                c.monitor = l;
            }
            if args.fixed_split {
                c.resplit_each_epoch = false;
            }
        }
        TrainerConfig::Grad(c) => {
            if args.lambda0.is_some() {
                return Err(CliError::Config("--lambda0 only applies to lm".into()));
            }
            if let Some(v) = args.epochs {
                c.max_epochs = v;
            }
            if let Some(v) = args.patience {
                c.patience = v;
            }
            if let Some(v) = args.val_fraction {
                c.val_fraction = v;
            }
            if let Some(v) = args.learning_rate {
                c.learning_rate = v;
            }
            if let Some(v) = args.batch_size {
                c.batch_size = Some(v);
            }
            if let Some(l) = loss {
                c.loss = l;
            }
            if args.fixed_split {
                c.resplit_each_epoch = false;
            }
        }
    }
    let recipe = recipe.with_seed(seed);
    recipe.validate()?;
    Ok(recipe)
}
