//! End-to-end runs: normalize on the training events, train, score residuals.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::anomaly::{
    autoencoder_residual_series, consensus, detect, residual_series, AnomalyReport, ConsensusReport,
    ResidualSeries, DEFAULT_RATIO_THRESHOLD,
};
use crate::network::{Batch, Loss, Mode, Network, NetworkDoc, NetworkSpec};
use crate::optim::{train_grad, train_lm, GradConfig, LmConfig, Optimizer, TrainReport};
use crate::timeseries::{EventSeries, NormParams, WindowConfig};
use crate::{Error, Result, Scalar};

pub const DEFAULT_TRAIN_EVENTS: usize = 15;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TrainerConfig {
    Lm(LmConfig),
    Grad(GradConfig),
}

impl TrainerConfig {
    pub fn name(&self) -> String {
        match self {
            TrainerConfig::Lm(_) => "lm".into(),
            TrainerConfig::Grad(g) => g.optimizer.to_string(),
        }
    }

    pub fn max_epochs(&self) -> usize {
        match self {
            TrainerConfig::Lm(c) => c.max_epochs,
            TrainerConfig::Grad(c) => c.max_epochs,
        }
    }

    fn set_seed(&mut self, seed: u64) {
        match self {
            TrainerConfig::Lm(c) => c.seed = seed,
            TrainerConfig::Grad(c) => c.seed = seed,
        }
    }

    pub fn train<T: Scalar>(&self, net: &mut Network<T>, batch: &Batch<T>) -> Result<TrainReport<T>> {
        match self {
            TrainerConfig::Lm(c) => train_lm(net, batch, c),
            TrainerConfig::Grad(c) => train_grad(net, batch, c),
        }
    }
}

/// Everything needed to turn a raw series into an anomaly report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Recipe {
    pub mode: Mode,
    pub hidden_layers: Vec<usize>,
    pub n_train_events: usize,
    /// Only used in autoencoder mode.
    pub window: WindowConfig,
    pub trainer: TrainerConfig,
    pub ratio_threshold: f64,
    /// Seeds both the weight initialization and the trainer's splits.
    pub seed: u64,
}

impl Default for Recipe {
    fn default() -> Self {
        Self::lm_dense40()
    }
}

impl Recipe {
    pub fn regressor(hidden_layers: &[usize], trainer: TrainerConfig) -> Self {
        Self {
            mode: Mode::Regressor,
            hidden_layers: hidden_layers.to_vec(),
            n_train_events: DEFAULT_TRAIN_EVENTS,
            window: WindowConfig::default(),
            trainer,
            ratio_threshold: DEFAULT_RATIO_THRESHOLD,
            seed: 0,
        }
    }

    pub fn autoencoder(hidden_layers: &[usize], trainer: TrainerConfig) -> Self {
        Self {
            mode: Mode::Autoencoder,
            ..Self::regressor(hidden_layers, trainer)
        }
    }

    /// dense(40), LM, 300 epochs, patience 3.
    pub fn lm_dense40() -> Self {
        Self::regressor(&[40], TrainerConfig::Lm(LmConfig::default()))
    }

    /// dense(100, 50, 25), Rprop, 1000 epochs, patience 10.
    pub fn rprop_deep() -> Self {
        Self::regressor(&[100, 50, 25], TrainerConfig::Grad(GradConfig::new(Optimizer::Rprop)))
    }

    /// dense(40), ADAM on minibatches of 32, 300 epochs, patience 3.
    pub fn adam_dense40() -> Self {
        let mut g = GradConfig::new(Optimizer::Adam);
        g.batch_size = Some(32);
        g.max_epochs = 300;
        g.patience = 3;
        Self::regressor(&[40], TrainerConfig::Grad(g))
    }

    /// Autoencoder over output windows trained with LM on squared error and
    /// monitored in MAE. Runs the whole epoch budget.
    pub fn autoencoder_lm(hidden: usize, epochs: usize) -> Self {
        let c = LmConfig {
            max_epochs: epochs,
            patience: 0,
            monitor: Loss::Mae,
            ..LmConfig::default()
        };
        Self::autoencoder(&[hidden], TrainerConfig::Lm(c))
    }

    /// Autoencoder over output windows trained with ADAM on MAE, minibatches
    /// of 32, whole epoch budget.
    pub fn autoencoder_adam(hidden: usize, epochs: usize) -> Self {
        let mut g = GradConfig::new(Optimizer::Adam);
        g.loss = Loss::Mae;
        g.batch_size = Some(32);
        g.max_epochs = epochs;
        g.patience = 0;
        Self::autoencoder(&[hidden], TrainerConfig::Grad(g))
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.trainer.set_seed(seed);
        self
    }

    pub fn spec(&self) -> NetworkSpec {
        match self.mode {
            Mode::Regressor => NetworkSpec::regressor(1, &self.hidden_layers, 1),
            Mode::Autoencoder => NetworkSpec::autoencoder(self.window.width, &self.hidden_layers),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.spec().validate()?;
        if self.n_train_events == 0 {
            return Err(Error::InvalidConfig("n_train_events must be at least 1".into()));
        }
        if !(self.ratio_threshold > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "ratio_threshold must be positive, got {}",
                self.ratio_threshold
            )));
        }
        Ok(())
    }

    /// `seed:<seed>/cfg:<hash>`, where the hash covers every setting except
    /// the seed, so runs of one configuration share the second half.
    pub fn fingerprint(&self) -> String {
        let unseeded = self.clone().with_seed(0);
        let json = serde_json::to_vec(&unseeded).expect("recipe serializes");
        let digest = Sha256::digest(&json);
        format!("seed:{}/cfg:{}", self.seed, &hex::encode(digest)[..16])
    }
}

/// A series normalized on its training events.
#[derive(Clone, Debug, PartialEq)]
pub struct Prepared<T: Scalar> {
    pub norm: NormParams,
    pub series: EventSeries<T>,
    pub n_train_events: usize,
    /// Number of leading samples belonging to the training events.
    pub train_boundary: usize,
}

impl<T: Scalar> Prepared<T> {
    pub fn new(raw: &EventSeries<T>, n_train_events: usize) -> Result<Self> {
        if n_train_events == 0 || n_train_events >= raw.n_events() {
            return Err(Error::InvalidArgument(format!(
                "need 1 <= n_train_events < {}, got {n_train_events}",
                raw.n_events()
            )));
        }
        let norm = NormParams::fit_on_events(raw, n_train_events)?;
        Ok(Self::with_norm(raw, norm, n_train_events))
    }

    /// Applies an existing normalizer, e.g. one stored with a model.
    pub fn with_norm(raw: &EventSeries<T>, norm: NormParams, n_train_events: usize) -> Self {
        Self {
            norm,
            series: norm.apply(raw),
            n_train_events,
            train_boundary: raw.samples_in_first(n_train_events),
        }
    }

    /// Training samples for `recipe`: (input, output) pairs for a regressor,
    /// output windows for an autoencoder.
    pub fn training_batch(&self, recipe: &Recipe) -> Result<Batch<T>> {
        let b = self.train_boundary;
        match recipe.mode {
            Mode::Regressor => {
                Batch::from_columns(&self.series.input()[..b], &self.series.output()[..b])
            }
            Mode::Autoencoder => {
                let (w, _) = recipe.window.apply(&self.series.output()[..b])?;
                Batch::new(w.clone(), w)
            }
        }
    }

    pub fn residuals(&self, net: &Network<T>, recipe: &Recipe) -> Result<ResidualSeries<T>> {
        match recipe.mode {
            Mode::Regressor => residual_series(net, &self.series, self.train_boundary),
            Mode::Autoencoder => {
                if net.spec().input_dim != recipe.window.width {
                    return Err(Error::DimensionMismatch {
                        expected: recipe.window.width,
                        got: net.spec().input_dim,
                        context: "autoencoder width vs window width",
                    });
                }
                autoencoder_residual_series(net, &self.series, recipe.window.stride, self.train_boundary)
            }
        }
    }

    /// Residuals and the anomaly report for a trained network.
    pub fn score(&self, net: &Network<T>, recipe: &Recipe) -> Result<(ResidualSeries<T>, AnomalyReport)> {
        let residuals = self.residuals(net, recipe)?;
        let report = detect(&residuals, recipe.ratio_threshold)?
            .with_fingerprint(recipe.fingerprint())
            .with_raw_scale(self.norm.output.scale());
        Ok((residuals, report))
    }
}

pub const MODEL_FORMAT: &str = "lmad-model";
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// A trained network together with what is needed to score new data the
/// same way: the recipe, the normalizer and the train/test event split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub recipe: Recipe,
    pub norm: NormParams,
    pub n_train_events: usize,
    pub network: NetworkDoc<f64>,
}

impl ModelFile {
    pub fn new(recipe: &Recipe, prepared: &Prepared<f64>, net: &Network<f64>) -> Self {
        Self {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_FORMAT_VERSION,
            recipe: recipe.clone(),
            norm: prepared.norm,
            n_train_events: prepared.n_train_events,
            network: NetworkDoc::from(net),
        }
    }

    pub fn network(&self) -> Result<Network<f64>> {
        self.network.clone().into_network()
    }

    /// Normalizes `raw` with the stored normalizer.
    pub fn prepare(&self, raw: &EventSeries<f64>) -> Result<Prepared<f64>> {
        if self.n_train_events >= raw.n_events() {
            return Err(Error::InvalidArgument(format!(
                "model was trained on {} events but the data has only {}",
                self.n_train_events,
                raw.n_events()
            )));
        }
        Ok(Prepared::with_norm(raw, self.norm, self.n_train_events))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Self = serde_json::from_str(text)?;
        if doc.format != MODEL_FORMAT || doc.version != MODEL_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "expected {MODEL_FORMAT} v{MODEL_FORMAT_VERSION}, found {} v{}",
                doc.format, doc.version
            )));
        }
        Ok(doc)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[derive(Clone, Debug)]
pub struct RunOutcome<T: Scalar> {
    pub prepared: Prepared<T>,
    pub net: Network<T>,
    pub train: TrainReport<T>,
    pub residuals: ResidualSeries<T>,
    pub anomaly: AnomalyReport,
}

/// Builds and trains a fresh network on the prepared training events.
pub fn fit<T: Scalar>(prepared: &Prepared<T>, recipe: &Recipe) -> Result<(Network<T>, TrainReport<T>)> {
    recipe.validate()?;
    let batch = prepared.training_batch(recipe)?;
    let mut net = Network::build(recipe.spec(), recipe.seed)?;
    let report = recipe.trainer.train(&mut net, &batch)?;
    Ok((net, report))
}

/// Normalize, train, and score one recipe on a raw series.
pub fn run<T: Scalar>(raw: &EventSeries<T>, recipe: &Recipe) -> Result<RunOutcome<T>> {
    recipe.validate()?;
    let prepared = Prepared::new(raw, recipe.n_train_events)?;
    let (net, train) = fit(&prepared, recipe)?;
    let (residuals, anomaly) = prepared.score(&net, recipe)?;
    Ok(RunOutcome {
        prepared,
        net,
        train,
        residuals,
        anomaly,
    })
}

/// Seeds for `k` consensus runs derived from a base seed.
pub fn consensus_seeds(base: u64, k: usize) -> Vec<u64> {
    (0..k as u64).map(|i| base.wrapping_add(i)).collect()
}

/// Trains one model per seed and votes on the flagged events.
pub fn run_consensus<T: Scalar>(
    raw: &EventSeries<T>,
    recipe: &Recipe,
    seeds: &[u64],
    quorum: f64,
) -> Result<ConsensusReport> {
    if seeds.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "consensus needs at least 2 runs, got {}",
            seeds.len()
        )));
    }
    let reports = seeds
        .iter()
        .map(|&s| run(raw, &recipe.clone().with_seed(s)).map(|o| o.anomaly))
        .collect::<Result<Vec<_>>>()?;
    consensus(&reports, quorum)
}
