//! Trainers: Levenberg-Marquardt plus ADAM, SGD with momentum and Rprop
//! baselines, sharing one epoch loop with per-epoch random train/validation
//! splits, patience-based early stopping and best-parameter restoration.

mod grad;
mod linalg;
mod lm;
mod report;

pub use grad::{train_grad, Adam, GradConfig, Optimizer, Rprop, Sgdm, UpdateRule, RPROP_DELTA_MIN};
pub use linalg::{cholesky_solve, lm_step, solve_damped, LmStep};
pub use lm::{train_lm, LmConfig, CONVERGED_GRAD_NORM, CONVERGED_SSE, LAMBDA_FLOOR};
pub use report::{EpochRecord, StopReason, TrainReport, TRAIN_REPORT_FORMAT, TRAIN_REPORT_VERSION};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::network::{Batch, Network};
use crate::{Error, Result, Scalar};

/// Randomly partitions `0..n_samples` into train and validation indices.
///
/// The validation side gets `round(val_fraction * n_samples)` indices. Both
/// returned lists are sorted.
pub fn split_train_val<R: Rng + ?Sized>(
    n_samples: usize,
    val_fraction: f64,
    rng: &mut R,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "val_fraction must lie in (0, 1), got {val_fraction}"
        )));
    }
    let n_val = (val_fraction * n_samples as f64).round() as usize;
    if n_val == 0 || n_val >= n_samples {
        return Err(Error::InvalidArgument(format!(
            "splitting {n_samples} samples with val_fraction {val_fraction} leaves one side empty"
        )));
    }
    let mut order: Vec<usize> = (0..n_samples).collect();
    order.shuffle(rng);
    let mut val = order.split_off(n_samples - n_val);
    order.sort_unstable();
    val.sort_unstable();
    Ok((order, val))
}

/// RNG for the split of a given epoch. Each epoch reads its own stream, so
/// any epoch's split can be replayed from the seed alone.
pub fn split_rng(seed: u64, epoch: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64);
    rng
}

/// Train/validation split used at `epoch` (1-based). With
/// `resplit_each_epoch` off every epoch reuses the epoch-1 split.
pub fn epoch_split(
    n_samples: usize,
    val_fraction: f64,
    seed: u64,
    epoch: usize,
    resplit_each_epoch: bool,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let stream = if resplit_each_epoch { epoch } else { 1 };
    split_train_val(n_samples, val_fraction, &mut split_rng(seed, stream))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EarlyStop {
    Continue,
    Stop,
}

/// Stops once the last `patience` epochs all failed to strictly improve on
/// the best validation loss seen before them. `patience == 0` never stops.
pub fn early_stop_check(val_history: &[f64], patience: usize) -> EarlyStop {
    if patience == 0 || val_history.is_empty() {
        return EarlyStop::Continue;
    }
    let mut best = f64::INFINITY;
    let mut best_at = 0;
    for (i, &v) in val_history.iter().enumerate() {
        if v < best {
            best = v;
            best_at = i;
        }
    }
    if val_history.len() - 1 - best_at >= patience {
        EarlyStop::Stop
    } else {
        EarlyStop::Continue
    }
}

/// Shared epoch bookkeeping: best-epoch tracking and patience.
pub(crate) struct Tracker<T: Scalar> {
    history: Vec<EpochRecord>,
    val_history: Vec<f64>,
    best_epoch: usize,
    best_val: f64,
    best_train: f64,
    best_params: Vec<T>,
    patience: usize,
}

impl<T: Scalar> Tracker<T> {
    pub fn new(initial: &[T], patience: usize) -> Self {
        Self {
            history: Vec::new(),
            val_history: Vec::new(),
            best_epoch: 0,
            best_val: f64::INFINITY,
            best_train: f64::INFINITY,
            best_params: initial.to_vec(),
            patience,
        }
    }

    /// Records an epoch; returns true when patience is exhausted.
    pub fn record(&mut self, rec: EpochRecord, params: &[T]) -> bool {
        if rec.val_loss < self.best_val || self.history.is_empty() {
            self.best_val = rec.val_loss;
            self.best_train = rec.train_loss;
            self.best_epoch = rec.epoch;
            self.best_params.copy_from_slice(params);
        }
        self.val_history.push(rec.val_loss);
        self.history.push(rec);
        early_stop_check(&self.val_history, self.patience) == EarlyStop::Stop
    }

    pub fn finish(
        self,
        net: &mut Network<T>,
        optimizer: &str,
        monitor_loss: crate::network::Loss,
        stop_reason: StopReason,
        wall_time: f64,
    ) -> TrainReport<T> {
        net.params_mut().copy_from_slice(&self.best_params);
        TrainReport {
            optimizer: optimizer.to_string(),
            monitor_loss,
            epoch_history: self.history,
            best_epoch: self.best_epoch,
            best_val_loss: self.best_val,
            final_train_loss: self.best_train,
            stop_reason,
            wall_time,
            best_params: self.best_params,
        }
    }
}

pub(crate) fn check_finite(value: f64, what: &str, epoch: usize) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(format!("{what} is {value} at epoch {epoch}")))
    }
}

pub(crate) fn validate_common<T: Scalar>(
    net: &Network<T>,
    batch: &Batch<T>,
    val_fraction: f64,
) -> Result<()> {
    batch.check_against(net)?;
    let n = batch.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "training needs at least 2 samples, got {n}"
        )));
    }
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "val_fraction must lie in (0, 1), got {val_fraction}"
        )));
    }
    Ok(())
}
