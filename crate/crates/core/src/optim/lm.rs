//! Levenberg-Marquardt training of a [`Network`] on the sum of squared
//! residuals.

use std::time::Instant;

use ndarray::{s, Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use super::linalg::{solve_damped, LmStep};
use super::{check_finite, epoch_split, validate_common, EpochRecord, StopReason, TrainReport, Tracker};
use crate::network::grad::jacobian_unchecked;
use crate::network::{Batch, Loss, Network};
use crate::{Error, Result, Scalar};

/// Training stops as converged once the subset SSE drops below this.
pub const CONVERGED_SSE: f64 = 1e-24;
/// ... or once `‖Jᵀr‖` drops below this.
pub const CONVERGED_GRAD_NORM: f64 = 1e-16;
/// Lower bound on λ after repeated accepted steps, so it never reaches zero.
pub const LAMBDA_FLOOR: f64 = 1e-16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LmConfig {
    pub lambda0: f64,
    pub lambda_inc: f64,
    pub lambda_dec: f64,
    pub lambda_max: f64,
    pub max_epochs: usize,
    pub val_fraction: f64,
    pub patience: usize,
    pub resplit_each_epoch: bool,
    pub seed: u64,
    /// Loss reported in the history. The update itself always minimizes SSE.
    pub monitor: Loss,
    /// Jacobian rows per accumulation block of `JᵀJ` and `Jᵀr`.
    pub block_rows: usize,
}

impl Default for LmConfig {
    fn default() -> Self {
        Self {
            lambda0: 1e-3,
            lambda_inc: 10.0,
            lambda_dec: 0.1,
            lambda_max: 1e10,
            max_epochs: 300,
            val_fraction: 0.4,
            patience: 3,
            resplit_each_epoch: true,
            seed: 0,
            monitor: Loss::Mse,
            block_rows: 4096,
        }
    }
}

impl LmConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.lambda0 > 0.0 && self.lambda0 <= self.lambda_max) {
            return bad(format!(
                "need 0 < lambda0 <= lambda_max, got {} and {}",
                self.lambda0, self.lambda_max
            ));
        }
        if !(self.lambda_inc > 1.0) {
            return bad(format!("lambda_inc must exceed 1, got {}", self.lambda_inc));
        }
        if !(self.lambda_dec > 0.0 && self.lambda_dec < 1.0) {
            return bad(format!("lambda_dec must lie in (0, 1), got {}", self.lambda_dec));
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be at least 1".into());
        }
        if self.block_rows == 0 {
            return bad("block_rows must be at least 1".into());
        }
        Ok(())
    }
}

/// `JᵀJ`, `Jᵀr` and the SSE of a batch, accumulated over row blocks.
struct NormalEquations<T: Scalar> {
    jtj: Array2<T>,
    jtr: Array1<T>,
    sse: f64,
}

fn accumulate<T: Scalar>(net: &Network<T>, batch: &Batch<T>, block_rows: usize) -> NormalEquations<T> {
    let p = net.param_count();
    let out_dim = net.spec().output_dim;
    let per_block = (block_rows / out_dim).max(1);
    let mut jtj = Array2::<T>::zeros((p, p));
    let mut jtr = Array1::<T>::zeros(p);
    let mut sse = 0.0;
    let n = batch.len();
    let mut start = 0;
    while start < n {
        let end = (start + per_block).min(n);
        let inputs = batch.inputs.slice(s![start..end, ..]);
        let pred = net.trace(inputs).pop().expect("output layer");
        let resid = &batch.targets.slice(s![start..end, ..]) - &pred;
        sse += resid.iter().map(|r| r.as_f64().powi(2)).sum::<f64>();
        let jac = jacobian_unchecked(net, inputs);
        let r_flat = Array1::from_iter(resid.iter().copied());
        ndarray::linalg::general_mat_mul(T::one(), &jac.t(), &jac, T::one(), &mut jtj);
        jtr += &jac.t().dot(&r_flat);
        start = end;
    }
    NormalEquations { jtj, jtr, sse }
}

fn sse_of<T: Scalar>(net: &Network<T>, batch: &Batch<T>) -> f64 {
    let pred = net.trace(batch.inputs.view()).pop().expect("output layer");
    (&batch.targets - &pred)
        .iter()
        .map(|r| r.as_f64().powi(2))
        .sum()
}

/// Trains `net` in place with damped Gauss-Newton steps.
///
/// Each epoch draws the train/validation split, builds the normal equations
/// on the training subset and retries the solve with growing λ until the
/// subset SSE strictly decreases or λ would exceed `lambda_max`. The network
/// ends up holding the parameters of the best validation epoch.
pub fn train_lm<T: Scalar>(
    net: &mut Network<T>,
    batch: &Batch<T>,
    config: &LmConfig,
) -> Result<TrainReport<T>> {
    config.validate()?;
    validate_common(net, batch, config.val_fraction)?;
    let started = Instant::now();
    let mut tracker = Tracker::new(net.params(), config.patience);
    let mut lambda = config.lambda0;
    let mut stop = StopReason::MaxEpochs;
    let mut candidate = net.clone();

    for epoch in 1..=config.max_epochs {
        let (train_idx, val_idx) = epoch_split(
            batch.len(),
            config.val_fraction,
            config.seed,
            epoch,
            config.resplit_each_epoch,
        )?;
        let train = batch.select(&train_idx);
        let val = batch.select(&val_idx);

        let eq = accumulate(net, &train, config.block_rows);
        check_finite(eq.sse, "training SSE", epoch)?;
        let grad_norm = eq.jtr.iter().map(|g| g.as_f64().powi(2)).sum::<f64>().sqrt();

        let mut accepted = false;
        let mut rejections = 0u32;
        let mut sse_after = eq.sse;
        let mut epoch_stop = None;

        if eq.sse < CONVERGED_SSE || grad_norm < CONVERGED_GRAD_NORM {
            epoch_stop = Some(StopReason::Converged);
        } else {
            loop {
                if let LmStep::Step(delta) = solve_damped(&eq.jtj, eq.jtr.view(), lambda) {
                    for ((c, &p), &d) in candidate
                        .params_mut()
                        .iter_mut()
                        .zip(net.params())
                        .zip(delta.iter())
                    {
                        *c = p + d;
                    }
                    let trial = sse_of(&candidate, &train);
                    if trial.is_finite() && trial < eq.sse {
                        std::mem::swap(net, &mut candidate);
                        lambda = (lambda * config.lambda_dec).max(LAMBDA_FLOOR);
                        accepted = true;
                        sse_after = trial;
                        break;
                    }
                }
                rejections += 1;
                if lambda >= config.lambda_max {
                    epoch_stop = Some(StopReason::LambdaOverflow);
                    break;
                }
                lambda = (lambda * config.lambda_inc).min(config.lambda_max);
            }
        }

        let train_loss = monitor_loss(net, &train, config.monitor, sse_after);
        let val_loss = config.monitor.evaluate(net, &val)?;
        check_finite(val_loss, "validation loss", epoch)?;
        let record = EpochRecord {
            epoch,
            train_loss,
            val_loss,
            step_size: lambda,
            accepted,
            rejections,
            sse_before: Some(eq.sse),
            sse_after: Some(sse_after),
        };
        let exhausted = tracker.record(record, net.params());
        if let Some(reason) = epoch_stop {
            stop = reason;
            break;
        }
        if exhausted {
            stop = StopReason::PatienceExhausted;
            break;
        }
    }

    Ok(tracker.finish(
        net,
        "lm",
        config.monitor,
        stop,
        started.elapsed().as_secs_f64(),
    ))
}

fn monitor_loss<T: Scalar>(net: &Network<T>, train: &Batch<T>, loss: Loss, sse: f64) -> f64 {
    match loss {
        Loss::Mse => sse / (train.len() * train.targets.len_of(Axis(1))) as f64,
        Loss::Mae => {
            let pred = net.trace(train.inputs.view()).pop().expect("output layer");
            loss.of_residuals((&train.targets - &pred).view())
        }
    }
}
