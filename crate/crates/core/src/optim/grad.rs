//! First-order baselines: ADAM, SGD with momentum and resilient
//! backpropagation.

use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{check_finite, epoch_split, split_rng, validate_common, EpochRecord, StopReason, TrainReport, Tracker};
use crate::network::grad::loss_and_gradient;
use crate::network::{Batch, Loss, Network};
use crate::{Error, Result, Scalar};

/// Smallest Rprop step size.
pub const RPROP_DELTA_MIN: f64 = 1e-9;

/// Per-parameter update driven by a gradient.
pub trait UpdateRule<T: Scalar> {
    fn step(&mut self, params: &mut [T], grad: &[T]);
    /// Value recorded as `step_size` in the epoch history.
    fn step_size(&self) -> f64;
}

/// ADAM with bias-corrected first and second moments.
#[derive(Clone, Debug)]
pub struct Adam<T: Scalar> {
    lr: T,
    beta1: T,
    beta2: T,
    eps: T,
    m: Vec<T>,
    v: Vec<T>,
    t: i32,
}

impl<T: Scalar> Adam<T> {
    pub fn new(n: usize, lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            lr: T::of(lr),
            beta1: T::of(beta1),
            beta2: T::of(beta2),
            eps: T::of(eps),
            m: vec![T::zero(); n],
            v: vec![T::zero(); n],
            t: 0,
        }
    }
}

impl<T: Scalar> UpdateRule<T> for Adam<T> {
    fn step(&mut self, params: &mut [T], grad: &[T]) {
        self.t += 1;
        let c1 = T::one() - self.beta1.powi(self.t);
        let c2 = T::one() - self.beta2.powi(self.t);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (T::one() - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (T::one() - self.beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }

    fn step_size(&self) -> f64 {
        self.lr.as_f64()
    }
}

/// Gradient descent with a momentum velocity, `v ← μv − η g; θ ← θ + v`.
#[derive(Clone, Debug)]
pub struct Sgdm<T: Scalar> {
    lr: T,
    momentum: T,
    velocity: Vec<T>,
}

impl<T: Scalar> Sgdm<T> {
    pub fn new(n: usize, lr: f64, momentum: f64) -> Self {
        Self {
            lr: T::of(lr),
            momentum: T::of(momentum),
            velocity: vec![T::zero(); n],
        }
    }
}

impl<T: Scalar> UpdateRule<T> for Sgdm<T> {
    fn step(&mut self, params: &mut [T], grad: &[T]) {
        for ((p, v), &g) in params.iter_mut().zip(&mut self.velocity).zip(grad) {
            *v = self.momentum * *v - self.lr * g;
            *p += *v;
        }
    }

    fn step_size(&self) -> f64 {
        self.lr.as_f64()
    }
}

/// Resilient backpropagation: only gradient signs are used.
///
/// A step grows by `eta_plus` when the gradient keeps its sign and shrinks by
/// `eta_minus` when it flips; on a flip the update is skipped and the stored
/// gradient cleared so the next epoch takes a plain step.
#[derive(Clone, Debug)]
pub struct Rprop<T: Scalar> {
    eta_plus: T,
    eta_minus: T,
    delta_min: T,
    delta_max: T,
    deltas: Vec<T>,
    prev_grad: Vec<T>,
}

impl<T: Scalar> Rprop<T> {
    pub fn new(n: usize, eta_plus: f64, eta_minus: f64, delta0: f64, delta_max: f64) -> Self {
        Self {
            eta_plus: T::of(eta_plus),
            eta_minus: T::of(eta_minus),
            delta_min: T::of(RPROP_DELTA_MIN),
            delta_max: T::of(delta_max),
            deltas: vec![T::of(delta0); n],
            prev_grad: vec![T::zero(); n],
        }
    }

    pub fn deltas(&self) -> &[T] {
        &self.deltas
    }
}

impl<T: Scalar> UpdateRule<T> for Rprop<T> {
    fn step(&mut self, params: &mut [T], grad: &[T]) {
        for i in 0..params.len() {
            let g = grad[i];
            let agreement = self.prev_grad[i] * g;
            if agreement > T::zero() {
                self.deltas[i] = (self.deltas[i] * self.eta_plus).min(self.delta_max);
            } else if agreement < T::zero() {
                self.deltas[i] = (self.deltas[i] * self.eta_minus).max(self.delta_min);
                self.prev_grad[i] = T::zero();
                continue;
            }
            if g > T::zero() {
                params[i] -= self.deltas[i];
            } else if g < T::zero() {
                params[i] += self.deltas[i];
            }
            self.prev_grad[i] = g;
        }
    }

    fn step_size(&self) -> f64 {
        let n = self.deltas.len().max(1) as f64;
        self.deltas.iter().map(|d| d.as_f64()).sum::<f64>() / n
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Adam,
    Sgdm,
    Rprop,
}

impl std::fmt::Display for Optimizer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Optimizer::Adam => "adam",
            Optimizer::Sgdm => "sgdm",
            Optimizer::Rprop => "rprop",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradConfig {
    pub optimizer: Optimizer,
    pub learning_rate: f64,
    pub momentum: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub rprop_eta_plus: f64,
    pub rprop_eta_minus: f64,
    pub rprop_delta0: f64,
    pub rprop_delta_max: f64,
    /// `None` trains full-batch. Ignored by Rprop, which is always full-batch.
    pub batch_size: Option<usize>,
    pub loss: Loss,
    pub max_epochs: usize,
    pub val_fraction: f64,
    pub patience: usize,
    pub resplit_each_epoch: bool,
    pub seed: u64,
}

impl Default for GradConfig {
    fn default() -> Self {
        Self::new(Optimizer::Adam)
    }
}

impl GradConfig {
    pub fn new(optimizer: Optimizer) -> Self {
        Self {
            optimizer,
            learning_rate: match optimizer {
                Optimizer::Sgdm => 1e-2,
                _ => 1e-3,
            },
            momentum: 0.9,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            rprop_eta_plus: 1.2,
            rprop_eta_minus: 0.5,
            rprop_delta0: 0.07,
            rprop_delta_max: 50.0,
            batch_size: None,
            loss: Loss::Mse,
            max_epochs: 1000,
            val_fraction: 0.4,
            patience: 10,
            resplit_each_epoch: true,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.optimizer != Optimizer::Rprop && !(self.learning_rate > 0.0) {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum must lie in [0, 1), got {}", self.momentum));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("ADAM betas must lie in [0, 1)".into());
        }
        if !(self.rprop_eta_minus > 0.0
            && self.rprop_eta_minus < 1.0
            && 1.0 < self.rprop_eta_plus)
        {
            return bad(format!(
                "need 0 < eta_minus < 1 < eta_plus, got {} and {}",
                self.rprop_eta_minus, self.rprop_eta_plus
            ));
        }
        if !(self.rprop_delta0 > 0.0 && self.rprop_delta_max >= RPROP_DELTA_MIN) {
            return bad("Rprop step sizes must be positive".into());
        }
        if self.batch_size == Some(0) {
            return bad("batch_size must be at least 1".into());
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be at least 1".into());
        }
        Ok(())
    }

    fn rule<T: Scalar>(&self, n: usize) -> Box<dyn UpdateRule<T>> {
        match self.optimizer {
            Optimizer::Adam => Box::new(Adam::new(
                n,
                self.learning_rate,
                self.beta1,
                self.beta2,
                self.epsilon,
            )),
            Optimizer::Sgdm => Box::new(Sgdm::new(n, self.learning_rate, self.momentum)),
            Optimizer::Rprop => Box::new(Rprop::new(
                n,
                self.rprop_eta_plus,
                self.rprop_eta_minus,
                self.rprop_delta0,
                self.rprop_delta_max,
            )),
        }
    }
}

/// Trains `net` in place with the configured first-order optimizer, using
/// the same split, patience and best-restore machinery as LM.
pub fn train_grad<T: Scalar>(
    net: &mut Network<T>,
    batch: &Batch<T>,
    config: &GradConfig,
) -> Result<TrainReport<T>> {
    config.validate()?;
    validate_common(net, batch, config.val_fraction)?;
    let started = Instant::now();
    let mut rule = config.rule::<T>(net.param_count());
    let mut tracker = Tracker::new(net.params(), config.patience);
    let mut stop = StopReason::MaxEpochs;
    let batch_size = match config.optimizer {
        Optimizer::Rprop => None,
        _ => config.batch_size,
    };

    for epoch in 1..=config.max_epochs {
        let (mut train_idx, val_idx) = epoch_split(
            batch.len(),
            config.val_fraction,
            config.seed,
            epoch,
            config.resplit_each_epoch,
        )?;
        let val = batch.select(&val_idx);

        match batch_size {
            Some(size) if size < train_idx.len() => {
                // shuffle streams sit above the split streams
                let mut rng = split_rng(config.seed, epoch + (1 << 32));
                train_idx.shuffle(&mut rng);
                for chunk in train_idx.chunks(size) {
                    let (value, grad) = loss_and_gradient(net, &batch.select(chunk), config.loss);
                    check_finite(value, "minibatch loss", epoch)?;
                    rule.step(net.params_mut(), &grad);
                }
                train_idx.sort_unstable();
            }
            _ => {
                let train = batch.select(&train_idx);
                let (value, grad) = loss_and_gradient(net, &train, config.loss);
                check_finite(value, "training loss", epoch)?;
                rule.step(net.params_mut(), &grad);
            }
        }

        let train_loss = config.loss.evaluate(net, &batch.select(&train_idx))?;
        let val_loss = config.loss.evaluate(net, &val)?;
        check_finite(train_loss, "training loss", epoch)?;
        check_finite(val_loss, "validation loss", epoch)?;
        let record = EpochRecord {
            epoch,
            train_loss,
            val_loss,
            step_size: rule.step_size(),
            accepted: true,
            rejections: 0,
            sse_before: None,
            sse_after: None,
        };
        if tracker.record(record, net.params()) {
            stop = StopReason::PatienceExhausted;
            break;
        }
    }

    Ok(tracker.finish(
        net,
        &config.optimizer.to_string(),
        config.loss,
        stop,
        started.elapsed().as_secs_f64(),
    ))
}
