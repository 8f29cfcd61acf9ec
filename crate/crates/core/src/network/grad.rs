use ndarray::{s, Array2, ArrayView2, Axis, Zip};
use serde::{Deserialize, Serialize};

use super::{Batch, Network};
use crate::{Error, Result, Scalar};

/// Training / monitoring loss, averaged over every element of the target
/// matrix.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    #[default]
    Mse,
    Mae,
}

impl Loss {
    /// Mean loss of the given residuals `y - ŷ`.
    pub fn of_residuals<T: Scalar>(self, residuals: ArrayView2<T>) -> f64 {
        let n = residuals.len().max(1) as f64;
        let total: f64 = match self {
            Loss::Mse => residuals.iter().map(|r| r.as_f64().powi(2)).sum(),
            Loss::Mae => residuals.iter().map(|r| r.as_f64().abs()).sum(),
        };
        total / n
    }

    pub fn evaluate<T: Scalar>(self, net: &Network<T>, batch: &Batch<T>) -> Result<f64> {
        batch.check_against(net)?;
        let pred = net.forward(batch.inputs.view())?;
        Ok(self.of_residuals((&batch.targets - &pred).view()))
    }

    /// `dL/dŷ` for residuals `r = y - ŷ`.
    fn output_sensitivity<T: Scalar>(self, residuals: &Array2<T>) -> Array2<T> {
        let m = T::of(residuals.len() as f64);
        match self {
            Loss::Mse => residuals.mapv(|r| -(r + r) / m),
            Loss::Mae => residuals.mapv(|r| {
                if r > T::zero() {
                    -T::one() / m
                } else if r < T::zero() {
                    T::one() / m
                } else {
                    T::zero()
                }
            }),
        }
    }
}

impl std::fmt::Display for Loss {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Loss::Mse => "mse",
            Loss::Mae => "mae",
        })
    }
}

impl std::str::FromStr for Loss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mse" => Ok(Loss::Mse),
            "mae" => Ok(Loss::Mae),
            other => Err(Error::InvalidArgument(format!("unknown loss `{other}`"))),
        }
    }
}

/// Reverse pass of `d_out = dL/dŷ` through a recorded forward trace.
pub(crate) fn backprop<T: Scalar>(net: &Network<T>, acts: &[Array2<T>], d_out: Array2<T>) -> Vec<T> {
    let mut grad = vec![T::zero(); net.param_count()];
    let mut delta = d_out;
    for (l, slot) in net.slots().iter().enumerate().rev() {
        let prev = &acts[l];
        let gw = delta.t().dot(prev);
        for (dst, &src) in grad[slot.weights..slot.biases].iter_mut().zip(gw.iter()) {
            *dst = src;
        }
        let gb = delta.sum_axis(Axis(0));
        for (dst, &src) in grad[slot.biases..slot.biases + slot.fan_out]
            .iter_mut()
            .zip(gb.iter())
        {
            *dst = src;
        }
        if l > 0 {
            let mut next = delta.dot(&net.weights(slot));
            Zip::from(&mut next)
                .and(prev)
                .for_each(|d, &a| *d *= T::one() - a * a);
            delta = next;
        }
    }
    grad
}

/// Gradient of the mean loss over `batch` with respect to every parameter.
///
/// For MAE the subgradient uses `sign(0) = 0`.
pub fn loss_gradient<T: Scalar>(net: &Network<T>, batch: &Batch<T>, loss: Loss) -> Result<Vec<T>> {
    batch.check_against(net)?;
    let acts = net.trace(batch.inputs.view());
    let residuals = &batch.targets - acts.last().expect("output layer");
    Ok(backprop(net, &acts, loss.output_sensitivity(&residuals)))
}

/// Same as [`loss_gradient`] but also returns the loss value, sharing the
/// forward pass.
pub(crate) fn loss_and_gradient<T: Scalar>(
    net: &Network<T>,
    batch: &Batch<T>,
    loss: Loss,
) -> (f64, Vec<T>) {
    let acts = net.trace(batch.inputs.view());
    let residuals = &batch.targets - acts.last().expect("output layer");
    let value = loss.of_residuals(residuals.view());
    (value, backprop(net, &acts, loss.output_sensitivity(&residuals)))
}

/// Jacobian of every scalar output with respect to every parameter.
///
/// Shape is `(N * output_dim) × param_count`; row `n * output_dim + k` holds
/// `∂ŷ[n, k] / ∂θ`.
pub fn jacobian<T: Scalar>(net: &Network<T>, inputs: ArrayView2<T>) -> Result<Array2<T>> {
    net.check_inputs(&inputs)?;
    Ok(jacobian_unchecked(net, inputs))
}

pub(crate) fn jacobian_unchecked<T: Scalar>(net: &Network<T>, inputs: ArrayView2<T>) -> Array2<T> {
    let acts = net.trace(inputs);
    let n = inputs.nrows();
    let out_dim = net.spec().output_dim;
    let mut jac = Array2::<T>::zeros((n * out_dim, net.param_count()));
    let slots = net.slots();
    let last = slots.len() - 1;

    for k in 0..out_dim {
        let mut delta = Array2::<T>::zeros((n, out_dim));
        delta.column_mut(k).fill(T::one());
        for l in (0..=last).rev() {
            let slot = &slots[l];
            let prev = &acts[l];
            for s in 0..n {
                let mut row = jac.row_mut(s * out_dim + k);
                let d = delta.row(s);
                let a = prev.row(s);
                for i in 0..slot.fan_out {
                    let di = d[i];
                    if di == T::zero() {
                        continue;
                    }
                    let base = slot.weights + i * slot.fan_in;
                    let mut dst = row.slice_mut(s![base..base + slot.fan_in]);
                    Zip::from(&mut dst).and(&a).for_each(|j, &aj| *j = di * aj);
                    row[slot.biases + i] = di;
                }
            }
            if l > 0 {
                let mut next = delta.dot(&net.weights(slot));
                Zip::from(&mut next)
                    .and(prev)
                    .for_each(|d, &a| *d *= T::one() - a * a);
                delta = next;
            }
        }
    }
    jac
}

/// Central-difference Jacobian used to check [`jacobian`].
///
/// Parameter `j` is perturbed by `h * (1 + |θ_j|)`.
pub fn finite_diff_jacobian<T: Scalar>(
    net: &Network<T>,
    inputs: ArrayView2<T>,
    h: f64,
) -> Result<Array2<T>> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "finite-difference step must be positive, got {h}"
        )));
    }
    net.check_inputs(&inputs)?;
    let rows = inputs.nrows() * net.spec().output_dim;
    let mut jac = Array2::<T>::zeros((rows, net.param_count()));
    let mut probe = net.clone();
    for j in 0..net.param_count() {
        let theta = net.params()[j];
        let step = T::of(h) * (T::one() + theta.abs());
        probe.params_mut()[j] = theta + step;
        let plus = probe.forward(inputs)?;
        probe.params_mut()[j] = theta - step;
        let minus = probe.forward(inputs)?;
        probe.params_mut()[j] = theta;
        let col = (&plus - &minus).mapv(|v| v / (step + step));
        // row-major flatten matches the sample-major row order
        for (dst, &v) in jac.column_mut(j).iter_mut().zip(col.iter()) {
            *dst = v;
        }
    }
    Ok(jac)
}
