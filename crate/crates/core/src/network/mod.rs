//! Dense feedforward networks with tanh hidden layers and a linear output.
//!
//! Parameters live in one flat vector. For each layer in order the weight
//! matrix comes first, stored row-major with shape `(fan_out, fan_in)`,
//! followed by the `fan_out` biases. Saved models depend on this order.

pub(crate) mod grad;
mod io;

pub use grad::{finite_diff_jacobian, jacobian, loss_gradient, Loss};
pub use io::{NetworkDoc, NETWORK_FORMAT, NETWORK_FORMAT_VERSION};

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result, Scalar};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HiddenActivation {
    #[default]
    Tanh,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputActivation {
    #[default]
    Linear,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Regressor,
    Autoencoder,
}

/// Architecture of a dense network.
///
/// An empty `hidden_layers` list describes a single affine layer.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_dim: usize,
    pub hidden_layers: Vec<usize>,
    pub output_dim: usize,
    #[serde(default)]
    pub hidden_activation: HiddenActivation,
    #[serde(default)]
    pub output_activation: OutputActivation,
    #[serde(default)]
    pub mode: Mode,
}

impl NetworkSpec {
    pub fn regressor(input_dim: usize, hidden_layers: &[usize], output_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_layers: hidden_layers.to_vec(),
            output_dim,
            hidden_activation: HiddenActivation::Tanh,
            output_activation: OutputActivation::Linear,
            mode: Mode::Regressor,
        }
    }

    pub fn autoencoder(dim: usize, hidden_layers: &[usize]) -> Self {
        Self {
            mode: Mode::Autoencoder,
            ..Self::regressor(dim, hidden_layers, dim)
        }
    }

    /// A single affine layer, `y = W x + b`.
    pub fn linear(input_dim: usize, output_dim: usize) -> Self {
        Self::regressor(input_dim, &[], output_dim)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::InvalidSpec("input_dim must be at least 1".into()));
        }
        if self.output_dim == 0 {
            return Err(Error::InvalidSpec("output_dim must be at least 1".into()));
        }
        if let Some(pos) = self.hidden_layers.iter().position(|&n| n == 0) {
            return Err(Error::InvalidSpec(format!(
                "hidden layer {pos} has zero neurons"
            )));
        }
        if self.mode == Mode::Autoencoder && self.input_dim != self.output_dim {
            return Err(Error::InvalidSpec(format!(
                "autoencoder needs input_dim == output_dim, got {} and {}",
                self.input_dim, self.output_dim
            )));
        }
        Ok(())
    }

    /// `(fan_in, fan_out)` for every layer, input to output.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden_layers.len() + 1);
        let mut fan_in = self.input_dim;
        for &h in &self.hidden_layers {
            dims.push((fan_in, h));
            fan_in = h;
        }
        dims.push((fan_in, self.output_dim));
        dims
    }

    pub fn param_count(&self) -> usize {
        self.layer_dims()
            .iter()
            .map(|&(fan_in, fan_out)| (fan_in + 1) * fan_out)
            .sum()
    }

    /// Human-readable shape such as `1-40-1`.
    pub fn describe(&self) -> String {
        std::iter::once(self.input_dim)
            .chain(self.hidden_layers.iter().copied())
            .chain(std::iter::once(self.output_dim))
            .map(|d| d.to_string())
            .collect::<Vec<_>>()
            .join("-")
    }
}

/// Offsets of one layer inside the flat parameter vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct LayerSlot {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weights: usize,
    pub biases: usize,
}

impl LayerSlot {
    fn end(&self) -> usize {
        self.biases + self.fan_out
    }
}

pub(crate) fn layer_slots(spec: &NetworkSpec) -> Vec<LayerSlot> {
    let mut offset = 0;
    spec.layer_dims()
        .into_iter()
        .map(|(fan_in, fan_out)| {
            let slot = LayerSlot {
                fan_in,
                fan_out,
                weights: offset,
                biases: offset + fan_in * fan_out,
            };
            offset = slot.end();
            slot
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network<T: Scalar> {
    spec: NetworkSpec,
    params: Vec<T>,
    slots: Vec<LayerSlot>,
}

impl<T: Scalar> Network<T> {
    /// Builds a network with scaled-uniform weights in
    /// `±sqrt(6 / (fan_in + fan_out))` and zero biases.
    pub fn build(spec: NetworkSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let slots = layer_slots(&spec);
        let mut params = vec![T::zero(); spec.param_count()];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for slot in &slots {
            let limit = (6.0 / (slot.fan_in + slot.fan_out) as f64).sqrt();
            for w in &mut params[slot.weights..slot.biases] {
                *w = T::of(rng.random_range(-limit..=limit));
            }
        }
        Ok(Self {
            spec,
            params,
            slots,
        })
    }

    pub fn from_params(spec: NetworkSpec, params: Vec<T>) -> Result<Self> {
        spec.validate()?;
        let expected = spec.param_count();
        if params.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: params.len(),
                context: "parameter vector length",
            });
        }
        let slots = layer_slots(&spec);
        Ok(Self {
            spec,
            params,
            slots,
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn set_params(&mut self, params: &[T]) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::DimensionMismatch {
                expected: self.params.len(),
                got: params.len(),
                context: "parameter vector length",
            });
        }
        self.params.copy_from_slice(params);
        Ok(())
    }

    pub(crate) fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub(crate) fn slots(&self) -> &[LayerSlot] {
        &self.slots
    }

    pub(crate) fn weights(&self, slot: &LayerSlot) -> ArrayView2<'_, T> {
        ArrayView2::from_shape(
            (slot.fan_out, slot.fan_in),
            &self.params[slot.weights..slot.biases],
        )
        .expect("layer slot matches parameter layout")
    }

    pub(crate) fn biases(&self, slot: &LayerSlot) -> ArrayView1<'_, T> {
        ArrayView1::from(&self.params[slot.biases..slot.end()])
    }

    pub(crate) fn check_inputs(&self, inputs: &ArrayView2<T>) -> Result<()> {
        if inputs.ncols() != self.spec.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.spec.input_dim,
                got: inputs.ncols(),
                context: "input columns",
            });
        }
        Ok(())
    }

    /// Activations of every layer for a batch: entry 0 is the input, the
    /// last entry is the network output.
    pub(crate) fn trace(&self, inputs: ArrayView2<T>) -> Vec<Array2<T>> {
        let mut acts = Vec::with_capacity(self.slots.len() + 1);
        acts.push(inputs.to_owned());
        let last = self.slots.len() - 1;
        for (l, slot) in self.slots.iter().enumerate() {
            let prev = &acts[l];
            let mut z = prev.dot(&self.weights(slot).t());
            z += &self.biases(slot).insert_axis(Axis(0));
            if l != last {
                z.mapv_inplace(|v| v.tanh());
            }
            acts.push(z);
        }
        acts
    }

    /// Evaluates the network on an `N × input_dim` batch.
    pub fn forward(&self, inputs: ArrayView2<T>) -> Result<Array2<T>> {
        self.check_inputs(&inputs)?;
        Ok(self.trace(inputs).pop().expect("trace has an output layer"))
    }

    /// Convenience for single-input networks.
    pub fn predict_scalar_series(&self, xs: &[T]) -> Result<Vec<T>> {
        let inputs = ArrayView2::from_shape((xs.len(), 1), xs)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let out = self.forward(inputs)?;
        if out.ncols() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: out.ncols(),
                context: "output columns",
            });
        }
        Ok(out.column(0).to_vec())
    }
}

/// Paired inputs and targets, one sample per row.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch<T: Scalar> {
    pub inputs: Array2<T>,
    pub targets: Array2<T>,
}

impl<T: Scalar> Batch<T> {
    pub fn new(inputs: Array2<T>, targets: Array2<T>) -> Result<Self> {
        if inputs.nrows() != targets.nrows() {
            return Err(Error::DimensionMismatch {
                expected: inputs.nrows(),
                got: targets.nrows(),
                context: "target rows",
            });
        }
        if inputs.nrows() == 0 {
            return Err(Error::InvalidArgument("batch has no samples".into()));
        }
        Ok(Self { inputs, targets })
    }

    /// One input column and one target column.
    pub fn from_columns(xs: &[T], ys: &[T]) -> Result<Self> {
        let to_col = |v: &[T]| Array2::from_shape_vec((v.len(), 1), v.to_vec());
        Self::new(
            to_col(xs).map_err(|e| Error::InvalidArgument(e.to_string()))?,
            to_col(ys).map_err(|e| Error::InvalidArgument(e.to_string()))?,
        )
    }

    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn select(&self, rows: &[usize]) -> Self {
        Self {
            inputs: self.inputs.select(Axis(0), rows),
            targets: self.targets.select(Axis(0), rows),
        }
    }

    pub(crate) fn check_against(&self, net: &Network<T>) -> Result<()> {
        net.check_inputs(&self.inputs.view())?;
        if self.targets.ncols() != net.spec().output_dim {
            return Err(Error::DimensionMismatch {
                expected: net.spec().output_dim,
                got: self.targets.ncols(),
                context: "target columns",
            });
        }
        Ok(())
    }
}
