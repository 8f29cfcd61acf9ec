use serde::{Deserialize, Serialize};

use super::EventSeries;
use crate::{Error, Result, Scalar};

/// Affine min-max map of `[min, max]` onto `[-1, 1]`. Values outside the
/// fitted range extrapolate along the same line.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelNorm {
    pub min: f64,
    pub max: f64,
}

impl ChannelNorm {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !(max > min) || !min.is_finite() || !max.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "normalizer needs max > min, got [{min}, {max}]"
            )));
        }
        Ok(Self { min, max })
    }

    pub fn fit<T: Scalar>(values: &[T]) -> Result<Self> {
        let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            let v = v.as_f64();
            (lo.min(v), hi.max(v))
        });
        Self::new(lo, hi).map_err(|_| {
            Error::InvalidSeries(format!(
                "cannot normalize a constant or empty channel (range [{lo}, {hi}])"
            ))
        })
    }

    /// Half-width of the fitted range: one normalized unit in raw units.
    pub fn scale(&self) -> f64 {
        0.5 * (self.max - self.min)
    }

    pub fn apply<T: Scalar>(&self, v: T) -> T {
        T::of((v.as_f64() - self.min) / self.scale() - 1.0)
    }

    pub fn invert<T: Scalar>(&self, v: T) -> T {
        T::of((v.as_f64() + 1.0) * self.scale() + self.min)
    }
}

/// Per-channel normalizers for an [`EventSeries`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormParams {
    pub input: ChannelNorm,
    pub output: ChannelNorm,
}

impl NormParams {
    /// Fits on the first `n_train_events` events only.
    pub fn fit_on_events<T: Scalar>(series: &EventSeries<T>, n_train_events: usize) -> Result<Self> {
        if n_train_events == 0 || n_train_events > series.n_events() {
            return Err(Error::InvalidArgument(format!(
                "cannot fit on {n_train_events} of {} events",
                series.n_events()
            )));
        }
        let cut = series.samples_in_first(n_train_events);
        Ok(Self {
            input: ChannelNorm::fit(&series.input()[..cut])?,
            output: ChannelNorm::fit(&series.output()[..cut])?,
        })
    }

    pub fn apply<T: Scalar>(&self, series: &EventSeries<T>) -> EventSeries<T> {
        series.map_channels(|v| self.input.apply(v), |v| self.output.apply(v))
    }

    pub fn invert<T: Scalar>(&self, series: &EventSeries<T>) -> EventSeries<T> {
        series.map_channels(|v| self.input.invert(v), |v| self.output.invert(v))
    }
}
