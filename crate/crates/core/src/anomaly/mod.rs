//! Residual-based anomaly scoring.
//!
//! A test event is flagged when its largest absolute residual is at least
//! `ratio_threshold` times the largest absolute residual anywhere in the
//! training region. Repeating the fit with different seeds and voting
//! separates recurring anomalies from one-off numerical artefacts.

mod io;

pub use io::{write_residual_csv, ANOMALY_REPORT_FORMAT, CONSENSUS_REPORT_FORMAT, REPORT_VERSION};

use std::collections::BTreeSet;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::network::{Mode, Network};
use crate::timeseries::{EventSeries, WindowConfig};
use crate::{Error, Result, Scalar};

pub const DEFAULT_RATIO_THRESHOLD: f64 = 2.0;
pub const DEFAULT_QUORUM: f64 = 0.8;

/// Per-sample residuals over a whole series with its event layout.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualSeries<T: Scalar> {
    pub values: Vec<T>,
    pub event_ends: Vec<usize>,
    /// First sample of the test region; everything before it was available
    /// for training and validation.
    pub train_boundary: usize,
}

impl<T: Scalar> ResidualSeries<T> {
    pub fn new(values: Vec<T>, event_ends: Vec<usize>, train_boundary: usize) -> Result<Self> {
        if event_ends.last().map(|&e| e + 1) != Some(values.len()) {
            return Err(Error::InvalidSeries(
                "residual length does not match the event layout".into(),
            ));
        }
        if train_boundary != 0 && !event_ends.contains(&(train_boundary - 1)) {
            return Err(Error::InvalidSeries(format!(
                "train boundary {train_boundary} is not an event boundary"
            )));
        }
        Ok(Self {
            values,
            event_ends,
            train_boundary,
        })
    }

    pub fn n_events(&self) -> usize {
        self.event_ends.len()
    }

    pub fn event_range(&self, event: usize) -> std::ops::Range<usize> {
        let start = if event == 0 { 0 } else { self.event_ends[event - 1] + 1 };
        start..self.event_ends[event] + 1
    }

    /// Index of the first event lying in the test region.
    pub fn first_test_event(&self) -> usize {
        self.event_ends
            .iter()
            .position(|&e| e >= self.train_boundary)
            .unwrap_or(self.event_ends.len())
    }

    pub fn train_max(&self) -> f64 {
        self.values[..self.train_boundary]
            .iter()
            .map(|v| v.as_f64().abs())
            .fold(0.0, f64::max)
    }

    /// Same residuals with every value multiplied by `factor`.
    pub fn scaled(&self, factor: T) -> Self {
        Self {
            values: self.values.iter().map(|&v| v * factor).collect(),
            ..self.clone()
        }
    }
}

/// `y - ŷ` for every sample of a (normalized) series.
///
/// `train_boundary` is the number of leading samples used for training.
pub fn residual_series<T: Scalar>(
    net: &Network<T>,
    series: &EventSeries<T>,
    train_boundary: usize,
) -> Result<ResidualSeries<T>> {
    if net.spec().input_dim != 1 || net.spec().output_dim != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: net.spec().input_dim.max(net.spec().output_dim),
            context: "regressor over a single-channel series needs 1 input and 1 output",
        });
    }
    let pred = net.predict_scalar_series(series.input())?;
    let values = series
        .output()
        .iter()
        .zip(&pred)
        .map(|(&y, &p)| y - p)
        .collect();
    ResidualSeries::new(values, series.event_ends().to_vec(), train_boundary)
}

/// Reconstruction residuals for an autoencoder over output-channel windows:
/// each sample gets the mean absolute reconstruction error of the windows
/// covering it.
pub fn autoencoder_residual_series<T: Scalar>(
    net: &Network<T>,
    series: &EventSeries<T>,
    stride: usize,
    train_boundary: usize,
) -> Result<ResidualSeries<T>> {
    if net.spec().mode != Mode::Autoencoder {
        return Err(Error::InvalidArgument("network is not an autoencoder".into()));
    }
    let cfg = WindowConfig {
        width: net.spec().input_dim,
        stride,
        cover_tail: true,
    };
    let (windows, starts) = cfg.apply(series.output())?;
    let recon = net.forward(windows.view())?;
    let err: Array2<T> = (&windows - &recon).mapv(|v| v.abs());
    let values = crate::timeseries::dewindow(err.view(), &starts, series.len())?;
    ResidualSeries::new(values, series.event_ends().to_vec(), train_boundary)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventStats {
    pub event: usize,
    pub max_abs: f64,
    pub mean_abs: f64,
    pub mse: f64,
}

pub fn per_event_stats<T: Scalar>(res: &ResidualSeries<T>) -> Vec<EventStats> {
    (0..res.n_events())
        .map(|event| {
            let r = res.event_range(event);
            let n = r.len() as f64;
            let vals = &res.values[r];
            EventStats {
                event,
                max_abs: vals.iter().map(|v| v.as_f64().abs()).fold(0.0, f64::max),
                mean_abs: vals.iter().map(|v| v.as_f64().abs()).sum::<f64>() / n,
                mse: vals.iter().map(|v| v.as_f64().powi(2)).sum::<f64>() / n,
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventRatio {
    pub event: usize,
    pub max_abs: f64,
    pub ratio: f64,
    pub test: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnomalyReport {
    pub train_max: f64,
    /// `train_max` in raw output units, when the normalizer is known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_max_raw: Option<f64>,
    pub per_event: Vec<EventRatio>,
    pub ratio_threshold: f64,
    pub flagged_events: BTreeSet<usize>,
    pub model_fingerprint: String,
}

impl AnomalyReport {
    pub fn n_events(&self) -> usize {
        self.per_event.len()
    }

    /// Largest ratio over the test events.
    pub fn max_test_ratio(&self) -> f64 {
        self.per_event
            .iter()
            .filter(|e| e.test)
            .map(|e| e.ratio)
            .fold(0.0, f64::max)
    }

    pub fn ratio_of(&self, event: usize) -> Option<f64> {
        self.per_event.get(event).map(|e| e.ratio)
    }

    pub fn with_fingerprint(mut self, fingerprint: impl Into<String>) -> Self {
        self.model_fingerprint = fingerprint.into();
        self
    }

    /// Records the training envelope in raw units (one normalized unit is
    /// `output_scale` raw units).
    pub fn with_raw_scale(mut self, output_scale: f64) -> Self {
        self.train_max_raw = Some(self.train_max * output_scale);
        self
    }
}

/// Flags the test events whose max |residual| reaches
/// `ratio_threshold * train_max`.
pub fn detect<T: Scalar>(res: &ResidualSeries<T>, ratio_threshold: f64) -> Result<AnomalyReport> {
    if res.train_boundary == 0 {
        return Err(Error::InvalidArgument("training region is empty".into()));
    }
    if !(ratio_threshold > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "ratio_threshold must be positive, got {ratio_threshold}"
        )));
    }
    let train_max = res.train_max();
    if !(train_max > 0.0) || !train_max.is_finite() {
        return Err(Error::Degenerate(format!(
            "training residual envelope is {train_max}; a perfect fit usually means leakage"
        )));
    }
    let first_test = res.first_test_event();
    let per_event: Vec<EventRatio> = per_event_stats(res)
        .into_iter()
        .map(|s| EventRatio {
            event: s.event,
            max_abs: s.max_abs,
            ratio: s.max_abs / train_max,
            test: s.event >= first_test,
        })
        .collect();
    let flagged_events = per_event
        .iter()
        .filter(|e| e.test && e.ratio >= ratio_threshold)
        .map(|e| e.event)
        .collect();
    Ok(AnomalyReport {
        train_max,
        train_max_raw: None,
        per_event,
        ratio_threshold,
        flagged_events,
        model_fingerprint: String::new(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsensusReport {
    pub runs: Vec<AnomalyReport>,
    pub quorum: f64,
    /// Votes needed for consensus, `ceil(quorum * K)`.
    pub required_votes: usize,
    pub votes: Vec<usize>,
    pub consensus_events: BTreeSet<usize>,
    pub artefact_events: BTreeSet<usize>,
}

/// Votes across independently trained runs. Events flagged by at least
/// `ceil(quorum * K)` runs are anomalies; events flagged less often are
/// artefacts.
pub fn consensus(reports: &[AnomalyReport], quorum: f64) -> Result<ConsensusReport> {
    if reports.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "consensus needs at least 2 runs, got {}",
            reports.len()
        )));
    }
    if !(quorum > 0.0 && quorum <= 1.0) {
        return Err(Error::InvalidArgument(format!("quorum must lie in (0, 1], got {quorum}")));
    }
    let n_events = reports[0].n_events();
    let first_test = reports[0].per_event.iter().position(|e| e.test);
    for r in &reports[1..] {
        if r.n_events() != n_events || r.per_event.iter().position(|e| e.test) != first_test {
            return Err(Error::InvalidArgument(
                "reports cover different event structures".into(),
            ));
        }
    }
    let k = reports.len();
    // guard against q*K landing a hair above an integer
    let required_votes = ((quorum * k as f64) - 1e-9).ceil().max(1.0) as usize;
    let mut votes = vec![0usize; n_events];
    for r in reports {
        for &e in &r.flagged_events {
            votes[e] += 1;
        }
    }
    let consensus_events = (0..n_events).filter(|&e| votes[e] >= required_votes).collect();
    let artefact_events = (0..n_events)
        .filter(|&e| votes[e] > 0 && votes[e] < required_votes)
        .collect();
    Ok(ConsensusReport {
        runs: reports.to_vec(),
        quorum,
        required_votes,
        votes,
        consensus_events,
        artefact_events,
    })
}
