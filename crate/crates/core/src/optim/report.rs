use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::network::Loss;
use crate::{Error, Result, Scalar};

pub const TRAIN_REPORT_FORMAT: &str = "lmad-train-report";
pub const TRAIN_REPORT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxEpochs,
    PatienceExhausted,
    LambdaOverflow,
    Converged,
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StopReason::MaxEpochs => "max_epochs",
            StopReason::PatienceExhausted => "patience_exhausted",
            StopReason::LambdaOverflow => "lambda_overflow",
            StopReason::Converged => "converged",
        })
    }
}

/// One epoch of training.
///
/// `step_size` is the damping λ after the epoch for LM, the learning rate
/// for ADAM/SGDM and the mean per-parameter step for Rprop. The SSE fields
/// are only filled by LM and refer to that epoch's training subset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub step_size: f64,
    pub accepted: bool,
    #[serde(default)]
    pub rejections: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sse_before: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sse_after: Option<f64>,
}

/// Outcome of a training run. Losses are in the monitoring loss; the
/// network is left holding `best_params`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TrainReport<T: Scalar> {
    pub optimizer: String,
    pub monitor_loss: Loss,
    pub epoch_history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub final_train_loss: f64,
    pub stop_reason: StopReason,
    pub wall_time: f64,
    pub best_params: Vec<T>,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct ReportDoc<T: Scalar> {
    format: String,
    version: u32,
    #[serde(flatten)]
    report: TrainReport<T>,
}

impl<T: Scalar> TrainReport<T> {
    pub fn epochs_run(&self) -> usize {
        self.epoch_history.len()
    }

    /// Equality ignoring wall-clock time.
    pub fn same_run(&self, other: &Self) -> bool {
        let mut a = self.clone();
        a.wall_time = other.wall_time;
        &a == other
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ReportDoc {
            format: TRAIN_REPORT_FORMAT.into(),
            version: TRAIN_REPORT_VERSION,
            report: self.clone(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ReportDoc<T> = serde_json::from_str(text)?;
        if doc.format != TRAIN_REPORT_FORMAT || doc.version != TRAIN_REPORT_VERSION {
            return Err(Error::Format(format!(
                "expected {TRAIN_REPORT_FORMAT} v{TRAIN_REPORT_VERSION}, found {} v{}",
                doc.format, doc.version
            )));
        }
        Ok(doc.report)
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
