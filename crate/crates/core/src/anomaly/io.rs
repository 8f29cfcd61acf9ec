use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AnomalyReport, ConsensusReport, ResidualSeries};
use crate::{Error, Result, Scalar};

pub const ANOMALY_REPORT_FORMAT: &str = "lmad-anomaly-report";
pub const CONSENSUS_REPORT_FORMAT: &str = "lmad-consensus-report";
pub const REPORT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Doc<R> {
    format: String,
    version: u32,
    #[serde(flatten)]
    report: R,
}

fn to_doc<R: Serialize>(format: &str, report: &R) -> Result<String> {
    Ok(serde_json::to_string_pretty(&Doc {
        format: format.to_string(),
        version: REPORT_VERSION,
        report,
    })?)
}

fn from_doc<R: for<'de> Deserialize<'de>>(format: &str, text: &str) -> Result<R> {
    let doc: Doc<R> = serde_json::from_str(text)?;
    if doc.format != format || doc.version != REPORT_VERSION {
        return Err(Error::Format(format!(
            "expected {format} v{REPORT_VERSION}, found {} v{}",
            doc.format, doc.version
        )));
    }
    Ok(doc.report)
}

fn save_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn load_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

impl AnomalyReport {
    pub fn to_json(&self) -> Result<String> {
        to_doc(ANOMALY_REPORT_FORMAT, self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        from_doc(ANOMALY_REPORT_FORMAT, text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        save_text(path.as_ref(), &self.to_json()?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&load_text(path.as_ref())?)
    }
}

impl ConsensusReport {
    pub fn to_json(&self) -> Result<String> {
        to_doc(CONSENSUS_REPORT_FORMAT, self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        from_doc(CONSENSUS_REPORT_FORMAT, text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        save_text(path.as_ref(), &self.to_json()?)
    }
}

/// Writes `index,residual,event,region` rows, region being `train` or `test`.
pub fn write_residual_csv<T: Scalar, W: Write>(res: &ResidualSeries<T>, writer: W) -> Result<()> {
    let csv_err = |e: csv::Error| Error::Csv { row: 0, message: e.to_string() };
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["index", "residual", "event", "region"]).map_err(csv_err)?;
    for event in 0..res.n_events() {
        for i in res.event_range(event) {
            let region = if i < res.train_boundary { "train" } else { "test" };
            wtr.write_record([
                i.to_string(),
                res.values[i].to_string(),
                event.to_string(),
                region.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    wtr.flush().map_err(|e| Error::Csv { row: 0, message: e.to_string() })
}

#[cfg(test)]
mod tests {
    use super::super::detect;
    use super::*;

    #[test]
    fn report_round_trip() {
        let r = ResidualSeries::new(vec![0.1f64, -0.2, 0.7], vec![1, 2], 2).unwrap();
        let rep = detect(&r, 2.0).unwrap().with_fingerprint("abc").with_raw_scale(3.0);
        let back = AnomalyReport::from_json(&rep.to_json().unwrap()).unwrap();
        assert_eq!(back, rep);
        let foreign = rep.to_json().unwrap().replace(ANOMALY_REPORT_FORMAT, "other");
        assert!(matches!(AnomalyReport::from_json(&foreign), Err(Error::Format(_))));
    }

    #[test]
    fn residual_csv_layout() {
        let r = ResidualSeries::new(vec![0.5f64, -0.25, 1.0], vec![1, 2], 2).unwrap();
        let mut buf = Vec::new();
        write_residual_csv(&r, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "index,residual,event,region\n0,0.5,0,train\n1,-0.25,0,train\n2,1,1,test\n"
        );
    }
}
