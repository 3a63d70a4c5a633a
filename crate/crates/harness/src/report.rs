//! Report rows and their CSV form.

use std::io;
use std::path::Path;

use protean::filters::{DesignPoint, Family};
use serde::{Deserialize, Serialize};

use crate::HarnessError;

/// `ok`, or why the cell has no measurement.
pub const STATUS_OK: &str = "ok";
pub const STATUS_INFEASIBLE: &str = "infeasible";

/// One CSV row: a design evaluated on one workload.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub workload: String,
    pub family: String,
    pub bpk: f64,
    pub l1: Option<u32>,
    pub l2: Option<u32>,
    /// Bits to the short filter, in percent (two-filter designs only).
    pub split: Option<u64>,
    pub predicted_fpr: Option<f64>,
    pub observed_fpr: Option<f64>,
    pub mean_trie_probes: Option<f64>,
    pub mean_bloom_probes: Option<f64>,
    pub model_ms: Option<f64>,
    pub build_ms: Option<f64>,
    pub n_eval: u64,
    pub status: String,
}

impl ReportRow {
    /// A row for `design` with no measurements yet.
    pub fn for_design(workload: &str, design: DesignPoint, bpk: f64) -> Self {
        let (l1, l2) = match design {
            DesignPoint::Pbf1 { prefix_len } => (0, prefix_len),
            _ => design.lengths(),
        };
        ReportRow {
            workload: workload.to_string(),
            family: design.family().name().to_string(),
            bpk,
            l1: Some(l1),
            l2: Some(l2),
            split: design.split().map(|s| s.percent()),
            predicted_fpr: None,
            observed_fpr: None,
            mean_trie_probes: None,
            mean_bloom_probes: None,
            model_ms: None,
            build_ms: None,
            n_eval: 0,
            status: STATUS_OK.to_string(),
        }
    }

    /// A row recording that `family` produced no design.
    pub fn failed(workload: &str, family: Family, bpk: f64, status: String) -> Self {
        ReportRow {
            workload: workload.to_string(),
            family: family.name().to_string(),
            bpk,
            l1: None,
            l2: None,
            split: None,
            predicted_fpr: None,
            observed_fpr: None,
            mean_trie_probes: None,
            mean_bloom_probes: None,
            model_ms: None,
            build_ms: None,
            n_eval: 0,
            status,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == STATUS_OK
    }

    /// Clears wall-clock columns so output depends only on seeds and flags.
    pub fn without_timings(mut self) -> Self {
        self.model_ms = None;
        self.build_ms = None;
        self
    }
}

pub fn write_csv<W: io::Write>(out: W, rows: &[ReportRow]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_csv_file(path: &Path, rows: &[ReportRow]) -> Result<(), HarnessError> {
    let file = std::fs::File::create(path).map_err(csv::Error::from)?;
    write_csv(file, rows)
}

pub fn read_csv(path: &Path) -> Result<Vec<ReportRow>, HarnessError> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().collect::<Result<_, _>>().map_err(Into::into)
}
