//! Benchmark harness for protean range filters.
//!
//! The library half holds everything the CLI does, so integration tests can
//! drive evaluations, sweeps and the shifting-workload simulation without a
//! subprocess.

pub mod eval;
pub mod plot;
pub mod report;
pub mod shift;

use protean::cpfpr::ModelError;
use protean::filters::FilterError;
use protean::workloads::WorkloadError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error("false negative on non-empty query {query} with design {design}")]
    FalseNegative { query: String, design: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Usage(String),
}

pub use eval::{evaluate, Dataset, Evaluation};
pub use report::ReportRow;
