//! Per-step iteration records and their CSV serialization.

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

/// One Newton step. `k = -1` marks phase-1 steps; `delta`, `xi` and the
/// residuals refer to the point before the step, `xi_after` to the point
/// after it at the same `mu`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRecord {
    pub k: i64,
    pub j: usize,
    pub mu: f64,
    pub delta: f64,
    pub xi: f64,
    #[serde(skip)]
    pub xi_after: f64,
    /// False for the homotopy-shifted phase-1 steps.
    #[serde(skip)]
    pub plain: bool,
    pub primal_res: f64,
    pub dual_res: f64,
    pub phi_norm: f64,
    pub time_s: f64,
}

pub const CSV_COLUMNS: [&str; 9] = ["k", "j", "mu", "delta", "xi", "primal_res", "dual_res", "phi_norm", "time_s"];

pub fn write_csv_to<W: std::io::Write>(records: &[TraceRecord], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    if records.is_empty() {
        wr.write_record(CSV_COLUMNS).map_err(csv_err)?;
    }
    for r in records {
        wr.serialize(r).map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_csv(records: &[TraceRecord], path: &Path) -> Result<()> {
    write_csv_to(records, std::fs::File::create(path)?)
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}
