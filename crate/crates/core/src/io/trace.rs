//! CSV logs for learning traces and restoration runs.

use std::path::Path;

use super::write_atomic;
use crate::error::{Error, Result};
use crate::learning::LearnTrace;
use crate::restoration::HqsStep;

fn finish(writer: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    writer
        .into_inner()
        .map_err(|e| Error::Internal(format!("csv buffer: {e}")))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Internal(format!("csv encoding: {e}"))
}

/// Columns `epoch,objective,param_norm`, plus `seconds` when `timing` is
/// set. Wall-clock time is opt-in so that seeded runs stay byte-identical.
pub fn trace_csv(trace: &LearnTrace, timing: bool) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["epoch", "objective", "param_norm"];
    if timing {
        header.push("seconds");
    }
    w.write_record(&header).map_err(csv_err)?;
    for r in &trace.epochs {
        let mut row = vec![r.epoch.to_string(), r.objective.to_string(), r.param_norm.to_string()];
        if timing {
            row.push(format!("{:.6}", r.seconds));
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    finish(w)
}

pub fn write_trace_csv(path: impl AsRef<Path>, trace: &LearnTrace, timing: bool) -> Result<()> {
    write_atomic(path, &trace_csv(trace, timing)?)
}

/// Columns `step,beta,objective,psnr`; `psnr` is empty without a clean
/// reference.
pub fn hqs_log_csv(steps: &[HqsStep]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["step", "beta", "objective", "psnr"]).map_err(csv_err)?;
    for (k, s) in steps.iter().enumerate() {
        w.write_record([
            k.to_string(),
            s.beta.to_string(),
            s.objective.to_string(),
            s.psnr.map_or(String::new(), |p| format!("{p:.4}")),
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}

pub fn write_hqs_log(path: impl AsRef<Path>, steps: &[HqsStep]) -> Result<()> {
    write_atomic(path, &hqs_log_csv(steps)?)
}
