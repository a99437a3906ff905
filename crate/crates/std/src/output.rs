//! Trace CSVs and JSON summaries.

use std::fmt::Write as _;
use std::path::Path;

use distopt_core::algorithms::AlgorithmKind;
use distopt_core::executor::{estimate_rate, RateEstimate, TraceRecord};
use serde::Serialize;

use crate::CliError;

pub const TRACE_HEADER: &str = "round,consensus_err,x_gap,f_gap,grad_norm,msgs,wall_ms";

/// Trailing number of trace records used for the rate fit.
pub const RATE_WINDOW: usize = 50;

fn push_row(out: &mut String, r: &TraceRecord) {
    let _ = writeln!(
        out,
        "{},{},{},{},{},{},{}",
        r.round, r.consensus_err, r.x_gap, r.f_gap, r.grad_norm, r.msgs, r.wall_ms
    );
}

pub fn trace_csv(trace: &[TraceRecord]) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for r in trace {
        push_row(&mut out, r);
    }
    out
}

/// Long format: one row per (label, recorded round).
pub fn merged_csv(traces: &[(String, Vec<TraceRecord>)]) -> String {
    let mut out = format!("algorithm,{TRACE_HEADER}\n");
    for (label, trace) in traces {
        for r in trace {
            out.push_str(label);
            out.push(',');
            push_row(&mut out, r);
        }
    }
    out
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    ConfigError,
    NumericalError,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub label: String,
    pub algorithm: AlgorithmKind,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub rounds: usize,
    pub converged: bool,
    #[serde(rename = "final", skip_serializing_if = "Option::is_none")]
    pub last: Option<TraceRecord>,
    pub messages_total: u64,
    /// Fit over the trailing records of `x_gap` (the penalized stationarity
    /// for NN-K, whose limit is not `x*`).
    pub rate: Option<RateEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate_note: Option<String>,
    pub optimum_value: Option<f64>,
}

/// Residual series the rate fit uses for `kind`.
pub fn rate_series(kind: AlgorithmKind, trace: &[TraceRecord]) -> Vec<f64> {
    trace
        .iter()
        .map(|r| {
            if kind.targets_penalized_problem() {
                r.stationarity
            } else {
                r.x_gap
            }
        })
        .collect()
}

pub fn rate_of(
    kind: AlgorithmKind,
    trace: &[TraceRecord],
) -> (Option<RateEstimate>, Option<String>) {
    match estimate_rate(&rate_series(kind, trace), RATE_WINDOW) {
        Ok(r) if r.excluded > 0 => (
            Some(r),
            Some(format!(
                "{} residuals at machine precision excluded",
                r.excluded
            )),
        ),
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let r = TraceRecord {
            round: 3,
            consensus_err: 0.5,
            x_gap: 1e-9,
            f_gap: 0.0,
            grad_norm: 2.0,
            stationarity: 2.0,
            msgs: 12,
            wall_ms: 0.0,
        };
        assert_eq!(
            trace_csv(&[r]),
            format!("{TRACE_HEADER}\n3,0.5,0.000000001,0,2,12,0\n")
        );
        assert!(
            merged_csv(&[("dgd".into(), vec![r])]).ends_with("dgd,3,0.5,0.000000001,0,2,12,0\n")
        );
    }
}
