//! Evaluation metrics over trace records.
//!
//! Throughput of correct predictions weights every served sample by the
//! accuracy of the path that served it:
//! `Σ size_i · accuracy_i / span_seconds`, where the span runs from the first
//! arrival to the last completion on the simulated clock.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::scheduler::{switching_breakdown, TraceRecord};
use crate::{Error, Result};

/// Correct samples per second. Empty input yields 0.
pub fn throughput_correct(records: &[TraceRecord], span_seconds: f64) -> Result<f64> {
    if records.is_empty() {
        return Ok(0.0);
    }
    if span_seconds <= 0.0 || !span_seconds.is_finite() {
        return Err(Error::Parameter(format!(
            "span must be positive, got {span_seconds}"
        )));
    }
    let correct: f64 = records
        .iter()
        .map(|r| f64::from(r.size) * r.accuracy_weight)
        .sum();
    Ok(correct / span_seconds)
}

/// Fraction of records whose latency exceeds `t_sla_ms`. Empty input yields 0.
pub fn sla_violation_rate(records: &[TraceRecord], t_sla_ms: f64) -> f64 {
    if records.is_empty() {
        return 0.0;
    }
    let late = records.iter().filter(|r| r.latency_ms > t_sla_ms).count();
    late as f64 / records.len() as f64
}

/// Seconds from the first arrival to the last completion; 0 for empty input.
pub fn span_seconds(records: &[TraceRecord]) -> f64 {
    let first = records
        .iter()
        .map(|r| r.arrival_ms)
        .fold(f64::INFINITY, f64::min);
    let last = records
        .iter()
        .map(TraceRecord::completion_ms)
        .fold(f64::NEG_INFINITY, f64::max);
    if records.is_empty() {
        0.0
    } else {
        (last - first) / 1000.0
    }
}

/// Nearest-rank percentile of an ascending slice, `p` in (0, 100].
pub fn percentile_nearest_rank(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = (p / 100.0 * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Execution-time reduction from removing inter-node communication at the
/// price of extra local compute.
///
/// Relative to a run of length 1, the new run takes
/// `(1 - comm_fraction) + added_compute_fraction`; the reduction is one minus
/// that, clamped to [0, 1].
pub fn scaling_estimate(comm_fraction: f64, added_compute_fraction: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&comm_fraction) {
        return Err(Error::Parameter(format!(
            "communication fraction must be in [0, 1], got {comm_fraction}"
        )));
    }
    if added_compute_fraction < 0.0 || !added_compute_fraction.is_finite() {
        return Err(Error::Parameter(format!(
            "added compute fraction must be non-negative, got {added_compute_fraction}"
        )));
    }
    let new_time = (1.0 - comm_fraction) + added_compute_fraction;
    Ok((1.0 - new_time).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub policy: String,
    pub queries: usize,
    pub samples: u64,
    pub throughput_correct_predictions: f64,
    pub raw_throughput_qps: f64,
    pub raw_sample_throughput: f64,
    pub mean_latency_ms: f64,
    pub p95_latency_ms: f64,
    pub p99_latency_ms: f64,
    pub t_sla_ms: f64,
    pub sla_violation_rate: f64,
    pub span_seconds: f64,
    pub switching_breakdown: BTreeMap<String, f64>,
}

/// Column order of [`write_reports_csv`]. The breakdown column holds
/// `path=fraction` pairs joined by `;`, sorted by path.
pub const REPORT_CSV_COLUMNS: [&str; 13] = [
    "policy",
    "queries",
    "samples",
    "throughput_correct_predictions",
    "raw_throughput_qps",
    "raw_sample_throughput",
    "mean_latency_ms",
    "p95_latency_ms",
    "p99_latency_ms",
    "t_sla_ms",
    "sla_violation_rate",
    "span_seconds",
    "switching_breakdown",
];

impl SimulationReport {
    /// Summarizes `records`. An empty record list gives an all-zero report.
    pub fn from_records(policy: &str, records: &[TraceRecord], t_sla_ms: f64) -> Result<Self> {
        let span = span_seconds(records);
        let samples: u64 = records.iter().map(|r| u64::from(r.size)).sum();
        let mut lat: Vec<f64> = records.iter().map(|r| r.latency_ms).collect();
        lat.sort_by(f64::total_cmp);
        let per_second = |x: f64| if span > 0.0 { x / span } else { 0.0 };
        let correct = if span > 0.0 {
            throughput_correct(records, span)?
        } else {
            0.0
        };
        Ok(Self {
            policy: policy.to_string(),
            queries: records.len(),
            samples,
            throughput_correct_predictions: correct,
            raw_throughput_qps: per_second(records.len() as f64),
            raw_sample_throughput: per_second(samples as f64),
            mean_latency_ms: if lat.is_empty() {
                0.0
            } else {
                lat.iter().sum::<f64>() / lat.len() as f64
            },
            p95_latency_ms: percentile_nearest_rank(&lat, 95.0),
            p99_latency_ms: percentile_nearest_rank(&lat, 99.0),
            t_sla_ms,
            sla_violation_rate: sla_violation_rate(records, t_sla_ms),
            span_seconds: span,
            switching_breakdown: switching_breakdown(records),
        })
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    fn csv_row(&self) -> Vec<String> {
        let breakdown = self
            .switching_breakdown
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(";");
        vec![
            self.policy.clone(),
            self.queries.to_string(),
            self.samples.to_string(),
            self.throughput_correct_predictions.to_string(),
            self.raw_throughput_qps.to_string(),
            self.raw_sample_throughput.to_string(),
            self.mean_latency_ms.to_string(),
            self.p95_latency_ms.to_string(),
            self.p99_latency_ms.to_string(),
            self.t_sla_ms.to_string(),
            self.sla_violation_rate.to_string(),
            self.span_seconds.to_string(),
            breakdown,
        ]
    }
}

/// Header plus one row per report, columns as in [`REPORT_CSV_COLUMNS`].
pub fn write_reports_csv<W: Write>(w: W, reports: &[SimulationReport]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(REPORT_CSV_COLUMNS)?;
    for r in reports {
        out.write_record(r.csv_row())?;
    }
    out.flush()?;
    Ok(())
}
