//! Online stage: per-query path activation and the serving simulator.
//!
//! A query is offered to the mapped paths in accuracy order: the first hybrid
//! path whose predicted completion (current queue wait plus estimated service
//! time) meets the SLA wins, then the first such DHE path; otherwise the table
//! path with the earliest predicted completion is used even if it misses the
//! SLA.

mod dispatch;
mod sim;
#[cfg(test)]
pub(crate) mod testing;

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

pub use dispatch::{
    dispatch, effective_latency, predicted_completion, split_dispatch, split_sizes, QueueState,
    SubQuery,
};
pub use sim::{simulate, EncoderCacheModel, EWMA_HALF_LIFE_QUERIES};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    #[default]
    Off,
    /// Spread a query's samples evenly over every platform holding the chosen representation.
    EvenSplit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchedulerConfig {
    pub t_sla_ms: f64,
    pub target_qps: f64,
    #[serde(default)]
    pub split_mode: SplitMode,
    #[serde(default)]
    pub decoder_cache_enabled: bool,
    #[serde(default)]
    pub encoder_cache_enabled: bool,
}

impl SchedulerConfig {
    pub fn new(t_sla_ms: f64, target_qps: f64) -> Self {
        Self {
            t_sla_ms,
            target_qps,
            split_mode: SplitMode::Off,
            decoder_cache_enabled: false,
            encoder_cache_enabled: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_sla_ms <= 0.0 || !self.t_sla_ms.is_finite() {
            return Err(Error::Config("scheduler: t_sla_ms must be positive".into()));
        }
        if self.target_qps <= 0.0 || !self.target_qps.is_finite() {
            return Err(Error::Config(
                "scheduler: target_qps must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Outcome of one simulated query.
///
/// Only the eight public wire fields are serialized; `size` and `arrival_ms`
/// ride along in memory for reporting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub id: u64,
    pub path_rep: String,
    pub path_platform: String,
    pub wait_ms: f64,
    pub service_ms: f64,
    pub latency_ms: f64,
    pub sla_violated: bool,
    pub accuracy_weight: f64,
    #[serde(skip)]
    pub size: u32,
    #[serde(skip)]
    pub arrival_ms: f64,
}

impl TraceRecord {
    pub fn path_key(&self) -> String {
        format!("{}@{}", self.path_rep, self.path_platform)
    }

    pub fn completion_ms(&self) -> f64 {
        self.arrival_ms + self.latency_ms
    }
}

/// Fraction of queries served by each `rep@platform` path.
pub fn switching_breakdown(records: &[TraceRecord]) -> BTreeMap<String, f64> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for r in records {
        *counts.entry(r.path_key()).or_default() += 1;
    }
    let total = records.len() as f64;
    counts
        .into_iter()
        .map(|(k, c)| (k, c as f64 / total))
        .collect()
}

pub fn write_records_jsonl<W: Write>(mut w: W, records: &[TraceRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records_jsonl<R: BufRead>(r: R) -> Result<Vec<TraceRecord>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}
