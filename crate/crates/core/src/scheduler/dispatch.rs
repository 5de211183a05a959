use std::collections::HashSet;

use super::{SchedulerConfig, SplitMode};
use crate::hardware::AffineLatency;
use crate::planner::{MappingEntry, MappingSet};
use crate::representations::RepresentationKind;
use crate::workload::Query;
use crate::{Error, Result};

/// Paths tried in order before falling back to tables. Select sits between
/// DHE and table in accuracy and is tried last.
const ADMISSION_ORDER: [RepresentationKind; 3] = [
    RepresentationKind::Hybrid,
    RepresentationKind::Dhe,
    RepresentationKind::Select,
];

/// Lane availability per platform, in mapping platform order.
#[derive(Debug, Clone, PartialEq)]
pub struct QueueState {
    lanes: Vec<Vec<f64>>,
    seen_shapes: HashSet<(usize, u32)>,
}

impl QueueState {
    /// All lanes idle at time zero.
    pub fn new(mapping: &MappingSet) -> Self {
        Self {
            lanes: mapping
                .platforms
                .iter()
                .map(|p| vec![0.0; p.parallel_lanes])
                .collect(),
            seen_shapes: HashSet::new(),
        }
    }

    /// A frozen state from explicit lane free times (ms), one list per platform.
    pub fn from_lane_free_times(lanes: Vec<Vec<f64>>) -> Self {
        Self {
            lanes,
            seen_shapes: HashSet::new(),
        }
    }

    pub fn lane_free_times(&self, platform: usize) -> &[f64] {
        &self.lanes[platform]
    }

    /// Time a query arriving at `now` waits before a lane frees up.
    pub fn wait_ms(&self, platform: usize, now: f64) -> f64 {
        let earliest = self.lanes[platform]
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        (earliest - now).max(0.0)
    }

    /// Occupies the earliest free lane; returns `(start, completion)`.
    pub(crate) fn occupy(&mut self, platform: usize, now: f64, service_ms: f64) -> (f64, f64) {
        let lanes = &mut self.lanes[platform];
        let (lane, free) = lanes
            .iter()
            .copied()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .expect("platforms have at least one lane");
        let start = free.max(now);
        let completion = start + service_ms;
        lanes[lane] = completion;
        (start, completion)
    }

    fn penalty_pending(&self, entry: usize, size: u32) -> bool {
        !self.seen_shapes.contains(&(entry, size))
    }

    pub(crate) fn mark_seen(&mut self, entry: usize, size: u32) {
        self.seen_shapes.insert((entry, size));
    }
}

/// The latency model a path runs under given the enabled caches.
pub fn effective_latency(entry: &MappingEntry, cfg: &SchedulerConfig) -> AffineLatency {
    if cfg.decoder_cache_enabled && entry.kind.uses_compute_stack() {
        entry.latency.decoder_cached()
    } else {
        entry.latency
    }
}

pub(crate) fn effective_hit(entry: &MappingEntry, cfg: &SchedulerConfig, hit_fraction: f64) -> f64 {
    if cfg.encoder_cache_enabled && entry.kind.uses_compute_stack() {
        hit_fraction
    } else {
        0.0
    }
}

pub(crate) fn service_estimate(
    mapping: &MappingSet,
    entry: usize,
    state: &QueueState,
    n: u32,
    hit_fraction: f64,
    cfg: &SchedulerConfig,
) -> Result<f64> {
    let e = &mapping.entries[entry];
    let platform = mapping
        .platform_index(&e.platform)
        .ok_or_else(|| Error::Config(format!("unknown platform `{}`", e.platform)))?;
    let mut service = effective_latency(e, cfg).estimate(n, effective_hit(e, cfg, hit_fraction));
    if let Some(p) = mapping.platforms[platform].recompile_penalty_ms {
        if state.penalty_pending(entry, n) {
            service += p;
        }
    }
    Ok(service)
}

/// Queue wait on the entry's platform plus its estimated service time.
pub fn predicted_completion(
    mapping: &MappingSet,
    entry: usize,
    state: &QueueState,
    now: f64,
    n: u32,
    hit_fraction: f64,
    cfg: &SchedulerConfig,
) -> Result<f64> {
    let e = &mapping.entries[entry];
    let platform = mapping
        .platform_index(&e.platform)
        .ok_or_else(|| Error::Config(format!("unknown platform `{}`", e.platform)))?;
    Ok(state.wait_ms(platform, now)
        + service_estimate(mapping, entry, state, n, hit_fraction, cfg)?)
}

/// Picks the entry index serving `query`.
///
/// Within a kind, the admissible path with the earliest predicted completion
/// wins; ties go to the earlier platform, then the earlier entry.
pub fn dispatch(
    query: &Query,
    mapping: &MappingSet,
    state: &QueueState,
    cfg: &SchedulerConfig,
    expected_hit: f64,
) -> Result<usize> {
    if mapping.entries.is_empty() {
        return Err(Error::NoPaths);
    }
    let estimates = mapping
        .entries
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let completion = predicted_completion(
                mapping,
                i,
                state,
                query.arrival_ms,
                query.size,
                expected_hit,
                cfg,
            )?;
            let platform = mapping.platform_index(&e.platform).unwrap_or(usize::MAX);
            Ok((i, e.kind, platform, completion))
        })
        .collect::<Result<Vec<_>>>()?;

    let best = |pred: &dyn Fn(RepresentationKind, f64) -> bool| {
        estimates
            .iter()
            .filter(|(_, kind, _, c)| pred(*kind, *c))
            .min_by(|a, b| a.3.total_cmp(&b.3).then(a.2.cmp(&b.2)).then(a.0.cmp(&b.0)))
            .map(|e| e.0)
    };

    for kind in ADMISSION_ORDER {
        if let Some(i) = best(&|k, c| k == kind && c <= cfg.t_sla_ms) {
            return Ok(i);
        }
    }
    if let Some(i) = best(&|k, _| k == RepresentationKind::Table) {
        return Ok(i);
    }
    best(&|_, _| true).ok_or(Error::NoPaths)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubQuery {
    pub entry: usize,
    pub size: u32,
}

/// Sizes differing by at most one, larger parts first.
pub fn split_sizes(n: u32, parts: usize) -> Vec<u32> {
    let parts = parts.max(1) as u32;
    let base = n / parts;
    let extra = n % parts;
    (0..parts).map(|i| base + u32::from(i < extra)).collect()
}

/// Chooses a representation as [`dispatch`] does and, in even-split mode,
/// spreads the query over every platform holding that representation.
/// Zero-sized parts are dropped.
pub fn split_dispatch(
    query: &Query,
    mapping: &MappingSet,
    state: &QueueState,
    cfg: &SchedulerConfig,
    expected_hit: f64,
) -> Result<Vec<SubQuery>> {
    let chosen = dispatch(query, mapping, state, cfg, expected_hit)?;
    if cfg.split_mode == SplitMode::Off {
        return Ok(vec![SubQuery {
            entry: chosen,
            size: query.size,
        }]);
    }
    let rep = &mapping.entries[chosen].rep_id;
    let mut holders: Vec<usize> = Vec::new();
    for p in &mapping.platforms {
        if let Some(i) = mapping
            .entries
            .iter()
            .position(|e| &e.rep_id == rep && e.platform == p.name)
        {
            holders.push(i);
        }
    }
    if holders.len() < 2 {
        return Ok(vec![SubQuery {
            entry: chosen,
            size: query.size,
        }]);
    }
    let sizes = split_sizes(query.size, holders.len());
    Ok(holders
        .into_iter()
        .zip(sizes)
        .filter(|(_, s)| *s > 0)
        .map(|(entry, size)| SubQuery { entry, size })
        .collect())
}
