//! Logical-time serving simulation.
//!
//! Every platform is a FIFO multi-server queue with `parallel_lanes` servers.
//! Queries are processed in arrival order; since service times are known at
//! dispatch, each query can be bound to the earliest free lane of its platform
//! on arrival, which reproduces FIFO service exactly.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::dispatch::{service_estimate, split_dispatch, QueueState};
use super::{SchedulerConfig, TraceRecord};
use crate::mpcache::EncoderCache;
use crate::planner::MappingSet;
use crate::workload::{Query, ZipfSampler};
use crate::{Error, Result};

/// Half-life, in queries, of the running encoder-cache hit rate used for admission.
pub const EWMA_HALF_LIFE_QUERIES: f64 = 256.0;

/// What the simulator needs to play the encoder cache: the hot set, the id
/// distribution each sample draws from, and the hit rate assumed before any
/// query has been observed.
#[derive(Debug, Clone)]
pub struct EncoderCacheModel {
    pub cache: EncoderCache<()>,
    pub ids: Arc<ZipfSampler>,
    pub initial_hit_rate: f64,
}

struct HitTracker {
    cache: EncoderCache<()>,
    ids: Arc<ZipfSampler>,
    rng: ChaCha8Rng,
    expected: f64,
    alpha: f64,
    batch: Vec<u64>,
}

impl HitTracker {
    fn new(model: &EncoderCacheModel, seed: u64) -> Self {
        Self {
            cache: model.cache.clone(),
            ids: Arc::clone(&model.ids),
            rng: ChaCha8Rng::seed_from_u64(seed),
            expected: model.initial_hit_rate.clamp(0.0, 1.0),
            alpha: 1.0 - 0.5f64.powf(1.0 / EWMA_HALF_LIFE_QUERIES),
            batch: Vec::new(),
        }
    }

    /// Draws the ids of the next query. Drawn for every query so the id stream
    /// stays aligned across policies.
    fn draw(&mut self, n: u32) {
        self.batch.clear();
        for _ in 0..n {
            let id = self.ids.sample(&mut self.rng);
            self.batch.push(id);
        }
    }

    /// Serves the drawn ids through the cache and folds the realized hit rate
    /// into the running estimate.
    fn serve(&mut self) -> f64 {
        if self.batch.is_empty() {
            return 0.0;
        }
        let mut hits = 0usize;
        for &id in &self.batch {
            if self.cache.lookup_or_fill(id, |_| ()).1 {
                hits += 1;
            }
        }
        let realized = hits as f64 / self.batch.len() as f64;
        self.expected += self.alpha * (realized - self.expected);
        realized
    }
}

/// Runs `queries` through `mapping`. Deterministic in its inputs; `seed` only
/// drives the per-sample id draws used to play the encoder cache.
pub fn simulate(
    queries: &[Query],
    mapping: &MappingSet,
    cfg: &SchedulerConfig,
    encoder: Option<&EncoderCacheModel>,
    seed: u64,
) -> Result<Vec<TraceRecord>> {
    cfg.validate()?;
    if queries
        .windows(2)
        .any(|w| w[1].arrival_ms < w[0].arrival_ms)
    {
        return Err(Error::Simulation(
            "queries must be sorted by arrival".into(),
        ));
    }
    if queries.is_empty() {
        return Ok(Vec::new());
    }
    if mapping.entries.is_empty() {
        return Err(Error::NoPaths);
    }
    let platform_of: Vec<usize> = mapping
        .entries
        .iter()
        .map(|e| {
            mapping.platform_index(&e.platform).ok_or_else(|| {
                Error::Config(format!(
                    "entry `{}` names unknown platform `{}`",
                    e.rep_id, e.platform
                ))
            })
        })
        .collect::<Result<_>>()?;

    let mut state = QueueState::new(mapping);
    let mut tracker = encoder
        .filter(|_| cfg.encoder_cache_enabled)
        .map(|m| HitTracker::new(m, seed));
    let mut records = Vec::with_capacity(queries.len());

    for q in queries {
        if q.size == 0 {
            return Err(Error::Simulation(format!("query {} has size 0", q.id)));
        }
        let expected_hit = tracker.as_ref().map_or(0.0, |t| t.expected);
        if let Some(t) = tracker.as_mut() {
            t.draw(q.size);
        }
        let parts = split_dispatch(q, mapping, &state, cfg, expected_hit)?;
        let lead = &mapping.entries[parts[0].entry];
        let realized_hit = match tracker.as_mut() {
            Some(t) if lead.kind.uses_compute_stack() => t.serve(),
            _ => 0.0,
        };

        let mut last: Option<(f64, f64, f64, usize)> = None;
        for part in &parts {
            let service =
                service_estimate(mapping, part.entry, &state, part.size, realized_hit, cfg)?;
            state.mark_seen(part.entry, part.size);
            let (start, completion) = state.occupy(platform_of[part.entry], q.arrival_ms, service);
            let wait = start - q.arrival_ms;
            if last.is_none_or(|l| completion > l.0) {
                last = Some((completion, wait, service, part.entry));
            }
        }
        let (_, wait_ms, service_ms, entry) = last.expect("at least one part");
        let e = &mapping.entries[entry];
        let latency_ms = wait_ms + service_ms;
        records.push(TraceRecord {
            id: q.id,
            path_rep: e.rep_id.clone(),
            path_platform: e.platform.clone(),
            wait_ms,
            service_ms,
            latency_ms,
            sla_violated: latency_ms > cfg.t_sla_ms,
            accuracy_weight: e.accuracy,
            size: q.size,
            arrival_ms: q.arrival_ms,
        });
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mpcache::{build_hot_set, CachePolicy, EncoderCacheConfig};
    use crate::planner::MappingSet;
    use crate::representations::RepresentationKind;
    use crate::scheduler::testing::{entry, query, slot, three_paths};

    fn table_only(lanes: usize, fixed: f64, per: f64) -> MappingSet {
        MappingSet {
            platforms: vec![slot("cpu", lanes)],
            entries: vec![entry("tbl", RepresentationKind::Table, "cpu", fixed, per)],
        }
    }

    #[test]
    fn idle_system_has_no_wait() {
        let m = table_only(1, 0.5, 0.01);
        let cfg = SchedulerConfig::new(10.0, 1000.0);
        let qs = vec![query(0, 0.0, 100), query(1, 100.0, 10)];
        let r = simulate(&qs, &m, &cfg, None, 0).unwrap();
        assert_eq!(r[0].wait_ms, 0.0);
        assert!((r[0].latency_ms - 1.5).abs() < 1e-12);
        assert!((r[1].latency_ms - 0.6).abs() < 1e-12);
    }

    #[test]
    fn simultaneous_arrivals_queue_on_one_lane() {
        let m = table_only(1, 2.0, 0.0);
        let cfg = SchedulerConfig::new(10.0, 1000.0);
        let qs = vec![query(0, 0.0, 1), query(1, 0.0, 1), query(2, 0.0, 1)];
        let r = simulate(&qs, &m, &cfg, None, 0).unwrap();
        assert_eq!(r[1].wait_ms, 2.0);
        assert_eq!(r[2].wait_ms, 4.0);
        let m2 = table_only(2, 2.0, 0.0);
        let r = simulate(&qs, &m2, &cfg, None, 0).unwrap();
        assert_eq!(r[1].wait_ms, 0.0);
        assert_eq!(r[2].wait_ms, 2.0);
    }

    #[test]
    fn violation_flag_matches_latency() {
        let m = table_only(1, 4.0, 0.0);
        let cfg = SchedulerConfig::new(10.0, 1000.0);
        let qs: Vec<_> = (0..5).map(|i| query(i, 0.0, 1)).collect();
        let r = simulate(&qs, &m, &cfg, None, 0).unwrap();
        for rec in &r {
            assert_eq!(rec.sla_violated, rec.latency_ms > 10.0);
        }
        assert_eq!(r.iter().filter(|r| r.sla_violated).count(), 3);
    }

    #[test]
    fn switches_under_load() {
        let m = three_paths(3.0, 2.0, 0.5);
        let cfg = SchedulerConfig::new(4.0, 1000.0);
        let qs: Vec<_> = (0..6).map(|i| query(i, 0.0, 1)).collect();
        let r = simulate(&qs, &m, &cfg, None, 0).unwrap();
        let paths: Vec<_> = r.iter().map(|r| r.path_rep.as_str()).collect();
        assert_eq!(paths[0], "hyb");
        assert!(paths.contains(&"tbl"));
    }

    #[test]
    fn unsorted_input_rejected() {
        let m = table_only(1, 1.0, 0.0);
        let cfg = SchedulerConfig::new(10.0, 1000.0);
        let qs = vec![query(0, 5.0, 1), query(1, 1.0, 1)];
        assert!(simulate(&qs, &m, &cfg, None, 0).is_err());
    }

    #[test]
    fn split_records_last_part() {
        let m = MappingSet {
            platforms: vec![slot("cpu", 1), slot("gpu", 1)],
            entries: vec![
                entry("tbl", RepresentationKind::Table, "cpu", 0.0, 1.0),
                entry("tbl", RepresentationKind::Table, "gpu", 0.0, 1.0),
            ],
        };
        let mut cfg = SchedulerConfig::new(100.0, 1000.0);
        cfg.split_mode = super::super::SplitMode::EvenSplit;
        let r = simulate(&[query(0, 0.0, 9)], &m, &cfg, None, 0).unwrap();
        assert_eq!(r[0].latency_ms, 5.0);
        assert_eq!(r[0].path_platform, "cpu");
    }

    fn cache_model() -> EncoderCacheModel {
        let ids = Arc::new(ZipfSampler::new(10_000, 1.0).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let trace: Vec<u64> = (0..20_000).map(|_| ids.sample(&mut rng)).collect();
        let cfg = EncoderCacheConfig {
            capacity_bytes: 1000 * 80,
            policy: CachePolicy::StaticTopk,
            d_out: 16,
        };
        let cache = build_hot_set(&trace, &cfg, |_| ()).unwrap();
        EncoderCacheModel {
            cache,
            ids,
            initial_hit_rate: 0.5,
        }
    }

    #[test]
    fn encoder_cache_shortens_compute_paths() {
        let mut e = entry("dhe", RepresentationKind::Dhe, "cpu", 0.1, 0.1);
        e.latency = e.latency.with_cache_hit(0.001);
        let m = MappingSet {
            platforms: vec![slot("cpu", 1)],
            entries: vec![e],
        };
        let qs: Vec<_> = (0..50).map(|i| query(i, i as f64 * 100.0, 64)).collect();
        let model = cache_model();
        let off = SchedulerConfig::new(100.0, 10.0);
        let mut on = off.clone();
        on.encoder_cache_enabled = true;
        let a = simulate(&qs, &m, &off, Some(&model), 1).unwrap();
        let b = simulate(&qs, &m, &on, Some(&model), 1).unwrap();
        let sa: f64 = a.iter().map(|r| r.service_ms).sum();
        let sb: f64 = b.iter().map(|r| r.service_ms).sum();
        assert!(sb < 0.8 * sa, "{sb} vs {sa}");
        assert_eq!(b, simulate(&qs, &m, &on, Some(&model), 1).unwrap());
    }
}
