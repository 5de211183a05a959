//! End-to-end runs: plan, simulate the multi-path policy, and replay every
//! single-path deployment on the same trace for comparison.

use std::sync::Arc;

use crate::config::RunConfig;
use crate::metrics::SimulationReport;
use crate::mpcache::build_hot_set;
use crate::planner::{plan, CandidatePool, MappingSet};
use crate::scheduler::{simulate, EncoderCacheModel, TraceRecord};
use crate::workload::{gen_id_trace, Query, ZipfSampler};
use crate::{Error, Result};

/// Name of the multi-path policy in reports.
pub const MULTI_PATH_POLICY: &str = "multi-path";

pub fn plan_config(cfg: &RunConfig) -> MappingSet {
    plan(
        &cfg.platforms,
        &CandidatePool::from_specs(&cfg.representations),
    )
}

/// Hot set built from the config's profiling trace, with the hit rate it
/// achieves on that trace as the scheduler's starting estimate.
pub fn encoder_model(cfg: &RunConfig) -> Result<Option<EncoderCacheModel>> {
    let Some(enc) = &cfg.cache.encoder else {
        return Ok(None);
    };
    let trace = gen_id_trace(&cfg.workload)?;
    let cache = build_hot_set(&trace, enc, |_| ())?;
    let initial_hit_rate = if trace.is_empty() {
        0.0
    } else {
        trace.iter().filter(|id| cache.contains(**id)).count() as f64 / trace.len() as f64
    };
    let ids = Arc::new(ZipfSampler::new(
        cfg.workload.id_universe,
        cfg.workload.zipf_s,
    )?);
    Ok(Some(EncoderCacheModel {
        cache,
        ids,
        initial_hit_rate,
    }))
}

/// Every mapping entry must name a configured platform and representation,
/// and every query must fit the workload's size bound.
pub fn check_inputs(cfg: &RunConfig, mapping: &MappingSet, queries: &[Query]) -> Result<()> {
    mapping.validate()?;
    for e in &mapping.entries {
        if !cfg.platforms.iter().any(|p| p.name == e.platform) {
            return Err(Error::Config(format!(
                "mapping names platform `{}`, which the config does not define",
                e.platform
            )));
        }
        if !cfg.representations.iter().any(|r| r.id == e.rep_id) {
            return Err(Error::Config(format!(
                "mapping names representation `{}`, which the config does not define",
                e.rep_id
            )));
        }
    }
    for q in queries {
        if q.size == 0 || q.size > cfg.workload.max_size {
            return Err(Error::Config(format!(
                "trace query {} has size {} outside 1..={}",
                q.id, q.size, cfg.workload.max_size
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct PolicyRun {
    pub records: Vec<TraceRecord>,
    pub report: SimulationReport,
}

pub struct Experiment<'a> {
    cfg: &'a RunConfig,
    encoder: Option<EncoderCacheModel>,
}

impl<'a> Experiment<'a> {
    pub fn new(cfg: &'a RunConfig) -> Result<Self> {
        Ok(Self {
            cfg,
            encoder: encoder_model(cfg)?,
        })
    }

    pub fn encoder(&self) -> Option<&EncoderCacheModel> {
        self.encoder.as_ref()
    }

    pub fn run(&self, policy: &str, mapping: &MappingSet, queries: &[Query]) -> Result<PolicyRun> {
        check_inputs(self.cfg, mapping, queries)?;
        let records = simulate(
            queries,
            mapping,
            &self.cfg.scheduler,
            self.encoder.as_ref(),
            self.cfg.workload.seed,
        )?;
        let report = SimulationReport::from_records(policy, &records, self.cfg.scheduler.t_sla_ms)?;
        Ok(PolicyRun { records, report })
    }

    /// One run per mapping entry with that entry as the only path, in mapping
    /// order. Policies are named `static:<rep>@<platform>`.
    pub fn baselines(&self, mapping: &MappingSet, queries: &[Query]) -> Result<Vec<PolicyRun>> {
        (0..mapping.entries.len())
            .map(|i| {
                let single = mapping.single_path(i).expect("index in range");
                let e = &mapping.entries[i];
                self.run(
                    &format!("static:{}@{}", e.rep_id, e.platform),
                    &single,
                    queries,
                )
            })
            .collect()
    }
}
