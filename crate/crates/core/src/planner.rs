//! Offline stage: choose which representations live on which platform.
//!
//! For each platform in declared order the planner greedily adds the best
//! fitting hybrid, then the first table that still fits, then the best DHE
//! that still fits, and finally the compact DHE when the platform would
//! otherwise hold at most one path. "Best" means the largest encoder width `k`,
//! then the smaller footprint, then the smaller id.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::hardware::{fits, AffineLatency, PlatformProfile};
use crate::representations::{RepresentationKind, RepresentationSpec};
use crate::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CandidatePool {
    pub hybrid: Vec<RepresentationSpec>,
    pub table: Vec<RepresentationSpec>,
    pub dhe: Vec<RepresentationSpec>,
    /// Smallest-footprint DHE candidate.
    pub compact_dhe: Option<RepresentationSpec>,
}

impl CandidatePool {
    /// Sorts specs by kind, keeping declared order within each kind. Select
    /// specs are not planned and are dropped here.
    pub fn from_specs(specs: &[RepresentationSpec]) -> Self {
        let of = |kind| -> Vec<RepresentationSpec> {
            specs.iter().filter(|s| s.kind == kind).cloned().collect()
        };
        let dhe = of(RepresentationKind::Dhe);
        let compact_dhe = dhe
            .iter()
            .min_by(|a, b| {
                a.footprint_bytes()
                    .cmp(&b.footprint_bytes())
                    .then_with(|| a.id.cmp(&b.id))
            })
            .cloned();
        Self {
            hybrid: of(RepresentationKind::Hybrid),
            table: of(RepresentationKind::Table),
            dhe,
            compact_dhe,
        }
    }
}

fn accuracy_rank(a: &RepresentationSpec, b: &RepresentationSpec) -> Ordering {
    b.encoder_k()
        .cmp(&a.encoder_k())
        .then_with(|| a.footprint_bytes().cmp(&b.footprint_bytes()))
        .then_with(|| a.id.cmp(&b.id))
}

fn pick_k_maximal(
    candidates: &[RepresentationSpec],
    residual_bytes: u64,
) -> Option<&RepresentationSpec> {
    candidates
        .iter()
        .filter(|c| c.footprint_bytes() <= residual_bytes)
        .min_by(|a, b| accuracy_rank(a, b))
}

pub fn pick_hybrid(pool: &CandidatePool, residual_bytes: u64) -> Option<&RepresentationSpec> {
    pick_k_maximal(&pool.hybrid, residual_bytes)
}

pub fn pick_dhe(pool: &CandidatePool, residual_bytes: u64) -> Option<&RepresentationSpec> {
    pick_k_maximal(&pool.dhe, residual_bytes)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingEntry {
    pub rep_id: String,
    pub kind: RepresentationKind,
    pub platform: String,
    pub footprint_bytes: u64,
    pub accuracy: f64,
    pub latency: AffineLatency,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatformSlot {
    pub name: String,
    pub capacity_bytes: u64,
    pub used_bytes: u64,
    pub parallel_lanes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recompile_penalty_ms: Option<f64>,
}

/// Planner output: execution paths in insertion order plus per-platform usage.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MappingSet {
    pub platforms: Vec<PlatformSlot>,
    pub entries: Vec<MappingEntry>,
}

impl MappingSet {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn platform(&self, name: &str) -> Option<&PlatformSlot> {
        self.platforms.iter().find(|p| p.name == name)
    }

    pub fn platform_index(&self, name: &str) -> Option<usize> {
        self.platforms.iter().position(|p| p.name == name)
    }

    pub fn entries_on<'a>(
        &'a self,
        platform: &'a str,
    ) -> impl Iterator<Item = &'a MappingEntry> + 'a {
        self.entries.iter().filter(move |e| e.platform == platform)
    }

    pub fn total_bytes(&self) -> u64 {
        self.entries.iter().map(|e| e.footprint_bytes).sum()
    }

    /// A mapping holding only entry `index`: a static single-path deployment.
    pub fn single_path(&self, index: usize) -> Option<MappingSet> {
        let entry = self.entries.get(index)?.clone();
        let mut slot = self.platform(&entry.platform)?.clone();
        slot.used_bytes = entry.footprint_bytes;
        Some(MappingSet {
            platforms: vec![slot],
            entries: vec![entry],
        })
    }

    /// A mapping restricted to entries accepted by `keep`.
    pub fn filtered(&self, keep: impl Fn(&MappingEntry) -> bool) -> MappingSet {
        let entries: Vec<MappingEntry> = self.entries.iter().filter(|e| keep(e)).cloned().collect();
        let platforms = self
            .platforms
            .iter()
            .filter(|p| entries.iter().any(|e| e.platform == p.name))
            .map(|p| PlatformSlot {
                used_bytes: entries
                    .iter()
                    .filter(|e| e.platform == p.name)
                    .map(|e| e.footprint_bytes)
                    .sum(),
                ..p.clone()
            })
            .collect();
        MappingSet { platforms, entries }
    }

    /// Structural checks for a mapping read from disk.
    pub fn validate(&self) -> Result<()> {
        for p in &self.platforms {
            if p.parallel_lanes == 0 {
                return Err(Error::Config(format!(
                    "platform `{}` has zero lanes",
                    p.name
                )));
            }
            let used: u64 = self.entries_on(&p.name).map(|e| e.footprint_bytes).sum();
            if used != p.used_bytes {
                return Err(Error::Config(format!(
                    "platform `{}` reports {} used bytes but its entries sum to {used}",
                    p.name, p.used_bytes
                )));
            }
            if used > p.capacity_bytes {
                return Err(Error::Config(format!(
                    "platform `{}` is over capacity ({used} > {})",
                    p.name, p.capacity_bytes
                )));
            }
        }
        for e in &self.entries {
            if self.platform(&e.platform).is_none() {
                return Err(Error::Config(format!(
                    "entry `{}` names unknown platform `{}`",
                    e.rep_id, e.platform
                )));
            }
            e.latency.validate()?;
        }
        Ok(())
    }
}

pub fn plan(platforms: &[PlatformProfile], pool: &CandidatePool) -> MappingSet {
    let mut mapping = MappingSet::default();
    for platform in platforms {
        let mut used = 0u64;
        let mut held: Vec<&RepresentationSpec> = Vec::new();
        let servable = |s: &RepresentationSpec| platform.latency.contains_key(&s.kind);
        let restrict = |list: &[RepresentationSpec]| -> Vec<RepresentationSpec> {
            list.iter().filter(|s| servable(s)).cloned().collect()
        };
        let hybrids = restrict(&pool.hybrid);
        let dhes = restrict(&pool.dhe);

        let residual = |used: u64| platform.memory_capacity_bytes.saturating_sub(used);
        if let Some(h) = pick_k_maximal(&hybrids, residual(used)) {
            used += h.footprint_bytes();
            held.push(
                pool.hybrid
                    .iter()
                    .find(|s| s.id == h.id)
                    .expect("from pool"),
            );
        }
        if let Some(t) = pool
            .table
            .iter()
            .filter(|s| servable(s))
            .find(|t| fits(platform, t.footprint_bytes(), used))
        {
            used += t.footprint_bytes();
            held.push(t);
        }
        if let Some(d) = pick_k_maximal(&dhes, residual(used)) {
            used += d.footprint_bytes();
            held.push(pool.dhe.iter().find(|s| s.id == d.id).expect("from pool"));
        }
        if held.len() <= 1 {
            if let Some(c) = pool.compact_dhe.as_ref().filter(|c| servable(c)) {
                let already = held.iter().any(|h| h.id == c.id);
                if !already && fits(platform, c.footprint_bytes(), used) {
                    used += c.footprint_bytes();
                    held.push(c);
                }
            }
        }

        mapping.platforms.push(PlatformSlot {
            name: platform.name.clone(),
            capacity_bytes: platform.memory_capacity_bytes,
            used_bytes: used,
            parallel_lanes: platform.parallel_lanes,
            recompile_penalty_ms: platform.recompile_penalty_ms,
        });
        for spec in held {
            mapping.entries.push(MappingEntry {
                rep_id: spec.id.clone(),
                kind: spec.kind,
                platform: platform.name.clone(),
                footprint_bytes: spec.footprint_bytes(),
                accuracy: spec.accuracy,
                latency: *platform
                    .latency
                    .get(&spec.kind)
                    .expect("only servable kinds are mapped"),
            });
        }
    }
    mapping
}

/// Best configured accuracy reachable through any mapped path.
pub fn achievable_accuracy(mapping: &MappingSet) -> Result<f64> {
    mapping
        .entries
        .iter()
        .map(|e| e.accuracy)
        .max_by(f64::total_cmp)
        .ok_or(Error::NoPaths)
}
