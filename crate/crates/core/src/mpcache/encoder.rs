use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::CacheStats;
use crate::representations::EmbeddingVector;
use crate::{Error, Result};

/// Bytes charged per cached entry on top of the vector payload (u64 key plus
/// one word of bookkeeping).
pub const KEY_OVERHEAD_BYTES: u64 = 16;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CachePolicy {
    /// Prefilled from a profiling trace with the most frequent ids.
    #[default]
    StaticTopk,
    /// Starts empty, filled on misses, evicts the least recently used id.
    Lru,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderCacheConfig {
    pub capacity_bytes: u64,
    #[serde(default)]
    pub policy: CachePolicy,
    /// Width of a cached embedding.
    pub d_out: usize,
}

impl EncoderCacheConfig {
    pub fn entry_bytes(&self) -> u64 {
        self.d_out as u64 * 4 + KEY_OVERHEAD_BYTES
    }

    pub fn max_entries(&self) -> usize {
        (self.capacity_bytes / self.entry_bytes()) as usize
    }

    /// Capacity holding exactly `entries` entries.
    pub fn for_entries(entries: usize, d_out: usize, policy: CachePolicy) -> Self {
        let mut cfg = Self {
            capacity_bytes: 0,
            policy,
            d_out,
        };
        cfg.capacity_bytes = entries as u64 * cfg.entry_bytes();
        cfg
    }
}

/// Hot-id cache. `V` is the cached payload: an [`EmbeddingVector`] when serving
/// real embeddings, or `()` when only hit/miss behaviour matters.
#[derive(Debug, Clone)]
pub struct EncoderCache<V = EmbeddingVector> {
    policy: CachePolicy,
    max_entries: usize,
    entries: HashMap<u64, (V, u64)>,
    recency: BTreeMap<u64, u64>,
    tick: u64,
    stats: CacheStats,
}

/// Builds the tier-one cache.
///
/// With [`CachePolicy::StaticTopk`] the `max_entries` most frequent ids of
/// `trace` (ties to the smaller id) are precomputed through `fill`. With
/// [`CachePolicy::Lru`] the trace is ignored and the cache starts empty. A
/// capacity below one entry yields a cache that always misses.
pub fn build_hot_set<V, F>(
    trace: &[u64],
    cfg: &EncoderCacheConfig,
    mut fill: F,
) -> Result<EncoderCache<V>>
where
    F: FnMut(u64) -> V,
{
    let max_entries = cfg.max_entries();
    let mut cache = EncoderCache {
        policy: cfg.policy,
        max_entries,
        entries: HashMap::new(),
        recency: BTreeMap::new(),
        tick: 0,
        stats: CacheStats::default(),
    };
    if cfg.policy == CachePolicy::Lru {
        return Ok(cache);
    }
    if trace.is_empty() {
        return Err(Error::Parameter(
            "static top-k cache needs a non-empty profiling trace".into(),
        ));
    }
    let mut counts: HashMap<u64, u64> = HashMap::new();
    for &id in trace {
        *counts.entry(id).or_default() += 1;
    }
    let mut ranked: Vec<(u64, u64)> = counts.into_iter().collect();
    let by_rank = |a: &(u64, u64), b: &(u64, u64)| b.1.cmp(&a.1).then(a.0.cmp(&b.0));
    if max_entries < ranked.len() {
        if max_entries > 0 {
            ranked.select_nth_unstable_by(max_entries - 1, by_rank);
        }
        ranked.truncate(max_entries);
    }
    ranked.sort_unstable_by(by_rank);
    cache.entries = ranked
        .into_iter()
        .map(|(id, _)| (id, (fill(id), 0)))
        .collect();
    Ok(cache)
}

impl<V> EncoderCache<V> {
    pub fn policy(&self) -> CachePolicy {
        self.policy
    }

    pub fn max_entries(&self) -> usize {
        self.max_entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn stats(&self) -> &CacheStats {
        &self.stats
    }

    pub fn reset_stats(&mut self) {
        self.stats = CacheStats::default();
    }

    /// Membership test without touching statistics or recency.
    pub fn contains(&self, id: u64) -> bool {
        self.entries.contains_key(&id)
    }

    /// Looks `id` up, counting a hit or miss. LRU hits refresh recency.
    pub fn lookup(&mut self, id: u64) -> Option<&V> {
        if !self.entries.contains_key(&id) {
            self.stats.encoder_misses += 1;
            return None;
        }
        self.stats.encoder_hits += 1;
        if self.policy == CachePolicy::Lru {
            self.tick += 1;
            let tick = self.tick;
            let slot = self.entries.get_mut(&id).expect("checked above");
            self.recency.remove(&slot.1);
            slot.1 = tick;
            self.recency.insert(tick, id);
        }
        self.entries.get(&id).map(|(v, _)| v)
    }

    /// Inserts after a miss. Static caches are immutable and ignore this.
    pub fn insert(&mut self, id: u64, value: V) {
        if self.policy != CachePolicy::Lru || self.max_entries == 0 {
            return;
        }
        self.tick += 1;
        if let Some(old) = self.entries.get(&id).map(|e| e.1) {
            self.recency.remove(&old);
        } else if self.entries.len() >= self.max_entries {
            if let Some((_, victim)) = self.recency.pop_first() {
                self.entries.remove(&victim);
            }
        }
        self.entries.insert(id, (value, self.tick));
        self.recency.insert(self.tick, id);
    }
}

impl<V: Clone> EncoderCache<V> {
    /// Hit returns the cached value; a miss computes it with `compute` and, for
    /// LRU, fills the cache. The flag is true on a hit.
    pub fn lookup_or_fill<F: FnOnce(u64) -> V>(&mut self, id: u64, compute: F) -> (V, bool) {
        if let Some(v) = self.lookup(id) {
            return (v.clone(), true);
        }
        let v = compute(id);
        self.insert(id, v.clone());
        (v, false)
    }
}
