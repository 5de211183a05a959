//! Builders and straight-line reference implementations shared by the
//! integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use multipath::hardware::{AffineLatency, PlatformProfile};
use multipath::planner::{MappingEntry, MappingSet, PlatformSlot};
use multipath::representations::{
    Activation, Decoder, DheConfig, FeatureSpec, RepresentationKind, RepresentationSpec,
    TableConfig,
};

pub fn dhe_cfg(k: usize, d_nn: usize, h: usize, d_out: usize) -> DheConfig {
    DheConfig {
        k,
        m: 1_000_000,
        d_nn,
        h,
        d_out,
        seed: 0,
        activation: Activation::Relu,
    }
}

pub fn table_spec(id: &str, rows: u64, accuracy: f64) -> RepresentationSpec {
    RepresentationSpec {
        id: id.into(),
        kind: RepresentationKind::Table,
        features: vec![FeatureSpec::table(TableConfig {
            rows,
            dim: 16,
            seed: 0,
        })],
        accuracy,
    }
}

pub fn dhe_spec(id: &str, k: usize, d_nn: usize, accuracy: f64) -> RepresentationSpec {
    RepresentationSpec {
        id: id.into(),
        kind: RepresentationKind::Dhe,
        features: vec![FeatureSpec::dhe(dhe_cfg(k, d_nn, 1, 16))],
        accuracy,
    }
}

pub fn hybrid_spec(
    id: &str,
    rows: u64,
    k: usize,
    d_nn: usize,
    accuracy: f64,
) -> RepresentationSpec {
    RepresentationSpec {
        id: id.into(),
        kind: RepresentationKind::Hybrid,
        features: vec![FeatureSpec::hybrid(
            TableConfig {
                rows,
                dim: 16,
                seed: 0,
            },
            dhe_cfg(k, d_nn, 1, 16),
        )],
        accuracy,
    }
}

pub fn platform(name: &str, capacity: u64, lanes: usize) -> PlatformProfile {
    let latency: BTreeMap<RepresentationKind, AffineLatency> = [
        (RepresentationKind::Table, AffineLatency::new(0.5, 0.03)),
        (RepresentationKind::Dhe, AffineLatency::new(1.0, 0.3)),
        (RepresentationKind::Hybrid, AffineLatency::new(1.0, 0.33)),
    ]
    .into_iter()
    .collect();
    PlatformProfile {
        name: name.into(),
        memory_capacity_bytes: capacity,
        parallel_lanes: lanes,
        latency,
        recompile_penalty_ms: None,
    }
}

pub fn slot(name: &str, lanes: usize) -> PlatformSlot {
    PlatformSlot {
        name: name.into(),
        capacity_bytes: u64::MAX,
        used_bytes: 0,
        parallel_lanes: lanes,
        recompile_penalty_ms: None,
    }
}

pub fn entry(
    rep: &str,
    kind: RepresentationKind,
    platform: &str,
    fixed: f64,
    per: f64,
) -> MappingEntry {
    MappingEntry {
        rep_id: rep.into(),
        kind,
        platform: platform.into(),
        footprint_bytes: 0,
        accuracy: 0.78,
        latency: AffineLatency::new(fixed, per),
    }
}

/// The online stage as written: a hybrid path that can finish the query
/// within the target, else such a DHE path, else a table path. "Can finish"
/// means earliest-lane wait plus `fixed + n * per` is at most `t_sla`. Among
/// several candidates of one kind the earliest completion wins, then the
/// earlier platform, then the earlier entry. With no table path, the earliest
/// completion overall.
#[allow(clippy::needless_range_loop)]
pub fn algorithm2(
    mapping: &MappingSet,
    lane_free: &[Vec<f64>],
    now: f64,
    n: u32,
    t_sla: f64,
) -> Option<usize> {
    let mut completion = Vec::new();
    let mut platform_of = Vec::new();
    for e in &mapping.entries {
        let mut p = 0;
        while mapping.platforms[p].name != e.platform {
            p += 1;
        }
        let mut earliest = f64::INFINITY;
        for &t in &lane_free[p] {
            if t < earliest {
                earliest = t;
            }
        }
        let wait = if earliest > now { earliest - now } else { 0.0 };
        completion.push(wait + (e.latency.fixed_overhead_ms + n as f64 * e.latency.per_sample_ms));
        platform_of.push(p);
    }
    let better = |i: usize, j: usize| {
        completion[i] < completion[j]
            || (completion[i] == completion[j] && (platform_of[i], i) < (platform_of[j], j))
    };
    let pick = |kind: Option<RepresentationKind>, within_sla: bool| {
        let mut best: Option<usize> = None;
        for i in 0..mapping.entries.len() {
            if let Some(k) = kind {
                if mapping.entries[i].kind != k {
                    continue;
                }
            }
            if within_sla && completion[i] > t_sla {
                continue;
            }
            if best.is_none_or(|b| better(i, b)) {
                best = Some(i);
            }
        }
        best
    };
    pick(Some(RepresentationKind::Hybrid), true)
        .or_else(|| pick(Some(RepresentationKind::Dhe), true))
        .or_else(|| pick(Some(RepresentationKind::Table), false))
        .or_else(|| pick(None, false))
}

/// `W x + b` per layer in f64, ReLU between layers.
pub fn oracle_decode(decoder: &Decoder, input: &[f32]) -> Vec<f64> {
    let mut x: Vec<f64> = input.iter().map(|&v| f64::from(v)).collect();
    let n = decoder.layers().len();
    for (li, layer) in decoder.layers().iter().enumerate() {
        let mut y = vec![0.0f64; layer.fan_out];
        for (o, out) in y.iter_mut().enumerate() {
            let mut s = f64::from(layer.bias[o]);
            for (i, xi) in x.iter().enumerate() {
                s += f64::from(layer.weights[o * layer.fan_in + i]) * xi;
            }
            *out = if li + 1 < n { s.max(0.0) } else { s };
        }
        x = y;
    }
    x
}

pub fn rel_err(got: &[f32], want: &[f64]) -> f64 {
    let diff: f64 = got
        .iter()
        .zip(want)
        .map(|(g, w)| (f64::from(*g) - w).powi(2))
        .sum::<f64>()
        .sqrt();
    let norm: f64 = want.iter().map(|w| w * w).sum::<f64>().sqrt();
    diff / norm.max(1e-12)
}
