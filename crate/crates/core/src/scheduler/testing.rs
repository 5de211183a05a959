//! Small hand-built mappings for scheduler tests.

use crate::hardware::AffineLatency;
use crate::planner::{MappingEntry, MappingSet, PlatformSlot};
use crate::representations::RepresentationKind;
use crate::workload::Query;

pub(crate) fn slot(name: &str, lanes: usize) -> PlatformSlot {
    PlatformSlot {
        name: name.into(),
        capacity_bytes: u64::MAX,
        used_bytes: 0,
        parallel_lanes: lanes,
        recompile_penalty_ms: None,
    }
}

pub(crate) fn entry(
    rep: &str,
    kind: RepresentationKind,
    platform: &str,
    fixed: f64,
    per_sample: f64,
) -> MappingEntry {
    let accuracy = match kind {
        RepresentationKind::Table => 0.7872,
        RepresentationKind::Dhe => 0.7894,
        RepresentationKind::Select => 0.7880,
        RepresentationKind::Hybrid => 0.7898,
    };
    MappingEntry {
        rep_id: rep.into(),
        kind,
        platform: platform.into(),
        footprint_bytes: 0,
        accuracy,
        latency: AffineLatency::new(fixed, per_sample),
    }
}

/// One single-lane platform holding a hybrid, a DHE and a table path with the
/// given fixed latencies.
pub(crate) fn three_paths(hybrid: f64, dhe: f64, table: f64) -> MappingSet {
    MappingSet {
        platforms: vec![slot("cpu", 1)],
        entries: vec![
            entry("hyb", RepresentationKind::Hybrid, "cpu", hybrid, 0.0),
            entry("dhe", RepresentationKind::Dhe, "cpu", dhe, 0.0),
            entry("tbl", RepresentationKind::Table, "cpu", table, 0.0),
        ],
    }
}

pub(crate) fn query(id: u64, arrival_ms: f64, size: u32) -> Query {
    Query {
        id,
        arrival_ms,
        size,
    }
}
