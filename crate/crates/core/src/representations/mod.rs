//! Embedding representations and their capacity/compute accounting.
//!
//! A [`RepresentationSpec`] describes a whole model's embedding layer: one
//! [`FeatureSpec`] per sparse feature plus the configured model accuracy. Specs
//! are cheap metadata; [`Representation`] materializes weights when actual
//! vectors are needed.

mod dhe;
mod hash;
mod model;
mod table;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use dhe::{normalize_hash, Activation, Decoder, Dense, DheConfig, DheModel};
pub use hash::{hash_id, is_prime, make_hash_family, HashFunctionParams, MERSENNE_61};
pub use model::{
    dhe_generate, hybrid_generate, select_generate, table_lookup, FeatureModel, Representation,
};
pub use table::{EmbeddingTable, TableConfig};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector(Vec<f32>);

impl EmbeddingVector {
    pub fn new(values: Vec<f32>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[f32] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_values(self) -> Vec<f32> {
        self.0
    }

    pub fn l2_distance(&self, other: &EmbeddingVector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| {
                let d = (*a as f64) - (*b as f64);
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// Encoder output: `k` components, each in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f32>", into = "Vec<f32>")]
pub struct IntermediateVector(Vec<f32>);

impl IntermediateVector {
    pub fn new(values: Vec<f32>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|v| !(-1.0..=1.0).contains(*v)) {
            return Err(Error::Parameter(format!(
                "intermediate component {bad} outside [-1, 1]"
            )));
        }
        Ok(Self(values))
    }

    pub(crate) fn from_values_unchecked(values: Vec<f32>) -> Self {
        debug_assert!(values.iter().all(|v| (-1.0..=1.0).contains(v)));
        Self(values)
    }

    pub fn values(&self) -> &[f32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<f32>> for IntermediateVector {
    type Error = Error;

    fn try_from(values: Vec<f32>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<IntermediateVector> for Vec<f32> {
    fn from(v: IntermediateVector) -> Self {
        v.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepresentationKind {
    Table,
    Dhe,
    Select,
    Hybrid,
}

impl RepresentationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RepresentationKind::Table => "table",
            RepresentationKind::Dhe => "dhe",
            RepresentationKind::Select => "select",
            RepresentationKind::Hybrid => "hybrid",
        }
    }

    /// Whether the path runs an encoder/decoder stack that caches can accelerate.
    pub fn uses_compute_stack(self) -> bool {
        !matches!(self, RepresentationKind::Table)
    }
}

impl fmt::Display for RepresentationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Per-feature backend choice of a select representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Table,
    Dhe,
}

/// Configuration of one sparse feature.
///
/// Which fields must be present depends on the owning spec's kind: tables need
/// `table`, DHE needs `dhe`, hybrid needs both, and select needs `assign` plus
/// the config of the assigned backend.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FeatureSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<TableConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dhe: Option<DheConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assign: Option<Backend>,
}

impl FeatureSpec {
    pub fn table(cfg: TableConfig) -> Self {
        Self {
            table: Some(cfg),
            ..Self::default()
        }
    }

    pub fn dhe(cfg: DheConfig) -> Self {
        Self {
            dhe: Some(cfg),
            ..Self::default()
        }
    }

    pub fn hybrid(table: TableConfig, dhe: DheConfig) -> Self {
        Self {
            table: Some(table),
            dhe: Some(dhe),
            assign: None,
        }
    }

    pub fn select(backend: Backend, table: Option<TableConfig>, dhe: Option<DheConfig>) -> Self {
        Self {
            table,
            dhe,
            assign: Some(backend),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepresentationSpec {
    pub id: String,
    pub kind: RepresentationKind,
    pub features: Vec<FeatureSpec>,
    /// Configured model quality of this representation, a fraction in `[0, 1]`.
    pub accuracy: f64,
}

impl RepresentationSpec {
    pub fn validate(&self) -> Result<()> {
        let ctx = |msg: String| Error::Config(format!("representation `{}`: {msg}", self.id));
        if !(0.0..=1.0).contains(&self.accuracy) {
            return Err(ctx(format!("accuracy {} outside [0, 1]", self.accuracy)));
        }
        if self.features.is_empty() {
            return Err(ctx("at least one feature is required".into()));
        }
        for (i, f) in self.features.iter().enumerate() {
            let need = |present: bool, what: &str| {
                if present {
                    Ok(())
                } else {
                    Err(ctx(format!("feature {i} is missing its {what} config")))
                }
            };
            match self.kind {
                RepresentationKind::Table => need(f.table.is_some(), "table")?,
                RepresentationKind::Dhe => need(f.dhe.is_some(), "dhe")?,
                RepresentationKind::Hybrid => {
                    need(f.table.is_some(), "table")?;
                    need(f.dhe.is_some(), "dhe")?;
                }
                RepresentationKind::Select => match f.assign {
                    None => return Err(ctx(format!("feature {i} has no select assignment"))),
                    Some(Backend::Table) => need(f.table.is_some(), "table")?,
                    Some(Backend::Dhe) => need(f.dhe.is_some(), "dhe")?,
                },
            }
            if let Some(t) = &f.table {
                t.validate().map_err(|e| ctx(format!("feature {i}: {e}")))?;
            }
            if let Some(d) = &f.dhe {
                d.validate().map_err(|e| ctx(format!("feature {i}: {e}")))?;
            }
        }
        Ok(())
    }

    /// The parts of each feature that are actually executed.
    fn active_parts(
        &self,
    ) -> impl Iterator<Item = (Option<&TableConfig>, Option<&DheConfig>)> + '_ {
        self.features.iter().map(move |f| match self.kind {
            RepresentationKind::Table => (f.table.as_ref(), None),
            RepresentationKind::Dhe => (None, f.dhe.as_ref()),
            RepresentationKind::Hybrid => (f.table.as_ref(), f.dhe.as_ref()),
            RepresentationKind::Select => match f.assign {
                Some(Backend::Table) => (f.table.as_ref(), None),
                Some(Backend::Dhe) => (None, f.dhe.as_ref()),
                None => (None, None),
            },
        })
    }

    pub fn footprint_bytes(&self) -> u64 {
        self.active_parts()
            .map(|(t, d)| {
                t.map_or(0, TableConfig::footprint_bytes) + d.map_or(0, DheConfig::footprint_bytes)
            })
            .sum()
    }

    pub fn flops_per_access(&self) -> u64 {
        self.active_parts()
            .map(|(_, d)| d.map_or(0, DheConfig::decoder_flops))
            .sum()
    }

    /// Largest encoder width over the executed DHE parts; 0 for pure tables.
    pub fn encoder_k(&self) -> usize {
        self.active_parts()
            .filter_map(|(_, d)| d.map(|c| c.k))
            .max()
            .unwrap_or(0)
    }

    pub fn dhe_configs(&self) -> impl Iterator<Item = &DheConfig> + '_ {
        self.active_parts().filter_map(|(_, d)| d)
    }

    /// Output width per feature: table dim plus decoder output where both run.
    pub fn feature_dims(&self) -> Vec<usize> {
        self.active_parts()
            .map(|(t, d)| t.map_or(0, |c| c.dim) + d.map_or(0, |c| c.d_out))
            .collect()
    }
}

pub fn footprint_bytes(spec: &RepresentationSpec) -> u64 {
    spec.footprint_bytes()
}

pub fn flops_per_access(spec: &RepresentationSpec) -> u64 {
    spec.flops_per_access()
}

/// `baseline_bytes / footprint`.
pub fn compression_ratio(spec: &RepresentationSpec, baseline_bytes: u64) -> Result<f64> {
    if baseline_bytes == 0 {
        return Err(Error::Parameter(
            "baseline footprint must be positive".into(),
        ));
    }
    match spec.footprint_bytes() {
        0 => Err(Error::UndefinedRatio),
        f => Ok(baseline_bytes as f64 / f as f64),
    }
}
