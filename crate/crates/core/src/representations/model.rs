use super::{
    Backend, DheModel, EmbeddingTable, EmbeddingVector, RepresentationKind, RepresentationSpec,
};
use crate::{Error, Result};

pub fn table_lookup(table: &EmbeddingTable, id: u64) -> Result<EmbeddingVector> {
    table.lookup(id)
}

pub fn dhe_generate(model: &DheModel, id: u64) -> EmbeddingVector {
    model.generate(id)
}

/// Table row followed by the DHE output for the same id.
pub fn hybrid_generate(table: &EmbeddingTable, dhe: &DheModel, id: u64) -> Result<EmbeddingVector> {
    let mut values = table.row(id)?.to_vec();
    values.extend_from_slice(dhe.generate(id).values());
    Ok(EmbeddingVector::new(values))
}

/// Dispatches feature `feature` of a select representation to its assigned backend.
pub fn select_generate(rep: &Representation, feature: usize, id: u64) -> Result<EmbeddingVector> {
    let f = rep.feature(feature)?;
    match f.assign {
        Some(Backend::Table) => table_lookup(f.table_part(feature)?, id),
        Some(Backend::Dhe) => Ok(dhe_generate(f.dhe_part(feature)?, id)),
        None => Err(Error::Config(format!(
            "feature {feature} has no select assignment"
        ))),
    }
}

/// Materialized weights for one feature. Only the parts the spec executes are built.
#[derive(Debug, Clone)]
pub struct FeatureModel {
    pub table: Option<EmbeddingTable>,
    pub dhe: Option<DheModel>,
    pub assign: Option<Backend>,
}

impl FeatureModel {
    fn table_part(&self, feature: usize) -> Result<&EmbeddingTable> {
        self.table
            .as_ref()
            .ok_or_else(|| Error::Config(format!("feature {feature} has no table part")))
    }

    fn dhe_part(&self, feature: usize) -> Result<&DheModel> {
        self.dhe
            .as_ref()
            .ok_or_else(|| Error::Config(format!("feature {feature} has no DHE part")))
    }
}

/// A representation with weights materialized from its seeds.
///
/// Immutable after construction; safe to share across threads.
#[derive(Debug, Clone)]
pub struct Representation {
    spec: RepresentationSpec,
    features: Vec<FeatureModel>,
}

impl Representation {
    pub fn build(spec: RepresentationSpec) -> Result<Self> {
        spec.validate()?;
        let features = spec
            .features
            .iter()
            .map(|f| {
                let (want_table, want_dhe) = match spec.kind {
                    RepresentationKind::Table => (true, false),
                    RepresentationKind::Dhe => (false, true),
                    RepresentationKind::Hybrid => (true, true),
                    RepresentationKind::Select => (
                        f.assign == Some(Backend::Table),
                        f.assign == Some(Backend::Dhe),
                    ),
                };
                let table = match (&f.table, want_table) {
                    (Some(cfg), true) => Some(EmbeddingTable::seeded(cfg.clone())?),
                    _ => None,
                };
                let dhe = match (&f.dhe, want_dhe) {
                    (Some(cfg), true) => Some(DheModel::new(cfg.clone())?),
                    _ => None,
                };
                Ok(FeatureModel {
                    table,
                    dhe,
                    assign: f.assign,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { spec, features })
    }

    pub fn spec(&self) -> &RepresentationSpec {
        &self.spec
    }

    pub fn kind(&self) -> RepresentationKind {
        self.spec.kind
    }

    pub fn num_features(&self) -> usize {
        self.features.len()
    }

    pub fn feature(&self, feature: usize) -> Result<&FeatureModel> {
        self.features.get(feature).ok_or_else(|| {
            Error::Config(format!(
                "feature {feature} out of range ({} features)",
                self.features.len()
            ))
        })
    }

    /// Embedding of `id` in sparse feature `feature`.
    pub fn generate(&self, feature: usize, id: u64) -> Result<EmbeddingVector> {
        let f = self.feature(feature)?;
        match self.spec.kind {
            RepresentationKind::Table => table_lookup(f.table_part(feature)?, id),
            RepresentationKind::Dhe => Ok(dhe_generate(f.dhe_part(feature)?, id)),
            RepresentationKind::Hybrid => {
                hybrid_generate(f.table_part(feature)?, f.dhe_part(feature)?, id)
            }
            RepresentationKind::Select => select_generate(self, feature, id),
        }
    }
}
