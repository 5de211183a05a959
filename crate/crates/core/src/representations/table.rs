use serde::{Deserialize, Serialize};

use super::EmbeddingVector;
use crate::rng::SplitMix64;
use crate::{Error, Result};

const TABLE_STREAM: u64 = 0x5441_424C;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableConfig {
    pub rows: u64,
    pub dim: usize,
    #[serde(default)]
    pub seed: u64,
}

impl TableConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.dim == 0 {
            return Err(Error::Config(format!(
                "table requires rows >= 1 and dim >= 1 (got rows={}, dim={})",
                self.rows, self.dim
            )));
        }
        Ok(())
    }

    pub fn footprint_bytes(&self) -> u64 {
        self.rows * self.dim as u64 * 4
    }
}

/// Dense row-major table with synthetic seeded rows in `[-1/sqrt(dim), 1/sqrt(dim))`.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    cfg: TableConfig,
    data: Vec<f32>,
}

impl EmbeddingTable {
    pub fn seeded(cfg: TableConfig) -> Result<Self> {
        cfg.validate()?;
        let len = usize::try_from(cfg.rows)
            .ok()
            .and_then(|r| r.checked_mul(cfg.dim))
            .ok_or_else(|| Error::Parameter(format!("table of {} rows is too large", cfg.rows)))?;
        let mut rng = SplitMix64::stream(cfg.seed, TABLE_STREAM);
        let bound = 1.0 / (cfg.dim as f32).sqrt();
        let data = (0..len).map(|_| rng.next_symmetric_f32(bound)).collect();
        Ok(Self { cfg, data })
    }

    pub fn from_data(cfg: TableConfig, data: Vec<f32>) -> Result<Self> {
        cfg.validate()?;
        let expected = cfg.rows as usize * cfg.dim;
        if data.len() != expected {
            return Err(Error::Shape {
                expected,
                actual: data.len(),
            });
        }
        Ok(Self { cfg, data })
    }

    pub fn config(&self) -> &TableConfig {
        &self.cfg
    }

    pub fn row(&self, id: u64) -> Result<&[f32]> {
        if id >= self.cfg.rows {
            return Err(Error::OutOfRange {
                id,
                rows: self.cfg.rows,
            });
        }
        let start = id as usize * self.cfg.dim;
        Ok(&self.data[start..start + self.cfg.dim])
    }

    pub fn lookup(&self, id: u64) -> Result<EmbeddingVector> {
        self.row(id).map(|r| EmbeddingVector::new(r.to_vec()))
    }
}
