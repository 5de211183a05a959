//! Run configuration: one JSON document describing platforms, the candidate
//! representation pool, scheduler, workload and cache settings.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::hardware::PlatformProfile;
use crate::mpcache::{DecoderCacheConfig, EncoderCacheConfig};
use crate::representations::RepresentationSpec;
use crate::scheduler::SchedulerConfig;
use crate::workload::WorkloadConfig;
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CacheSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub encoder: Option<EncoderCacheConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decoder: Option<DecoderCacheConfig>,
}

/// Default file names used by the CLI when writing into an output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputPaths {
    pub records: String,
    pub report: String,
    pub report_csv: String,
    pub baselines_csv: String,
}

impl Default for OutputPaths {
    fn default() -> Self {
        Self {
            records: "records.jsonl".into(),
            report: "report.json".into(),
            report_csv: "report.csv".into(),
            baselines_csv: "baselines.csv".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub platforms: Vec<PlatformProfile>,
    pub representations: Vec<RepresentationSpec>,
    /// Footprint the compression ratio of each representation is quoted against.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline_bytes: Option<u64>,
    pub scheduler: SchedulerConfig,
    #[serde(default)]
    pub workload: WorkloadConfig,
    #[serde(default)]
    pub cache: CacheSection,
    #[serde(default)]
    pub outputs: OutputPaths,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let mut names = BTreeSet::new();
        for p in &self.platforms {
            p.validate()?;
            if !names.insert(p.name.as_str()) {
                return Err(Error::Config(format!("duplicate platform `{}`", p.name)));
            }
        }
        let mut ids = BTreeSet::new();
        for r in &self.representations {
            r.validate()?;
            if !ids.insert(r.id.as_str()) {
                return Err(Error::Config(format!(
                    "duplicate representation `{}`",
                    r.id
                )));
            }
        }
        self.scheduler.validate()?;
        self.workload.validate()?;
        if self.scheduler.target_qps != self.workload.target_qps {
            return Err(Error::Config(format!(
                "scheduler.target_qps {} disagrees with workload.target_qps {}",
                self.scheduler.target_qps, self.workload.target_qps
            )));
        }
        if self.baseline_bytes == Some(0) {
            return Err(Error::Config("baseline_bytes must be positive".into()));
        }

        let compute: Vec<&RepresentationSpec> = self
            .representations
            .iter()
            .filter(|r| r.kind.uses_compute_stack())
            .collect();
        if self.scheduler.encoder_cache_enabled && self.cache.encoder.is_none() {
            return Err(Error::Config(
                "scheduler.encoder_cache_enabled requires cache.encoder".into(),
            ));
        }
        if self.scheduler.decoder_cache_enabled && self.cache.decoder.is_none() {
            return Err(Error::Config(
                "scheduler.decoder_cache_enabled requires cache.decoder".into(),
            ));
        }
        if let Some(enc) = &self.cache.encoder {
            for r in &compute {
                for d in r.dhe_configs() {
                    if d.d_out != enc.d_out {
                        return Err(Error::Config(format!(
                            "cache.encoder.d_out {} does not match representation `{}` (d_out {})",
                            enc.d_out, r.id, d.d_out
                        )));
                    }
                }
            }
        }
        if let Some(dec) = &self.cache.decoder {
            if dec.centroids == 0 {
                return Err(Error::Config(
                    "cache.decoder: centroids must be >= 1".into(),
                ));
            }
            for r in &compute {
                for d in r.dhe_configs() {
                    dec.check_against(d)
                        .map_err(|e| Error::Config(format!("representation `{}`: {e}", r.id)))?;
                }
            }
        }
        Ok(())
    }
}

const KAGGLE_LIKE: &str = include_str!("../../../presets/kaggle-like.json");
const TERABYTE_LIKE: &str = include_str!("../../../presets/terabyte-like.json");
const HW2: &str = include_str!("../../../presets/hw2.json");

pub const PRESET_NAMES: [&str; 3] = ["kaggle-like", "terabyte-like", "hw2"];

/// A shipped configuration by name.
pub fn preset(name: &str) -> Result<RunConfig> {
    let text = match name {
        "kaggle-like" => KAGGLE_LIKE,
        "terabyte-like" => TERABYTE_LIKE,
        "hw2" => HW2,
        other => {
            return Err(Error::Config(format!(
                "unknown preset `{other}` (known: {})",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    RunConfig::from_json(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse() {
        for name in PRESET_NAMES {
            let cfg = preset(name).unwrap();
            assert_eq!(cfg.name, name);
        }
        assert!(preset("nope").is_err());
    }

    #[test]
    fn missing_field_names_it() {
        let err = RunConfig::from_json(
            r#"{"schema_version": 1, "platforms": [], "representations": []}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("scheduler"), "{err}");
    }

    #[test]
    fn qps_mismatch_rejected() {
        let mut cfg = preset("kaggle-like").unwrap();
        cfg.workload.target_qps = 10.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn decoder_cache_guard() {
        let mut cfg = preset("kaggle-like").unwrap();
        cfg.cache.decoder = Some(DecoderCacheConfig {
            centroids: 1 << 20,
            iters: 1,
            profile_samples: 10,
            seed: 0,
        });
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn round_trips() {
        let cfg = preset("hw2").unwrap();
        let again = RunConfig::from_json(&cfg.to_json_pretty().unwrap()).unwrap();
        assert_eq!(cfg, again);
    }
}
