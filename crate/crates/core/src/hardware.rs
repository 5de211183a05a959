//! Platform descriptors and affine latency cost models.
//!
//! Each platform has a memory budget, a number of parallel lanes (queries in
//! flight at once) and one latency model per representation kind. The models
//! are affine in query size; the shipped presets are illustrative rather than
//! measured.

use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::representations::RepresentationKind;
use crate::{Error, Result};

/// `fixed_overhead_ms + n * per-sample cost`, where samples served from the
/// encoder cache are priced at `cache_hit_per_sample_ms`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineLatency {
    pub fixed_overhead_ms: f64,
    pub per_sample_ms: f64,
    /// Price of a sample whose embedding came from the encoder cache. Defaults
    /// to `per_sample_ms`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_hit_per_sample_ms: Option<f64>,
    /// Price of a cache-missing sample when the decoder stage is replaced by
    /// the centroid cache. Defaults to `per_sample_ms`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decoder_cache_per_sample_ms: Option<f64>,
}

impl AffineLatency {
    pub fn new(fixed_overhead_ms: f64, per_sample_ms: f64) -> Self {
        Self {
            fixed_overhead_ms,
            per_sample_ms,
            cache_hit_per_sample_ms: None,
            decoder_cache_per_sample_ms: None,
        }
    }

    pub fn with_cache_hit(mut self, per_sample_ms: f64) -> Self {
        self.cache_hit_per_sample_ms = Some(per_sample_ms);
        self
    }

    pub fn with_decoder_cache(mut self, per_sample_ms: f64) -> Self {
        self.decoder_cache_per_sample_ms = Some(per_sample_ms);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let components = [
            Some(self.fixed_overhead_ms),
            Some(self.per_sample_ms),
            self.cache_hit_per_sample_ms,
            self.decoder_cache_per_sample_ms,
        ];
        if components
            .iter()
            .flatten()
            .any(|v| !v.is_finite() || *v < 0.0)
        {
            return Err(Error::Config(format!(
                "latency components must be finite and non-negative: {self:?}"
            )));
        }
        Ok(())
    }

    pub fn hit_per_sample_ms(&self) -> f64 {
        self.cache_hit_per_sample_ms.unwrap_or(self.per_sample_ms)
    }

    /// The model seen by a path whose decoder is served by the centroid cache:
    /// misses are priced at the decoder-cache rate.
    pub fn decoder_cached(&self) -> Self {
        Self {
            per_sample_ms: self
                .decoder_cache_per_sample_ms
                .unwrap_or(self.per_sample_ms),
            ..*self
        }
    }

    pub fn estimate(&self, n: u32, hit_fraction: f64) -> f64 {
        let h = hit_fraction.clamp(0.0, 1.0);
        self.fixed_overhead_ms
            + n as f64 * ((1.0 - h) * self.per_sample_ms + h * self.hit_per_sample_ms())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatformProfile {
    pub name: String,
    pub memory_capacity_bytes: u64,
    /// Queries the platform serves concurrently; each lane is one server.
    pub parallel_lanes: usize,
    pub latency: BTreeMap<RepresentationKind, AffineLatency>,
    /// One-off penalty charged the first time a `(representation, size)` pair
    /// runs here, standing in for shape-specialized recompilation. Off when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recompile_penalty_ms: Option<f64>,
}

impl PlatformProfile {
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::Config("platform name must not be empty".into()));
        }
        if self.parallel_lanes == 0 {
            return Err(Error::Config(format!(
                "platform `{}`: parallel_lanes must be >= 1",
                self.name
            )));
        }
        for (kind, model) in &self.latency {
            model
                .validate()
                .map_err(|e| Error::Config(format!("platform `{}` {kind}: {e}", self.name)))?;
        }
        if let Some(p) = self.recompile_penalty_ms {
            if !p.is_finite() || p < 0.0 {
                return Err(Error::Config(format!(
                    "platform `{}`: recompile penalty must be non-negative",
                    self.name
                )));
            }
        }
        Ok(())
    }

    pub fn model(&self, kind: RepresentationKind) -> Result<&AffineLatency> {
        self.latency.get(&kind).ok_or_else(|| {
            Error::Config(format!(
                "platform `{}` has no latency model for {kind}",
                self.name
            ))
        })
    }
}

pub fn estimate_latency(
    platform: &PlatformProfile,
    kind: RepresentationKind,
    n: u32,
    hit_fraction: f64,
) -> Result<f64> {
    if n == 0 {
        return Err(Error::Parameter("query size must be >= 1".into()));
    }
    Ok(platform.model(kind)?.estimate(n, hit_fraction))
}

/// Whether `additional_bytes` more still fit next to `used_bytes`. Equality fits.
pub fn fits(platform: &PlatformProfile, additional_bytes: u64, used_bytes: u64) -> bool {
    used_bytes
        .checked_add(additional_bytes)
        .is_some_and(|total| total <= platform.memory_capacity_bytes)
}

/// Ordinary least squares fit of `latency = overhead + per_sample * n`.
///
/// A negative slope is clamped to zero (overhead becomes the mean latency); a
/// negative intercept is clamped to zero and the slope refit through the origin.
pub fn fit_affine(measurements: &[(f64, f64)]) -> Result<AffineLatency> {
    let mut distinct: Vec<f64> = measurements.iter().map(|m| m.0).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::Parameter(
            "fitting needs at least two distinct query sizes".into(),
        ));
    }
    let count = measurements.len() as f64;
    let mean_n = measurements.iter().map(|m| m.0).sum::<f64>() / count;
    let mean_l = measurements.iter().map(|m| m.1).sum::<f64>() / count;
    let (sxy, sxx) = measurements.iter().fold((0.0, 0.0), |(sxy, sxx), (n, l)| {
        let dn = n - mean_n;
        (sxy + dn * (l - mean_l), sxx + dn * dn)
    });
    let mut slope = sxy / sxx;
    let mut intercept = mean_l - slope * mean_n;
    if slope < 0.0 {
        log::warn!("fitted per-sample cost {slope} is negative; clamping to 0");
        slope = 0.0;
        intercept = mean_l;
    }
    if intercept < 0.0 {
        log::warn!("fitted fixed overhead {intercept} is negative; clamping to 0");
        intercept = 0.0;
        let (sxy0, sxx0) = measurements
            .iter()
            .fold((0.0, 0.0), |(a, b), (n, l)| (a + n * l, b + n * n));
        slope = (sxy0 / sxx0).max(0.0);
    }
    Ok(AffineLatency::new(intercept.max(0.0), slope))
}

#[derive(Debug, Deserialize)]
struct ProfileRow {
    n: f64,
    latency_ms: f64,
}

/// Reads `n,latency_ms` rows (with that header) for [`fit_affine`].
pub fn read_measurements_csv<R: Read>(reader: R) -> Result<Vec<(f64, f64)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        let row: ProfileRow = row?;
        if !row.n.is_finite() || row.n < 1.0 || !row.latency_ms.is_finite() {
            return Err(Error::Parameter(format!(
                "invalid measurement n={}, latency_ms={}",
                row.n, row.latency_ms
            )));
        }
        out.push((row.n, row.latency_ms));
    }
    Ok(out)
}
