//! Seeded query and id-access trace generation.
//!
//! Query sizes follow a lognormal whose mean is `mean_size` (the underlying
//! normal has `mu = ln(mean_size) - sigma^2 / 2`), rounded and clamped to
//! `[1, max_size]`. Ids follow an exact Zipf law sampled by inverse CDF over
//! the cumulative harmonic table.

use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const SIZE_STREAM: u64 = 1;
const ARRIVAL_STREAM: u64 = 2;
const ID_STREAM: u64 = 3;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrivalProcess {
    /// One query every `1000 / target_qps` ms.
    #[default]
    Fixed,
    /// Exponential inter-arrival gaps with mean `1000 / target_qps` ms.
    Poisson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorkloadConfig {
    pub num_queries: usize,
    pub mean_size: f64,
    pub sigma: f64,
    pub max_size: u32,
    pub target_qps: f64,
    pub arrival: ArrivalProcess,
    pub id_universe: u64,
    pub zipf_s: f64,
    /// Length of the id-access trace produced by [`gen_id_trace`].
    pub id_accesses: usize,
    pub seed: u64,
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        Self {
            num_queries: 10_000,
            mean_size: 128.0,
            sigma: 1.0,
            max_size: 4096,
            target_qps: 1000.0,
            arrival: ArrivalProcess::Fixed,
            id_universe: 10_000_000,
            zipf_s: 1.0,
            id_accesses: 100_000,
            seed: 0,
        }
    }
}

impl WorkloadConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(format!("workload: {msg}")));
        if self.mean_size.is_nan() || self.mean_size < 1.0 {
            return bad("mean_size must be >= 1");
        }
        if self.sigma < 0.0 || !self.sigma.is_finite() {
            return bad("sigma must be finite and non-negative");
        }
        if self.max_size == 0 {
            return bad("max_size must be >= 1");
        }
        if self.target_qps <= 0.0 || !self.target_qps.is_finite() {
            return bad("target_qps must be positive");
        }
        if self.zipf_s <= 0.0 || !self.zipf_s.is_finite() {
            return bad("zipf_s must be positive");
        }
        if self.id_universe == 0 {
            return bad("id_universe must be >= 1");
        }
        Ok(())
    }

    pub fn lognormal_mu(&self) -> f64 {
        self.mean_size.ln() - self.sigma * self.sigma / 2.0
    }

    pub fn arrival_spacing_ms(&self) -> f64 {
        1000.0 / self.target_qps
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub id: u64,
    pub arrival_ms: f64,
    /// Samples in the query.
    pub size: u32,
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Unrounded, unclamped lognormal size draws.
pub struct SizeSampler {
    mu: f64,
    sigma: f64,
    rng: ChaCha8Rng,
}

impl SizeSampler {
    pub fn new(cfg: &WorkloadConfig) -> Self {
        Self {
            mu: cfg.lognormal_mu(),
            sigma: cfg.sigma,
            rng: rng_for(cfg.seed, SIZE_STREAM),
        }
    }

    pub fn sample_raw(&mut self) -> f64 {
        let z: f64 = StandardNormal.sample(&mut self.rng);
        (self.mu + self.sigma * z).exp()
    }
}

pub fn gen_queries(cfg: &WorkloadConfig) -> Result<Vec<Query>> {
    cfg.validate()?;
    let mut sizes = SizeSampler::new(cfg);
    let spacing = cfg.arrival_spacing_ms();
    let mut arrivals = rng_for(cfg.seed, ARRIVAL_STREAM);
    let gap = Exp::new(1.0 / spacing).map_err(|e| Error::Parameter(e.to_string()))?;
    let mut clock = 0.0;
    Ok((0..cfg.num_queries)
        .map(|i| {
            let arrival_ms = match cfg.arrival {
                ArrivalProcess::Fixed => i as f64 * spacing,
                ArrivalProcess::Poisson => {
                    if i > 0 {
                        clock += gap.sample(&mut arrivals);
                    }
                    clock
                }
            };
            let size = sizes.sample_raw().round().clamp(1.0, cfg.max_size as f64) as u32;
            Query {
                id: i as u64,
                arrival_ms,
                size,
            }
        })
        .collect())
}

/// Exact Zipf sampler over ranks `[0, universe)`: P(i) proportional to `1 / (i+1)^s`.
#[derive(Debug, Clone)]
pub struct ZipfSampler {
    cumulative: Vec<f64>,
}

impl ZipfSampler {
    pub fn new(universe: u64, s: f64) -> Result<Self> {
        if universe == 0 {
            return Err(Error::Parameter("zipf universe must be >= 1".into()));
        }
        if s.is_nan() || s <= 0.0 {
            return Err(Error::Parameter("zipf exponent must be positive".into()));
        }
        let len = usize::try_from(universe)
            .map_err(|_| Error::Parameter(format!("zipf universe {universe} too large")))?;
        let mut total = 0.0;
        let cumulative = (1..=len)
            .map(|r| {
                total += (r as f64).powf(-s);
                total
            })
            .collect();
        Ok(Self { cumulative })
    }

    pub fn universe(&self) -> u64 {
        self.cumulative.len() as u64
    }

    /// Generalized harmonic number over the whole universe.
    pub fn total_mass(&self) -> f64 {
        *self.cumulative.last().expect("universe >= 1")
    }

    /// Probability of the `count` most popular ids.
    pub fn head_mass(&self, count: usize) -> f64 {
        match count.min(self.cumulative.len()) {
            0 => 0.0,
            c => self.cumulative[c - 1] / self.total_mass(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let u = rng.random::<f64>() * self.total_mass();
        let idx = self.cumulative.partition_point(|&c| c <= u);
        idx.min(self.cumulative.len() - 1) as u64
    }
}

/// Seeded stream of Zipf ids, independent of the query stream of the same seed.
pub struct IdStream {
    sampler: ZipfSampler,
    rng: ChaCha8Rng,
}

impl IdStream {
    pub fn new(cfg: &WorkloadConfig, seed: u64) -> Result<Self> {
        Ok(Self {
            sampler: ZipfSampler::new(cfg.id_universe, cfg.zipf_s)?,
            rng: rng_for(seed, ID_STREAM),
        })
    }

    pub fn from_sampler(sampler: ZipfSampler, seed: u64) -> Self {
        Self {
            sampler,
            rng: rng_for(seed, ID_STREAM),
        }
    }

    pub fn sampler(&self) -> &ZipfSampler {
        &self.sampler
    }

    pub fn next_id(&mut self) -> u64 {
        self.sampler.sample(&mut self.rng)
    }

    pub fn take(&mut self, count: usize) -> Vec<u64> {
        (0..count).map(|_| self.next_id()).collect()
    }
}

/// `cfg.id_accesses` Zipf-distributed ids.
pub fn gen_id_trace(cfg: &WorkloadConfig) -> Result<Vec<u64>> {
    cfg.validate()?;
    Ok(IdStream::new(cfg, cfg.seed)?.take(cfg.id_accesses))
}

#[derive(Serialize, Deserialize)]
struct IdLine {
    id: u64,
}

pub fn write_queries_jsonl<W: Write>(mut w: W, queries: &[Query]) -> Result<()> {
    for q in queries {
        serde_json::to_writer(&mut w, q)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_queries_jsonl<R: BufRead>(r: R) -> Result<Vec<Query>> {
    read_jsonl(r)
}

pub fn write_ids_jsonl<W: Write>(mut w: W, ids: &[u64]) -> Result<()> {
    for &id in ids {
        serde_json::to_writer(&mut w, &IdLine { id })?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_ids_jsonl<R: BufRead>(r: R) -> Result<Vec<u64>> {
    Ok(read_jsonl::<IdLine, _>(r)?
        .into_iter()
        .map(|l| l.id)
        .collect())
}

fn read_jsonl<T: for<'de> Deserialize<'de>, R: BufRead>(r: R) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| Error::Parameter(format!("line {}: {e}", i + 1)))?,
        );
    }
    Ok(out)
}
