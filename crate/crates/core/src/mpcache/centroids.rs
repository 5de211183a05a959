use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::CacheStats;
use crate::representations::{Decoder, DheConfig, EmbeddingVector, IntermediateVector};
use crate::{Error, Result};

pub const DEFAULT_KMEANS_ITERS: usize = 25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoderCacheConfig {
    /// Number of centroids N.
    pub centroids: usize,
    #[serde(default = "default_iters")]
    pub iters: usize,
    /// Number of profiled ids whose intermediates seed the clustering.
    #[serde(default = "default_profile_samples")]
    pub profile_samples: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_iters() -> usize {
    DEFAULT_KMEANS_ITERS
}

fn default_profile_samples() -> usize {
    10_000
}

impl DecoderCacheConfig {
    /// The centroid search must cost fewer FLOPs than the decoder it replaces.
    pub fn check_against(&self, dhe: &DheConfig) -> Result<()> {
        let cached = 2 * self.centroids as u64 * dhe.k as u64 + self.centroids as u64;
        let exact = dhe.decoder_flops();
        if cached >= exact {
            return Err(Error::Config(format!(
                "decoder cache with {} centroids costs {cached} FLOPs, not below the \
                 decoder's {exact} (k={}, d_nn={}, h={})",
                self.centroids, dhe.k, dhe.d_nn, dhe.h
            )));
        }
        Ok(())
    }
}

/// `n` unit centroids in `k` dimensions with their precomputed decoder outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct CentroidBook {
    n: usize,
    k: usize,
    d_out: usize,
    centroids: Vec<f32>,
    outputs: Vec<f32>,
    build_seed: Option<u64>,
}

impl CentroidBook {
    pub fn from_parts(
        n: usize,
        k: usize,
        d_out: usize,
        centroids: Vec<f32>,
        outputs: Vec<f32>,
    ) -> Result<Self> {
        if n == 0 || k == 0 {
            return Err(Error::Parameter(
                "centroid book needs n >= 1 and k >= 1".into(),
            ));
        }
        if centroids.len() != n * k {
            return Err(Error::Shape {
                expected: n * k,
                actual: centroids.len(),
            });
        }
        if outputs.len() != n * d_out {
            return Err(Error::Shape {
                expected: n * d_out,
                actual: outputs.len(),
            });
        }
        Ok(Self {
            n,
            k,
            d_out,
            centroids,
            outputs,
            build_seed: None,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn d_out(&self) -> usize {
        self.d_out
    }

    pub fn build_seed(&self) -> Option<u64> {
        self.build_seed
    }

    pub fn centroid(&self, i: usize) -> &[f32] {
        &self.centroids[i * self.k..(i + 1) * self.k]
    }

    pub fn output(&self, i: usize) -> &[f32] {
        &self.outputs[i * self.d_out..(i + 1) * self.d_out]
    }

    pub fn centroids(&self) -> impl Iterator<Item = &[f32]> {
        self.centroids.chunks_exact(self.k)
    }
}

fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(x, y)| *x as f64 * *y as f64).sum()
}

fn norm(a: &[f32]) -> f64 {
    dot(a, a).sqrt()
}

fn normalized(a: &[f32]) -> Option<Vec<f32>> {
    let n = norm(a);
    (n > 0.0).then(|| a.iter().map(|v| (*v as f64 / n) as f32).collect())
}

/// Index of the unit centroid with the largest dot product, ties to the smaller index.
fn argmax_dot(centroids: &[f32], k: usize, x: &[f32]) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, c) in centroids.chunks_exact(k).enumerate() {
        let d = dot(c, x);
        if d > best.1 {
            best = (i, d);
        }
    }
    best
}

/// Clusters L2-normalized intermediates into `n` unit centroids.
///
/// Lloyd's algorithm with k-means++ seeding drawn from `seed`, at most `iters`
/// rounds (stopping early once assignments settle). Centroids are renormalized
/// every round and an empty cluster is reseeded to the sample farthest from its
/// current centroid. Each centroid's output is the decoder applied to the mean
/// of the raw samples assigned to it, so a single-member cluster reproduces
/// that sample's exact embedding.
pub fn build_centroids(
    samples: &[IntermediateVector],
    n: usize,
    iters: usize,
    seed: u64,
    decoder: &Decoder,
) -> Result<CentroidBook> {
    if n == 0 {
        return Err(Error::Parameter("need at least one centroid".into()));
    }
    if samples.len() < n {
        return Err(Error::Parameter(format!(
            "{} samples cannot seed {n} centroids",
            samples.len()
        )));
    }
    let k = decoder.input_dim();
    let mut unit = Vec::with_capacity(samples.len() * k);
    let mut norms = Vec::with_capacity(samples.len());
    for s in samples {
        if s.len() != k {
            return Err(Error::Shape {
                expected: k,
                actual: s.len(),
            });
        }
        let u = normalized(s.values())
            .ok_or_else(|| Error::DegenerateInput("zero intermediate vector in samples".into()))?;
        unit.extend_from_slice(&u);
        norms.push(norm(s.values()));
    }
    let rows: Vec<&[f32]> = unit.chunks_exact(k).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = kmeans_plus_plus(&rows, n, k, &mut rng);

    let assign = |centroids: &[f32]| -> Vec<(usize, f64)> {
        rows.par_iter()
            .map(|x| argmax_dot(centroids, k, x))
            .collect()
    };
    let mut assignment = assign(&centroids);
    for _ in 0..iters {
        let mut sums = vec![0.0f64; n * k];
        let mut counts = vec![0usize; n];
        for (row, (c, _)) in rows.iter().zip(&assignment) {
            counts[*c] += 1;
            for (s, v) in sums[c * k..(c + 1) * k].iter_mut().zip(*row) {
                *s += *v as f64;
            }
        }
        // Farthest samples first, for reseeding empty clusters.
        let mut far: Vec<usize> = (0..rows.len()).collect();
        far.sort_by(|&a, &b| assignment[a].1.total_cmp(&assignment[b].1).then(a.cmp(&b)));
        let mut far = far.into_iter();
        for c in 0..n {
            let slot = &mut centroids[c * k..(c + 1) * k];
            if counts[c] == 0 {
                if let Some(i) = far.next() {
                    slot.copy_from_slice(rows[i]);
                }
                continue;
            }
            let sum = &sums[c * k..(c + 1) * k];
            let len = sum.iter().map(|v| v * v).sum::<f64>().sqrt();
            if len > 0.0 {
                for (dst, v) in slot.iter_mut().zip(sum) {
                    *dst = (v / len) as f32;
                }
            }
        }
        let next = assign(&centroids);
        let settled = next.iter().zip(&assignment).all(|(a, b)| a.0 == b.0);
        assignment = next;
        if settled {
            break;
        }
    }

    // Each centroid decodes the raw-space mean of its members; an empty
    // cluster decodes its direction at the average sample norm.
    let global_scale = norms.iter().sum::<f64>() / norms.len() as f64;
    let mut member_sum = vec![0.0f64; n * k];
    let mut member_count = vec![0usize; n];
    for ((c, _), s) in assignment.iter().zip(samples) {
        member_count[*c] += 1;
        for (acc, v) in member_sum[c * k..(c + 1) * k].iter_mut().zip(s.values()) {
            *acc += *v as f64;
        }
    }
    let outputs = (0..n)
        .into_par_iter()
        .map(|c| {
            let input: Vec<f32> = if member_count[c] == 0 {
                centroids[c * k..(c + 1) * k]
                    .iter()
                    .map(|v| (*v as f64 * global_scale) as f32)
                    .collect()
            } else {
                member_sum[c * k..(c + 1) * k]
                    .iter()
                    .map(|v| (v / member_count[c] as f64) as f32)
                    .collect()
            };
            decoder.forward(&input).map(EmbeddingVector::into_values)
        })
        .collect::<Result<Vec<_>>>()?
        .concat();

    let mut book = CentroidBook::from_parts(n, k, decoder.output_dim(), centroids, outputs)?;
    book.build_seed = Some(seed);
    Ok(book)
}

fn kmeans_plus_plus(rows: &[&[f32]], n: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<f32> {
    let mut chosen = vec![false; rows.len()];
    let mut centroids = Vec::with_capacity(n * k);
    let first = rng.random_range(0..rows.len());
    chosen[first] = true;
    centroids.extend_from_slice(rows[first]);
    // Squared L2 distance between unit vectors: 2 - 2 cos.
    let mut dist: Vec<f64> = rows
        .iter()
        .map(|r| (2.0 - 2.0 * dot(r, rows[first])).max(0.0))
        .collect();
    while centroids.len() < n * k {
        let total: f64 = dist
            .iter()
            .zip(&chosen)
            .filter(|(_, c)| !**c)
            .map(|(d, _)| d)
            .sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, d) in dist.iter().enumerate() {
                if chosen[i] || *d <= 0.0 {
                    continue;
                }
                pick = Some(i);
                target -= d;
                if target < 0.0 {
                    break;
                }
            }
            pick
        } else {
            None
        };
        let next = pick.unwrap_or_else(|| {
            chosen
                .iter()
                .position(|c| !c)
                .expect("samples >= n leaves an unchosen row")
        });
        chosen[next] = true;
        centroids.extend_from_slice(rows[next]);
        for (d, r) in dist.iter_mut().zip(rows) {
            *d = d.min((2.0 - 2.0 * dot(r, rows[next])).max(0.0));
        }
    }
    centroids
}

/// Index of the centroid nearest to `x` after normalization.
///
/// For unit vectors the largest dot product is the smallest L2 distance, so
/// this is an exact nearest-neighbour search. Ties go to the smaller index.
pub fn nearest_centroid(book: &CentroidBook, x: &[f32]) -> Result<usize> {
    if x.len() != book.k {
        return Err(Error::Shape {
            expected: book.k,
            actual: x.len(),
        });
    }
    let unit =
        normalized(x).ok_or_else(|| Error::DegenerateInput("cannot match a zero vector".into()))?;
    Ok(argmax_dot(&book.centroids, book.k, &unit).0)
}

/// The nearest centroid's precomputed embedding, returned as-is.
pub fn cached_decode(book: &CentroidBook, x: &IntermediateVector) -> Result<EmbeddingVector> {
    let i = nearest_centroid(book, x.values())?;
    Ok(EmbeddingVector::new(book.output(i).to_vec()))
}

/// `2 n k` for the dot products plus `n` comparisons for the argmax.
pub fn cache_flops(book: &CentroidBook) -> u64 {
    2 * book.n as u64 * book.k as u64 + book.n as u64
}

/// Tier-two cache with optional auditing against the exact decoder.
#[derive(Debug)]
pub struct DecoderCache<'a> {
    book: CentroidBook,
    audit: Option<&'a Decoder>,
    stats: CacheStats,
}

impl<'a> DecoderCache<'a> {
    pub fn new(book: CentroidBook) -> Self {
        Self {
            book,
            audit: None,
            stats: CacheStats::default(),
        }
    }

    /// Also runs `decoder` on every lookup and accumulates the L2 error.
    pub fn with_audit(mut self, decoder: &'a Decoder) -> Self {
        self.audit = Some(decoder);
        self
    }

    pub fn book(&self) -> &CentroidBook {
        &self.book
    }

    pub fn stats(&self) -> &CacheStats {
        &self.stats
    }

    pub fn decode(&mut self, x: &IntermediateVector) -> Result<EmbeddingVector> {
        let approx = cached_decode(&self.book, x)?;
        self.stats.decoder_hits += 1;
        if let Some(decoder) = self.audit {
            let exact = decoder.forward(x.values())?;
            self.stats.total_approx_error += approx.l2_distance(&exact);
            self.stats.audited += 1;
        }
        Ok(approx)
    }
}

/// Header `(n, k, d_out)` as little-endian u64, then centroids, then outputs
/// as little-endian f32.
pub fn write_book<W: Write>(mut w: W, book: &CentroidBook) -> Result<()> {
    for v in [book.n as u64, book.k as u64, book.d_out as u64] {
        w.write_all(&v.to_le_bytes())?;
    }
    for v in book.centroids.iter().chain(&book.outputs) {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_book<R: Read>(mut r: R) -> Result<CentroidBook> {
    let mut word = [0u8; 8];
    let mut header = [0usize; 3];
    for h in &mut header {
        r.read_exact(&mut word)?;
        *h = usize::try_from(u64::from_le_bytes(word))
            .map_err(|_| Error::Parameter("centroid book header overflows".into()))?;
    }
    let [n, k, d_out] = header;
    let mut read_f32s = |count: usize| -> Result<Vec<f32>> {
        let mut buf = vec![0u8; count * 4];
        r.read_exact(&mut buf)?;
        Ok(buf
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect())
    };
    let centroids = read_f32s(n * k)?;
    let outputs = read_f32s(n * d_out)?;
    CentroidBook::from_parts(n, k, d_out, centroids, outputs)
}
