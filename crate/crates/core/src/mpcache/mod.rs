//! Two-tier cache for the compute-stack paths.
//!
//! Tier one ([`EncoderCache`]) holds exact precomputed embeddings of hot ids and
//! skips the whole encoder/decoder stack on a hit. Tier two ([`CentroidBook`])
//! replaces the decoder MLP by a nearest-centroid lookup over normalized
//! intermediate vectors and returns an approximate embedding.

mod centroids;
mod encoder;

use serde::{Deserialize, Serialize};

pub use centroids::{
    build_centroids, cache_flops, cached_decode, nearest_centroid, read_book, write_book,
    CentroidBook, DecoderCache, DecoderCacheConfig, DEFAULT_KMEANS_ITERS,
};
pub use encoder::{
    build_hot_set, CachePolicy, EncoderCache, EncoderCacheConfig, KEY_OVERHEAD_BYTES,
};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CacheStats {
    pub encoder_hits: u64,
    pub encoder_misses: u64,
    pub decoder_hits: u64,
    /// Number of decoder-cache answers checked against the exact decoder.
    pub audited: u64,
    /// Sum of L2 distances between approximate and exact embeddings.
    pub total_approx_error: f64,
}

impl CacheStats {
    pub fn encoder_hit_rate(&self) -> f64 {
        let total = self.encoder_hits + self.encoder_misses;
        if total == 0 {
            0.0
        } else {
            self.encoder_hits as f64 / total as f64
        }
    }

    pub fn mean_approx_error(&self) -> f64 {
        if self.audited == 0 {
            0.0
        } else {
            self.total_approx_error / self.audited as f64
        }
    }
}
