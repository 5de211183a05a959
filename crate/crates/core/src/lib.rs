//! Multi-path embedding serving for recommendation inference.
//!
//! The crate models four ways of turning a sparse feature id into a dense
//! embedding (table lookup, a hash-encoder/MLP-decoder stack, a per-feature
//! selection of the two, and their concatenation), places them onto memory
//! constrained platforms, and simulates an SLA-aware online scheduler that
//! switches between the resulting execution paths query by query.
//!
//! Module map:
//!
//! - [`representations`]: numeric embedding generators and capacity/FLOP accounting.
//! - [`mpcache`]: exact hot-id cache in front of the encoder and an approximate
//!   centroid cache replacing the decoder.
//! - [`hardware`]: platform descriptors and affine latency cost models.
//! - [`planner`]: offline representation-to-platform mapping.
//! - [`scheduler`]: online path activation and the discrete-event simulator.
//! - [`workload`]: seeded query and id-access trace generation.
//! - [`metrics`]: throughput-of-correct-predictions, SLA violations and reports.
//! - [`config`]: the JSON run configuration and shipped presets.
//! - [`experiment`]: end-to-end runs of the multi-path policy and single-path baselines.

pub mod config;
pub mod error;
pub mod experiment;
pub mod hardware;
pub mod metrics;
pub mod mpcache;
pub mod planner;
pub mod representations;
pub mod rng;
pub mod scheduler;
pub mod workload;

pub use error::{Error, Result};
