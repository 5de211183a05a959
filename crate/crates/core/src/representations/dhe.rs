//! Deep hash embedding: `k` parallel hashes, an affine map into `[-1, 1]`, and
//! a ReLU MLP decoder.

use serde::{Deserialize, Serialize};

use super::hash::{make_hash_family, HashFunctionParams};
use super::{EmbeddingVector, IntermediateVector};
use crate::rng::SplitMix64;
use crate::{Error, Result};

const WEIGHT_STREAM: u64 = 0x5745_4947;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
}

impl Activation {
    #[inline]
    fn apply(self, v: f32) -> f32 {
        match self {
            Activation::Relu => v.max(0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DheConfig {
    /// Number of encoder hash functions.
    pub k: usize,
    /// Hash output range.
    pub m: u64,
    /// Decoder hidden width.
    pub d_nn: usize,
    /// Number of hidden layers.
    pub h: usize,
    pub d_out: usize,
    pub seed: u64,
    #[serde(default)]
    pub activation: Activation,
}

impl DheConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.d_nn == 0 || self.h == 0 || self.d_out == 0 {
            return Err(Error::Config(format!(
                "DHE requires k, d_nn, h, d_out >= 1 (got k={}, d_nn={}, h={}, d_out={})",
                self.k, self.d_nn, self.h, self.d_out
            )));
        }
        if self.m < 2 {
            return Err(Error::Config(format!(
                "DHE hash range m={} must be >= 2",
                self.m
            )));
        }
        Ok(())
    }

    /// Decoder layer shapes as `(fan_in, fan_out)`, input to output.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut shapes = Vec::with_capacity(self.h + 1);
        shapes.push((self.k, self.d_nn));
        for _ in 1..self.h {
            shapes.push((self.d_nn, self.d_nn));
        }
        shapes.push((self.d_nn, self.d_out));
        shapes
    }

    /// Weights plus biases across all decoder layers.
    pub fn decoder_params(&self) -> u64 {
        self.layer_shapes()
            .iter()
            .map(|&(i, o)| (i as u64) * (o as u64) + o as u64)
            .sum()
    }

    /// Multiply-adds times two; hashing and activations are not counted.
    pub fn decoder_flops(&self) -> u64 {
        2 * self
            .layer_shapes()
            .iter()
            .map(|&(i, o)| (i as u64) * (o as u64))
            .sum::<u64>()
    }

    /// Decoder parameters at four bytes each plus 16 bytes per hash function.
    pub fn footprint_bytes(&self) -> u64 {
        4 * self.decoder_params() + 16 * self.k as u64
    }
}

/// One fully connected layer, weights stored row-major as `[out][in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weights: Vec<f32>,
    pub bias: Vec<f32>,
}

impl Dense {
    pub fn new(fan_in: usize, fan_out: usize, weights: Vec<f32>, bias: Vec<f32>) -> Result<Self> {
        if weights.len() != fan_in * fan_out {
            return Err(Error::Shape {
                expected: fan_in * fan_out,
                actual: weights.len(),
            });
        }
        if bias.len() != fan_out {
            return Err(Error::Shape {
                expected: fan_out,
                actual: bias.len(),
            });
        }
        Ok(Self {
            fan_in,
            fan_out,
            weights,
            bias,
        })
    }

    fn forward(&self, input: &[f32], out: &mut Vec<f32>) {
        out.clear();
        out.extend(
            self.weights
                .chunks_exact(self.fan_in)
                .zip(&self.bias)
                .map(|(row, b)| row.iter().zip(input).fold(*b, |acc, (w, x)| acc + w * x)),
        );
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decoder {
    layers: Vec<Dense>,
    activation: Activation,
}

impl Decoder {
    /// Materializes weights and biases from the seed, each drawn uniformly from
    /// `[-1/sqrt(fan_in), 1/sqrt(fan_in))`, layer by layer, weights before biases.
    pub fn seeded(cfg: &DheConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = SplitMix64::stream(cfg.seed, WEIGHT_STREAM);
        let layers = cfg
            .layer_shapes()
            .into_iter()
            .map(|(fan_in, fan_out)| {
                let bound = 1.0 / (fan_in as f32).sqrt();
                let weights = (0..fan_in * fan_out)
                    .map(|_| rng.next_symmetric_f32(bound))
                    .collect();
                let bias = (0..fan_out)
                    .map(|_| rng.next_symmetric_f32(bound))
                    .collect();
                Dense {
                    fan_in,
                    fan_out,
                    weights,
                    bias,
                }
            })
            .collect();
        Ok(Self {
            layers,
            activation: cfg.activation,
        })
    }

    /// Builds a decoder from explicit layers; adjacent shapes must chain.
    pub fn from_layers(layers: Vec<Dense>, activation: Activation) -> Result<Self> {
        if layers.len() < 2 {
            return Err(Error::Parameter(
                "decoder needs at least one hidden layer and an output layer".into(),
            ));
        }
        for pair in layers.windows(2) {
            if pair[0].fan_out != pair[1].fan_in {
                return Err(Error::Shape {
                    expected: pair[0].fan_out,
                    actual: pair[1].fan_in,
                });
            }
        }
        Ok(Self { layers, activation })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].fan_out
    }

    /// Runs the MLP on a raw slice. Every layer but the last is activated.
    pub fn forward(&self, input: &[f32]) -> Result<EmbeddingVector> {
        if input.len() != self.input_dim() {
            return Err(Error::Shape {
                expected: self.input_dim(),
                actual: input.len(),
            });
        }
        let mut current = input.to_vec();
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            layer.forward(&current, &mut next);
            if i < last {
                next.iter_mut().for_each(|v| *v = self.activation.apply(*v));
            }
            std::mem::swap(&mut current, &mut next);
        }
        Ok(EmbeddingVector::new(current))
    }
}

/// A materialized DHE stack: hash family plus decoder.
#[derive(Debug, Clone)]
pub struct DheModel {
    cfg: DheConfig,
    hashes: Vec<HashFunctionParams>,
    decoder: Decoder,
}

impl DheModel {
    pub fn new(cfg: DheConfig) -> Result<Self> {
        cfg.validate()?;
        let hashes = make_hash_family(cfg.k, cfg.m, cfg.seed)?;
        let decoder = Decoder::seeded(&cfg)?;
        Ok(Self {
            cfg,
            hashes,
            decoder,
        })
    }

    /// Swaps in a hand-built decoder, e.g. for zero or identity weights.
    pub fn with_decoder(cfg: DheConfig, decoder: Decoder) -> Result<Self> {
        cfg.validate()?;
        if decoder.input_dim() != cfg.k {
            return Err(Error::Shape {
                expected: cfg.k,
                actual: decoder.input_dim(),
            });
        }
        if decoder.output_dim() != cfg.d_out {
            return Err(Error::Shape {
                expected: cfg.d_out,
                actual: decoder.output_dim(),
            });
        }
        let hashes = make_hash_family(cfg.k, cfg.m, cfg.seed)?;
        Ok(Self {
            cfg,
            hashes,
            decoder,
        })
    }

    pub fn config(&self) -> &DheConfig {
        &self.cfg
    }

    pub fn hashes(&self) -> &[HashFunctionParams] {
        &self.hashes
    }

    pub fn decoder(&self) -> &Decoder {
        &self.decoder
    }

    pub fn encode(&self, id: u64) -> IntermediateVector {
        let values = self
            .hashes
            .iter()
            .map(|h| normalize_hash(h.hash(id), self.cfg.m))
            .collect();
        IntermediateVector::from_values_unchecked(values)
    }

    pub fn decode(&self, x: &IntermediateVector) -> Result<EmbeddingVector> {
        self.decoder.forward(x.values())
    }

    pub fn generate(&self, id: u64) -> EmbeddingVector {
        self.decode(&self.encode(id))
            .expect("encoder output always matches the decoder input width")
    }
}

/// Affine map of a hash value in `[0, m)` onto `[-1, 1]`.
#[inline]
pub fn normalize_hash(value: u64, m: u64) -> f32 {
    let v = 2.0 * value as f64 / (m - 1) as f64 - 1.0;
    v.clamp(-1.0, 1.0) as f32
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> DheConfig {
        DheConfig {
            k: 4,
            m: 1_000_003,
            d_nn: 8,
            h: 2,
            d_out: 4,
            seed: 11,
            activation: Activation::Relu,
        }
    }

    #[test]
    fn normalization_bounds() {
        assert_eq!(normalize_hash(0, 100), -1.0);
        assert_eq!(normalize_hash(99, 100), 1.0);
        assert_eq!(normalize_hash(50, 101), 0.0);
    }

    #[test]
    fn parameter_and_flop_counts() {
        let cfg = small_cfg();
        // (4*8 + 8) + (64 + 8) + (8*4 + 4) = 148 params.
        assert_eq!(cfg.decoder_params(), 148);
        assert_eq!(cfg.footprint_bytes(), 4 * 148 + 64);
        assert_eq!(cfg.decoder_flops(), 2 * (32 + 64 + 32));
    }

    #[test]
    fn zero_weights_give_zero_output() {
        let cfg = small_cfg();
        let layers = cfg
            .layer_shapes()
            .into_iter()
            .map(|(i, o)| Dense::new(i, o, vec![0.0; i * o], vec![0.0; o]).unwrap())
            .collect();
        let model =
            DheModel::with_decoder(cfg, Decoder::from_layers(layers, Activation::Relu).unwrap())
                .unwrap();
        for id in [0, 1, 77, u64::MAX] {
            assert_eq!(model.generate(id).values(), &[0.0; 4]);
        }
    }

    #[test]
    fn identity_blocks_reproduce_input() {
        // k = d_nn = d_out = 3, h = 1: identity hidden layer and identity output.
        let eye: Vec<f32> = (0..9).map(|i| if i % 4 == 0 { 1.0 } else { 0.0 }).collect();
        let layers = vec![
            Dense::new(3, 3, eye.clone(), vec![0.0; 3]).unwrap(),
            Dense::new(3, 3, eye, vec![0.0; 3]).unwrap(),
        ];
        let decoder = Decoder::from_layers(layers, Activation::Relu).unwrap();
        let x = [0.25f32, 0.0, 1.0];
        assert_eq!(decoder.forward(&x).unwrap().values(), &x);
    }

    #[test]
    fn decode_rejects_wrong_width() {
        let model = DheModel::new(small_cfg()).unwrap();
        let x = IntermediateVector::new(vec![0.0; 3]).unwrap();
        assert!(matches!(
            model.decode(&x),
            Err(Error::Shape {
                expected: 4,
                actual: 3
            })
        ));
    }

    #[test]
    fn weights_within_init_bounds() {
        let model = DheModel::new(small_cfg()).unwrap();
        for layer in model.decoder().layers() {
            let bound = 1.0 / (layer.fan_in as f32).sqrt();
            assert!(layer
                .weights
                .iter()
                .chain(&layer.bias)
                .all(|w| w.abs() <= bound));
        }
    }

    #[test]
    fn mismatched_layers_rejected() {
        let layers = vec![
            Dense::new(2, 3, vec![0.0; 6], vec![0.0; 3]).unwrap(),
            Dense::new(4, 1, vec![0.0; 4], vec![0.0; 1]).unwrap(),
        ];
        assert!(Decoder::from_layers(layers, Activation::Relu).is_err());
        assert!(Dense::new(2, 2, vec![0.0; 3], vec![0.0; 2]).is_err());
    }
}
