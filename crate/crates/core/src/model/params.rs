//! Parameter storage. Tensors live in one ordered list so that the optimiser,
//! the gradient check and checkpoints can treat them uniformly; the layout
//! structs map each role to its slot.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::config::ModelConfig;
use super::tensor::Tensor;
use crate::error::{invalid, Result};
use crate::seed::seeded_rng;

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionSlots {
    pub query: Vec<usize>,
    pub key: Vec<usize>,
    pub value: Vec<usize>,
    pub output: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormSlots {
    pub gain: usize,
    pub bias: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeedForwardSlots {
    pub w1: usize,
    pub b1: usize,
    pub w2: usize,
    pub b2: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderSlots {
    pub attention: AttentionSlots,
    pub norm1: NormSlots,
    pub feed_forward: FeedForwardSlots,
    pub norm2: NormSlots,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderSlots {
    pub self_attention: AttentionSlots,
    pub norm1: NormSlots,
    pub cross_attention: AttentionSlots,
    pub norm2: NormSlots,
    pub feed_forward: FeedForwardSlots,
    pub norm3: NormSlots,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    /// `input_len x d_model`: per-position scale of the scalar feature.
    pub input_weight: usize,
    pub input_bias: usize,
    pub token_embedding: usize,
    pub encoder: Vec<EncoderSlots>,
    pub decoder: Vec<DecoderSlots>,
    pub output_weight: usize,
    pub output_bias: usize,
}

#[derive(Clone, Copy)]
enum Init {
    Zeros,
    Ones,
    Normal(f64),
}

struct Builder {
    names: Vec<String>,
    shapes: Vec<Vec<usize>>,
    inits: Vec<Init>,
}

impl Builder {
    fn add(&mut self, name: String, shape: Vec<usize>, init: Init) -> usize {
        self.names.push(name);
        self.shapes.push(shape);
        self.inits.push(init);
        self.names.len() - 1
    }

    fn matrix(&mut self, name: String, rows: usize, cols: usize) -> usize {
        // Glorot-normal
        let std = (2.0 / (rows + cols) as f64).sqrt();
        self.add(name, vec![rows, cols], Init::Normal(std))
    }

    fn attention(&mut self, prefix: &str, cfg: &ModelConfig) -> AttentionSlots {
        let mut proj = |role: &str| -> Vec<usize> {
            (0..cfg.heads)
                .map(|h| self.matrix(format!("{prefix}.w_{role}.{h}"), cfg.d_model, cfg.head_dim))
                .collect()
        };
        let query = proj("q");
        let key = proj("k");
        let value = proj("v");
        let output = self.matrix(format!("{prefix}.w_o"), cfg.heads * cfg.head_dim, cfg.d_model);
        AttentionSlots { query, key, value, output }
    }

    fn norm(&mut self, prefix: &str, d: usize) -> NormSlots {
        NormSlots {
            gain: self.add(format!("{prefix}.gain"), vec![d], Init::Ones),
            bias: self.add(format!("{prefix}.bias"), vec![d], Init::Zeros),
        }
    }

    fn feed_forward(&mut self, prefix: &str, cfg: &ModelConfig) -> FeedForwardSlots {
        FeedForwardSlots {
            w1: self.matrix(format!("{prefix}.w1"), cfg.d_model, cfg.feed_forward_dim),
            b1: self.add(format!("{prefix}.b1"), vec![cfg.feed_forward_dim], Init::Zeros),
            w2: self.matrix(format!("{prefix}.w2"), cfg.feed_forward_dim, cfg.d_model),
            b2: self.add(format!("{prefix}.b2"), vec![cfg.d_model], Init::Zeros),
        }
    }
}

impl Layout {
    fn build(cfg: &ModelConfig) -> (Self, Builder) {
        let mut b = Builder { names: vec![], shapes: vec![], inits: vec![] };
        let input_weight = b.add("input.weight".into(), vec![1, cfg.d_model], Init::Normal(1.0));
        let input_bias = b.add("input.bias".into(), vec![cfg.d_model], Init::Zeros);
        let token_embedding =
            b.add("token.embedding".into(), vec![cfg.vocab_size, cfg.d_model], Init::Normal(1.0));
        let encoder = (0..cfg.encoder_layers)
            .map(|l| {
                let p = format!("encoder.{l}");
                EncoderSlots {
                    attention: b.attention(&format!("{p}.attention"), cfg),
                    norm1: b.norm(&format!("{p}.norm1"), cfg.d_model),
                    feed_forward: b.feed_forward(&format!("{p}.ff"), cfg),
                    norm2: b.norm(&format!("{p}.norm2"), cfg.d_model),
                }
            })
            .collect();
        let decoder = (0..cfg.decoder_layers)
            .map(|l| {
                let p = format!("decoder.{l}");
                DecoderSlots {
                    self_attention: b.attention(&format!("{p}.self_attention"), cfg),
                    norm1: b.norm(&format!("{p}.norm1"), cfg.d_model),
                    cross_attention: b.attention(&format!("{p}.cross_attention"), cfg),
                    norm2: b.norm(&format!("{p}.norm2"), cfg.d_model),
                    feed_forward: b.feed_forward(&format!("{p}.ff"), cfg),
                    norm3: b.norm(&format!("{p}.norm3"), cfg.d_model),
                }
            })
            .collect();
        let output_weight = b.matrix("output.weight".into(), cfg.d_model, cfg.vocab_size);
        let output_bias = b.add("output.bias".into(), vec![cfg.vocab_size], Init::Zeros);
        let layout = Self {
            input_weight,
            input_bias,
            token_embedding,
            encoder,
            decoder,
            output_weight,
            output_bias,
        };
        (layout, b)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub layout: Layout,
    pub names: Vec<String>,
    pub tensors: Vec<Tensor>,
}

impl ModelParams {
    /// Randomly initialised parameters, deterministic in `config.seed`.
    pub fn init(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let (layout, b) = Layout::build(config);
        let mut rng = seeded_rng(config.seed);
        let tensors = b
            .shapes
            .iter()
            .zip(&b.inits)
            .map(|(shape, init)| {
                let n: usize = shape.iter().product();
                let data = match *init {
                    Init::Zeros => vec![0.0; n],
                    Init::Ones => vec![1.0; n],
                    Init::Normal(std) => {
                        let dist = Normal::new(0.0, std).expect("finite std");
                        (0..n).map(|_| dist.sample(&mut rng)).collect()
                    }
                };
                Tensor { shape: shape.clone(), data }
            })
            .collect();
        Ok(Self {
            config: config.clone(),
            layout,
            names: b.names,
            tensors,
        })
    }

    /// Reassembles parameters from named tensors (as read from a checkpoint).
    pub fn from_tensors(config: &ModelConfig, named: Vec<(String, Tensor)>) -> Result<Self> {
        let mut params = Self::init(config)?;
        if named.len() != params.tensors.len() {
            return invalid(format!(
                "checkpoint has {} tensors, model needs {}",
                named.len(),
                params.tensors.len()
            ));
        }
        for (i, (name, t)) in named.into_iter().enumerate() {
            if name != params.names[i] || t.shape != params.tensors[i].shape {
                return invalid(format!("checkpoint tensor {i} ({name}) does not match the model"));
            }
            params.tensors[i] = t;
        }
        Ok(params)
    }

    pub fn count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(Tensor::is_finite)
    }

    /// Picks `n` random (tensor, entry) coordinates, uniformly over all scalars.
    pub fn sample_coordinates(&self, n: usize, rng: &mut impl Rng) -> Vec<(usize, usize)> {
        let total = self.count();
        (0..n)
            .map(|_| {
                let mut flat = rng.random_range(0..total);
                for (t, tensor) in self.tensors.iter().enumerate() {
                    if flat < tensor.len() {
                        return (t, flat);
                    }
                    flat -= tensor.len();
                }
                unreachable!("flat index within total")
            })
            .collect()
    }
}
