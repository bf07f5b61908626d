use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// d_model 512, head_dim 64 (8 heads), 4 encoder and 4 decoder layers.
    Paper,
    /// d_model 64, 4 heads, 2 encoder and 2 decoder layers.
    Desk,
    /// d_model 8, 2 heads, 1+1 layers; for gradient checks.
    Tiny,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Feature sequence length (subcarriers x antenna pairs x beams).
    pub input_len: usize,
    pub vocab_size: usize,
    /// Width of queries, keys and values; also the multi-head output width.
    pub d_model: usize,
    pub head_dim: usize,
    pub heads: usize,
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    pub feed_forward_dim: usize,
    /// Longest label including SOS and EOS (2 * max people + 2).
    pub max_decode_len: usize,
    pub dropout: f64,
    pub seed: u64,
}

impl ModelConfig {
    pub fn profile(
        profile: Profile,
        input_len: usize,
        vocab_size: usize,
        max_people: usize,
        seed: u64,
    ) -> Self {
        let (d_model, heads, enc, dec, ff) = match profile {
            Profile::Paper => (512, 8, 4, 4, 2048),
            Profile::Desk => (64, 4, 2, 2, 128),
            Profile::Tiny => (8, 2, 1, 1, 16),
        };
        Self {
            input_len,
            vocab_size,
            d_model,
            head_dim: d_model / heads,
            heads,
            encoder_layers: enc,
            decoder_layers: dec,
            feed_forward_dim: ff,
            max_decode_len: 2 * max_people + 2,
            dropout: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.heads == 0 || self.d_model != self.heads * self.head_dim {
            return invalid(format!(
                "d_model {} must equal heads {} x head_dim {}",
                self.d_model, self.heads, self.head_dim
            ));
        }
        if self.max_decode_len < 4 {
            return invalid("max_decode_len must be at least 4");
        }
        if self.input_len == 0 || self.vocab_size < 4 || self.feed_forward_dim == 0 {
            return invalid("input length, vocabulary and feed-forward width must be non-trivial");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return invalid("dropout must lie in [0, 1)");
        }
        Ok(())
    }
}
