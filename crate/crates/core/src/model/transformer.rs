//! Encoder-decoder transformer over CSI feature sequences.
//!
//! Each feature value is one input position ("word"). The decoder emits the
//! label tokens SOS, x1, y1, ..., EOS autoregressively.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::graph::{Graph, Var};
use super::params::{AttentionSlots, FeedForwardSlots, ModelParams, NormSlots};
use super::tensor::Tensor;
use crate::error::{invalid, Result};
use crate::preprocess::FeatureVector;
use crate::tokens::{Token, TokenSequence, TokenVocab, EOS, PAD, SOS};

/// Sinusoidal position table, `len x d`.
pub fn positional_encoding(len: usize, d: usize) -> Tensor {
    let mut data = vec![0.0; len * d];
    for t in 0..len {
        for i in 0..d {
            let freq = 1.0 / 10_000f64.powf((2 * (i / 2)) as f64 / d as f64);
            let angle = t as f64 * freq;
            data[t * d + i] = if i % 2 == 0 { angle.sin() } else { angle.cos() };
        }
    }
    Tensor { shape: vec![len, d], data }
}

/// A forward computation over one model, recorded on a tape.
pub struct Session<'p> {
    pub graph: Graph,
    params: &'p ModelParams,
    vars: Vec<Var>,
    dropout: Option<(f64, ChaCha8Rng)>,
}

impl<'p> Session<'p> {
    /// Parameters are bound as trainable leaves, in slot order.
    pub fn training(params: &'p ModelParams) -> Self {
        let mut graph = Graph::new();
        let vars = params.tensors.iter().map(|t| graph.param(t.clone())).collect();
        Self { graph, params, vars, dropout: None }
    }

    /// Parameters bound as constants; no gradient bookkeeping.
    pub fn inference(params: &'p ModelParams) -> Self {
        let mut graph = Graph::new();
        let vars = params.tensors.iter().map(|t| graph.constant(t.clone())).collect();
        Self { graph, params, vars, dropout: None }
    }

    pub fn with_dropout(mut self, rng: ChaCha8Rng) -> Self {
        if self.params.config.dropout > 0.0 {
            self.dropout = Some((self.params.config.dropout, rng));
        }
        self
    }

    /// Graph variable bound to parameter slot `slot`.
    pub fn param(&self, slot: usize) -> Var {
        self.vars[slot]
    }

    pub fn value(&self, v: Var) -> &Tensor {
        self.graph.value(v)
    }

    fn dropout(&mut self, x: Var) -> Result<Var> {
        let Some((rate, rng)) = self.dropout.as_mut() else {
            return Ok(x);
        };
        let keep = 1.0 - *rate;
        let n = self.graph.value(x).len();
        let mask = (0..n)
            .map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
            .collect();
        self.graph.mask(x, mask)
    }

    /// Every amplitude goes through the same affine map; position enters
    /// only through the sinusoidal code.
    pub fn embed_input(&mut self, features: &[f64]) -> Result<Var> {
        let cfg = &self.params.config;
        if features.len() != cfg.input_len {
            return invalid(format!(
                "feature length {} does not match model input length {}",
                features.len(),
                cfg.input_len
            ));
        }
        let layout = &self.params.layout;
        let column = self.graph.constant(Tensor::matrix(features.len(), 1, features.to_vec())?);
        let scaled = self.graph.matmul(column, self.vars[layout.input_weight], false)?;
        let biased = self.graph.add_row(scaled, self.vars[layout.input_bias])?;
        let pe = self.graph.constant(positional_encoding(cfg.input_len, cfg.d_model));
        self.graph.add(biased, pe)
    }

    /// `softmax(q k^T / sqrt(d)) v`; returns the output and the weight matrix.
    pub fn attention(&mut self, q: Var, k: Var, v: Var, causal: bool) -> Result<(Var, Var)> {
        let d = self.graph.value(q).cols();
        if self.graph.value(k).cols() != d {
            return invalid("query and key widths differ");
        }
        if self.graph.value(k).rows() != self.graph.value(v).rows() {
            return invalid("key and value lengths differ");
        }
        // scaling the queries is cheaper than scaling the L x L scores
        let q = self.graph.scale(q, 1.0 / (d as f64).sqrt());
        let scores = self.graph.matmul(q, k, true)?;
        let weights = self.graph.softmax_rows(scores, causal);
        let out = self.graph.matmul(weights, v, false)?;
        Ok((out, weights))
    }

    pub fn multi_head(
        &mut self,
        xq: Var,
        xk: Var,
        xv: Var,
        slots: &AttentionSlots,
        causal: bool,
    ) -> Result<Var> {
        let mut heads = Vec::with_capacity(slots.query.len());
        for h in 0..slots.query.len() {
            let q = self.graph.matmul(xq, self.vars[slots.query[h]], false)?;
            let k = self.graph.matmul(xk, self.vars[slots.key[h]], false)?;
            let v = self.graph.matmul(xv, self.vars[slots.value[h]], false)?;
            heads.push(self.attention(q, k, v, causal)?.0);
        }
        let cat = self.graph.concat_cols(&heads)?;
        self.graph.matmul(cat, self.vars[slots.output], false)
    }

    pub fn add_norm(&mut self, x: Var, sub: Var, slots: &NormSlots) -> Result<Var> {
        let sub = self.dropout(sub)?;
        let sum = self.graph.add(x, sub)?;
        self.graph
            .layer_norm(sum, self.vars[slots.gain], self.vars[slots.bias])
    }

    fn feed_forward(&mut self, x: Var, slots: &FeedForwardSlots) -> Result<Var> {
        let h = self.graph.matmul(x, self.vars[slots.w1], false)?;
        let h = self.graph.add_row(h, self.vars[slots.b1])?;
        let h = self.graph.relu(h);
        let o = self.graph.matmul(h, self.vars[slots.w2], false)?;
        self.graph.add_row(o, self.vars[slots.b2])
    }

    pub fn encode(&mut self, embedded: Var) -> Result<Var> {
        let params = self.params;
        let mut x = embedded;
        for layer in &params.layout.encoder {
            let a = self.multi_head(x, x, x, &layer.attention, false)?;
            x = self.add_norm(x, a, &layer.norm1)?;
            let f = self.feed_forward(x, &layer.feed_forward)?;
            x = self.add_norm(x, f, &layer.norm2)?;
        }
        Ok(x)
    }

    /// Logits for every prefix position, `len(prefix) x vocab`. Row `t`
    /// predicts the token following `prefix[..=t]`.
    pub fn decode(&mut self, memory: Var, prefix: &[u32]) -> Result<Var> {
        let params = self.params;
        let cfg = &params.config;
        if prefix.first() != Some(&SOS) {
            return invalid("decoder prefix must start with SOS");
        }
        if prefix.len() > cfg.max_decode_len {
            return invalid(format!(
                "prefix of length {} exceeds max_decode_len {}",
                prefix.len(),
                cfg.max_decode_len
            ));
        }
        let ids: Vec<usize> = prefix.iter().map(|&t| t as usize).collect();
        let emb = self.graph.gather(self.vars[params.layout.token_embedding], &ids)?;
        let pe = self.graph.constant(positional_encoding(ids.len(), cfg.d_model));
        let mut y = self.graph.add(emb, pe)?;
        for layer in &params.layout.decoder {
            let a = self.multi_head(y, y, y, &layer.self_attention, true)?;
            y = self.add_norm(y, a, &layer.norm1)?;
            let c = self.multi_head(y, memory, memory, &layer.cross_attention, false)?;
            y = self.add_norm(y, c, &layer.norm2)?;
            let f = self.feed_forward(y, &layer.feed_forward)?;
            y = self.add_norm(y, f, &layer.norm3)?;
        }
        let logits = self.graph.matmul(y, self.vars[params.layout.output_weight], false)?;
        self.graph.add_row(logits, self.vars[params.layout.output_bias])
    }

    pub fn encode_features(&mut self, features: &[f64]) -> Result<Var> {
        let emb = self.embed_input(features)?;
        self.encode(emb)
    }

    /// Teacher-forced cross-entropy of one labelled sequence, times `scale`.
    pub fn sequence_loss(&mut self, features: &[f64], label: &[u32], scale: f64) -> Result<Var> {
        let memory = self.encode_features(features)?;
        self.memory_loss(memory, label, scale)
    }

    pub fn memory_loss(&mut self, memory: Var, label: &[u32], scale: f64) -> Result<Var> {
        if label.len() < 2 {
            return invalid("label must contain at least SOS and EOS");
        }
        let logits = self.decode(memory, &label[..label.len() - 1])?;
        let targets: Vec<Option<usize>> = label[1..]
            .iter()
            .map(|&t| (t != PAD).then_some(t as usize))
            .collect();
        self.graph.cross_entropy(logits, &targets, scale)
    }

    /// Greedy decoding restricted to well-formed sequences: coordinates come
    /// in (x, y) pairs and EOS is forced once the length cap is reached.
    pub fn greedy(&mut self, memory: Var, vocab: &TokenVocab) -> Result<TokenSequence> {
        let cfg = &self.params.config;
        if vocab.len() != cfg.vocab_size {
            return invalid("vocabulary does not match the model");
        }
        let body_cap = cfg.max_decode_len - 2;
        let mut prefix = vec![SOS];
        loop {
            let body_len = prefix.len() - 1;
            let logits = self.decode(memory, &prefix)?;
            let t = self.value(logits);
            let row = t.row(t.rows() - 1);
            let next = (0..row.len() as u32)
                .filter(|&id| allowed(vocab.token(id), body_len, body_cap))
                .max_by(|&a, &b| row[a as usize].total_cmp(&row[b as usize]).then(b.cmp(&a)))
                .unwrap_or(EOS);
            prefix.push(next);
            if next == EOS {
                return Ok(TokenSequence(prefix));
            }
        }
    }
}

/// Weights of one stand-alone multi-head attention block.
#[derive(Debug, Clone)]
pub struct AttentionWeights {
    pub query: Vec<Tensor>,
    pub key: Vec<Tensor>,
    pub value: Vec<Tensor>,
    pub output: Tensor,
}

pub fn embed_input(features: &FeatureVector, params: &ModelParams) -> Result<Tensor> {
    let mut s = Session::inference(params);
    let v = s.embed_input(&features.values)?;
    Ok(s.value(v).clone())
}

/// Single-head attention on raw tensors. Returns `(output, weights)`.
pub fn scaled_dot_attention(q: &Tensor, k: &Tensor, v: &Tensor, causal: bool) -> Result<(Tensor, Tensor)> {
    let mut g = Graph::new();
    let (qv, kv, vv) = (g.constant(q.clone()), g.constant(k.clone()), g.constant(v.clone()));
    let d = q.cols();
    if k.cols() != d || k.rows() != v.rows() {
        return invalid("attention shape mismatch");
    }
    let scores = g.matmul(qv, kv, true)?;
    let scores = g.scale(scores, 1.0 / (d as f64).sqrt());
    let w = g.softmax_rows(scores, causal);
    let out = g.matmul(w, vv, false)?;
    Ok((g.value(out).clone(), g.value(w).clone()))
}

pub fn multi_head(
    xq: &Tensor,
    xk: &Tensor,
    xv: &Tensor,
    weights: &AttentionWeights,
    causal: bool,
) -> Result<Tensor> {
    let heads = weights.query.len();
    if heads == 0 || weights.key.len() != heads || weights.value.len() != heads {
        return invalid("every head needs query, key and value projections");
    }
    let mut g = Graph::new();
    let (q_in, k_in, v_in) = (g.constant(xq.clone()), g.constant(xk.clone()), g.constant(xv.clone()));
    let mut outs = Vec::with_capacity(heads);
    for h in 0..heads {
        let wq = g.constant(weights.query[h].clone());
        let wk = g.constant(weights.key[h].clone());
        let wv = g.constant(weights.value[h].clone());
        let q = g.matmul(q_in, wq, false)?;
        let k = g.matmul(k_in, wk, false)?;
        let v = g.matmul(v_in, wv, false)?;
        let d = g.value(q).cols();
        let s = g.matmul(q, k, true)?;
        let s = g.scale(s, 1.0 / (d as f64).sqrt());
        let a = g.softmax_rows(s, causal);
        outs.push(g.matmul(a, v, false)?);
    }
    let cat = g.concat_cols(&outs)?;
    let wo = g.constant(weights.output.clone());
    let out = g.matmul(cat, wo, false)?;
    Ok(g.value(out).clone())
}

pub fn add_norm(x: &Tensor, sub_out: &Tensor, gain: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let mut g = Graph::new();
    let (xv, sv) = (g.constant(x.clone()), g.constant(sub_out.clone()));
    let (gv, bv) = (g.constant(gain.clone()), g.constant(bias.clone()));
    let sum = g.add(xv, sv)?;
    let out = g.layer_norm(sum, gv, bv)?;
    Ok(g.value(out).clone())
}

pub fn encode(embedded: &Tensor, params: &ModelParams) -> Result<Tensor> {
    let mut s = Session::inference(params);
    let e = s.graph.constant(embedded.clone());
    let m = s.encode(e)?;
    Ok(s.value(m).clone())
}

pub fn decode_logits(memory: &Tensor, prefix: &[u32], params: &ModelParams) -> Result<Tensor> {
    let mut s = Session::inference(params);
    let m = s.graph.constant(memory.clone());
    let l = s.decode(m, prefix)?;
    Ok(s.value(l).clone())
}

/// Next-token logits after `prefix`.
pub fn decode_step(memory: &Tensor, prefix: &[u32], params: &ModelParams) -> Result<Vec<f64>> {
    let logits = decode_logits(memory, prefix, params)?;
    Ok(logits.row(logits.rows() - 1).to_vec())
}

/// Which tokens may follow a prefix under the label grammar.
fn allowed(token: Option<Token>, body_len: usize, body_cap: usize) -> bool {
    let x_slot = body_len % 2 == 0;
    match token {
        Some(Token::X(_)) => x_slot && body_len < body_cap,
        Some(Token::Y(_)) => !x_slot,
        Some(Token::Eos) => x_slot,
        _ => false,
    }
}

pub fn predict(features: &FeatureVector, params: &ModelParams, vocab: &TokenVocab) -> Result<TokenSequence> {
    predict_values(&features.values, params, vocab)
}

pub fn predict_values(features: &[f64], params: &ModelParams, vocab: &TokenVocab) -> Result<TokenSequence> {
    let mut s = Session::inference(params);
    let memory = s.encode_features(features)?;
    s.greedy(memory, vocab)
}
