//! Teacher-forced training with Adam, global-norm clipping and early stopping.

use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::params::ModelParams;
use super::transformer::Session;
use crate::error::{invalid, io_err, Error, Result};
use crate::seed::{derive_seed, seeded_rng};
use crate::tokens::{TokenSequence, TokenVocab, PAD};

/// One (features, label) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub features: Vec<f64>,
    pub label: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Linear ramp of the step size over the first steps.
    pub warmup_steps: usize,
    /// Cosine decay of the step size to zero over the planned number of
    /// steps (`max_steps`, or `max_epochs` full passes).
    #[serde(default)]
    pub cosine_decay: bool,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Global gradient-norm clip; `None` disables clipping.
    pub clip_norm: Option<f64>,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Hard cap on optimiser steps across all epochs.
    pub max_steps: Option<usize>,
    /// Epochs without validation-loss improvement before stopping.
    pub patience: usize,
    /// Stop once validation sequence accuracy reaches this fraction.
    pub target_val_accuracy: Option<f64>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            warmup_steps: 0,
            cosine_decay: false,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            clip_norm: Some(1.0),
            batch_size: 16,
            max_epochs: 100,
            max_steps: None,
            patience: 5,
            target_val_accuracy: None,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || self.batch_size == 0 || self.max_epochs == 0 {
            return invalid("learning rate, batch size and epoch count must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return invalid("Adam betas must lie in [0, 1)");
        }
        if self.clip_norm.is_some_and(|c| !(c > 0.0)) {
            return invalid("clip norm must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub step: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_count_acc: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub rows: Vec<LogRow>,
    /// Step whose parameters were kept (lowest validation loss).
    pub best_step: usize,
    pub stopped_early: bool,
}

impl TrainingLog {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => io_err(path)(io),
            other => Error::InvalidArgument(format!("{other:?}")),
        })?;
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush().map_err(io_err(path))?;
        Ok(())
    }
}

/// Gradient-sum over `batch` of `scale * CE`, plus the scaled loss.
pub fn batch_gradients(params: &ModelParams, batch: &[Example], scale: f64) -> Result<(f64, Vec<Vec<f64>>)> {
    gradients(params, batch, scale, None)
}

/// Token-mean loss and gradients of a batch. With `dropout_seed`, each
/// sample draws its dropout masks from its own stream derived from it.
pub fn mean_batch_gradients(
    params: &ModelParams,
    batch: &[Example],
    dropout_seed: Option<u64>,
) -> Result<(f64, Vec<Vec<f64>>)> {
    let tokens = target_tokens(batch).max(1);
    gradients(params, batch, 1.0 / tokens as f64, dropout_seed)
}

fn gradients(
    params: &ModelParams,
    batch: &[Example],
    scale: f64,
    dropout_seed: Option<u64>,
) -> Result<(f64, Vec<Vec<f64>>)> {
    let per_sample: Vec<(f64, Vec<Option<Vec<f64>>>)> = batch
        .par_iter()
        .enumerate()
        .map(|(i, ex)| {
            let mut s = Session::training(params);
            if let Some(seed) = dropout_seed {
                s = s.with_dropout(seeded_rng(derive_seed(seed, &[i as u64])));
            }
            let loss = s.sequence_loss(&ex.features, &ex.label, scale)?;
            let value = s.value(loss).data[0];
            let mut grads = s.graph.backward(loss);
            grads.truncate(params.tensors.len());
            Ok((value, grads))
        })
        .collect::<Result<_>>()?;
    let mut total = 0.0;
    let mut sum: Vec<Vec<f64>> = params.tensors.iter().map(|t| vec![0.0; t.len()]).collect();
    // fixed reduction order keeps results independent of thread count
    for (loss, grads) in per_sample {
        total += loss;
        for (acc, g) in sum.iter_mut().zip(grads) {
            if let Some(g) = g {
                acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
            }
        }
    }
    Ok((total, sum))
}

fn target_tokens(batch: &[Example]) -> usize {
    batch
        .iter()
        .map(|e| e.label[1..].iter().filter(|&&t| t != PAD).count())
        .sum()
}

pub struct Adam {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: i32,
    /// Step count over which the cosine decay runs, if enabled.
    pub horizon: Option<usize>,
}

impl Adam {
    pub fn new(params: &ModelParams) -> Self {
        let zeros = || params.tensors.iter().map(|t| vec![0.0; t.len()]).collect();
        Self { m: zeros(), v: zeros(), t: 0, horizon: None }
    }

    pub fn step(&mut self, params: &mut ModelParams, grads: &[Vec<f64>], cfg: &TrainConfig) {
        self.t += 1;
        let warm = if cfg.warmup_steps > 0 {
            (self.t as f64 / cfg.warmup_steps as f64).min(1.0)
        } else {
            1.0
        };
        let decay = match self.horizon {
            Some(h) if h > 0 => {
                let progress = (self.t as f64 / h as f64).min(1.0);
                0.5 * (1.0 + (std::f64::consts::PI * progress).cos())
            }
            _ => 1.0,
        };
        let lr = cfg.learning_rate * warm * decay;
        let c1 = 1.0 - cfg.beta1.powi(self.t);
        let c2 = 1.0 - cfg.beta2.powi(self.t);
        for (i, tensor) in params.tensors.iter_mut().enumerate() {
            for (j, w) in tensor.data.iter_mut().enumerate() {
                let g = grads[i][j];
                let m = &mut self.m[i][j];
                let v = &mut self.v[i][j];
                *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
                *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
                *w -= lr * (*m / c1) / ((*v / c2).sqrt() + cfg.epsilon);
            }
        }
    }
}

pub fn global_norm(grads: &[Vec<f64>]) -> f64 {
    grads.iter().flatten().map(|g| g * g).sum::<f64>().sqrt()
}

/// Scales `grads` in place so their global norm is at most `max_norm`.
pub fn clip_global_norm(grads: &mut [Vec<f64>], max_norm: f64) -> f64 {
    let norm = global_norm(grads);
    if norm > max_norm {
        let s = max_norm / norm;
        grads.iter_mut().flatten().for_each(|g| *g *= s);
    }
    norm
}

/// Validation summary: mean per-token loss, count accuracy, sequence accuracy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Validation {
    pub loss: f64,
    pub count_accuracy: f64,
    pub sequence_accuracy: f64,
}

pub fn validate(params: &ModelParams, vocab: &TokenVocab, examples: &[Example]) -> Result<Validation> {
    if examples.is_empty() {
        return Ok(Validation { loss: f64::NAN, count_accuracy: f64::NAN, sequence_accuracy: f64::NAN });
    }
    let tokens = target_tokens(examples).max(1) as f64;
    let results: Vec<(f64, bool, bool)> = examples
        .par_iter()
        .map(|ex| {
            let mut s = Session::inference(params);
            let memory = s.encode_features(&ex.features)?;
            let loss = s.memory_loss(memory, &ex.label, 1.0)?;
            let loss = s.value(loss).data[0];
            let pred = s.greedy(memory, vocab)?;
            let count = |s: &TokenSequence| vocab.decode_people(s).map(|p| p.len());
            let count_ok = count(&pred).is_some() && count(&pred) == count(&TokenSequence(ex.label.clone()));
            Ok((loss, count_ok, pred.0 == ex.label))
        })
        .collect::<Result<_>>()?;
    let n = examples.len() as f64;
    Ok(Validation {
        loss: results.iter().map(|r| r.0).sum::<f64>() / tokens,
        count_accuracy: results.iter().filter(|r| r.1).count() as f64 / n,
        sequence_accuracy: results.iter().filter(|r| r.2).count() as f64 / n,
    })
}

/// Trains `params` in place and returns the log. The parameters left behind
/// are those with the lowest validation loss, the ones that met
/// `target_val_accuracy`, or the last ones when there is no validation set.
pub fn train(
    params: &mut ModelParams,
    vocab: &TokenVocab,
    train_set: &[Example],
    val_set: &[Example],
    cfg: &TrainConfig,
    mut on_row: impl FnMut(&LogRow),
) -> Result<TrainingLog> {
    cfg.validate()?;
    if train_set.is_empty() {
        return invalid("training split is empty");
    }
    let mut adam = Adam::new(params);
    if cfg.cosine_decay {
        let planned = cfg.max_epochs * train_set.len().div_ceil(cfg.batch_size);
        adam.horizon = Some(cfg.max_steps.map_or(planned, |m| m.min(planned)));
    }
    let mut log = TrainingLog::default();
    let mut best: Option<(f64, ModelParams)> = None;
    let mut since_best = 0;
    let mut step = 0;
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    'epochs: for epoch in 0..cfg.max_epochs {
        let mut rng = seeded_rng(derive_seed(cfg.seed, &[epoch as u64]));
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut epoch_tokens = 0;
        for chunk in order.chunks(cfg.batch_size) {
            if cfg.max_steps.is_some_and(|m| step >= m) {
                break;
            }
            let batch: Vec<Example> = chunk.iter().map(|&i| train_set[i].clone()).collect();
            let (loss, mut grads) = mean_batch_gradients(params, &batch, Some(derive_seed(cfg.seed, &[epoch as u64, step as u64])))?;
            let tokens = target_tokens(&batch);
            if !loss.is_finite() || grads.iter().flatten().any(|g| !g.is_finite()) {
                return Err(Error::TrainingFailure {
                    step,
                    reason: "non-finite loss or gradient".into(),
                    last_loss: log.rows.last().map(|r| r.train_loss),
                });
            }
            if let Some(c) = cfg.clip_norm {
                clip_global_norm(&mut grads, c);
            }
            adam.step(params, &grads, cfg);
            step += 1;
            epoch_loss += loss * tokens as f64;
            epoch_tokens += tokens;
        }
        if epoch_tokens == 0 {
            break;
        }
        let val = validate(params, vocab, val_set)?;
        let row = LogRow {
            step,
            train_loss: epoch_loss / epoch_tokens as f64,
            val_loss: val.loss,
            val_count_acc: val.count_accuracy,
        };
        on_row(&row);
        log.rows.push(row);
        if !params.is_finite() {
            return Err(Error::TrainingFailure {
                step,
                reason: "parameters became non-finite".into(),
                last_loss: Some(epoch_loss / epoch_tokens as f64),
            });
        }
        if val_set.is_empty() {
            log.best_step = step;
        } else if best.as_ref().is_none_or(|(b, _)| val.loss < *b) {
            best = Some((val.loss, params.clone()));
            log.best_step = step;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                log.stopped_early = true;
                break 'epochs;
            }
        }
        if cfg.target_val_accuracy.is_some_and(|t| val.sequence_accuracy >= t) {
            // keep the parameters that met the target even if an earlier
            // step had lower loss
            best = None;
            log.best_step = step;
            log.stopped_early = true;
            break;
        }
        if cfg.max_steps.is_some_and(|m| step >= m) {
            break;
        }
    }
    if let Some((_, p)) = best {
        *params = p;
    }
    Ok(log)
}
