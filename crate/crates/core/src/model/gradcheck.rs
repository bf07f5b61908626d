//! Finite-difference verification of the analytic gradients.

use rand::Rng;

use super::params::ModelParams;
use super::train::{batch_gradients, Example};
use super::transformer::Session;
use crate::error::{invalid, Result};
use crate::seed::seeded_rng;

pub const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckEntry {
    pub name: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub entries: Vec<GradCheckEntry>,
}

impl GradCheckReport {
    pub fn worst(&self) -> Option<&GradCheckEntry> {
        self.entries
            .iter()
            .max_by(|a, b| a.relative_error.total_cmp(&b.relative_error))
    }
}

/// Summed (unscaled) loss of a batch, without gradient bookkeeping.
pub fn batch_loss(params: &ModelParams, batch: &[Example]) -> Result<f64> {
    let mut total = 0.0;
    for ex in batch {
        let mut s = Session::inference(params);
        let l = s.sequence_loss(&ex.features, &ex.label, 1.0)?;
        total += s.value(l).data[0];
    }
    Ok(total)
}

/// `|a - n| / max(|a|, |n|, floor)`. The floor keeps entries whose true
/// gradient is zero from dividing round-off by round-off.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Compares analytic gradients against central differences with step
/// [`FD_STEP`] on `coordinates` randomly chosen scalars.
pub fn gradient_check(
    params: &ModelParams,
    batch: &[Example],
    coordinates: usize,
    seed: u64,
) -> Result<GradCheckReport> {
    if batch.is_empty() || coordinates == 0 {
        return invalid("gradient check needs a batch and at least one coordinate");
    }
    let (_, grads) = batch_gradients(params, batch, 1.0)?;
    let mut rng = seeded_rng(seed);
    let mut probe = params.clone();
    let mut entries = Vec::with_capacity(coordinates);
    for (t, i) in params.sample_coordinates(coordinates, &mut rng) {
        let original = probe.tensors[t].data[i];
        probe.tensors[t].data[i] = original + FD_STEP;
        let up = batch_loss(&probe, batch)?;
        probe.tensors[t].data[i] = original - FD_STEP;
        let down = batch_loss(&probe, batch)?;
        probe.tensors[t].data[i] = original;
        let numeric = (up - down) / (2.0 * FD_STEP);
        let analytic = grads[t][i];
        entries.push(GradCheckEntry {
            name: params.names[t].clone(),
            index: i,
            analytic,
            numeric,
            relative_error: relative_error(analytic, numeric, 1e-6),
        });
    }
    let max_relative_error = entries.iter().map(|e| e.relative_error).fold(0.0, f64::max);
    Ok(GradCheckReport { max_relative_error, entries })
}

/// Random tiny batch for gradient checks: uniform features in [0, 1] and
/// well-formed labels over `vocab_size` tokens.
pub fn random_batch(params: &ModelParams, size: usize, seed: u64) -> Vec<Example> {
    let cfg = &params.config;
    let mut rng = seeded_rng(seed);
    let coords = (cfg.vocab_size - 3) as u32;
    (0..size)
        .map(|_| {
            let people = rng.random_range(1..=(cfg.max_decode_len - 2) / 2);
            let mut label = vec![crate::tokens::SOS];
            for _ in 0..people {
                label.push(3 + rng.random_range(0..coords));
                label.push(3 + rng.random_range(0..coords));
            }
            label.push(crate::tokens::EOS);
            Example {
                features: (0..cfg.input_len).map(|_| rng.random::<f64>()).collect(),
                label,
            }
        })
        .collect()
}
