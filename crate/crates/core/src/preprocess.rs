//! Per-(antenna pair, beam) max-min normalisation and feature concatenation.
//!
//! The concatenated layout is antenna pair outermost, beam in the middle and
//! subcarrier innermost: entry `((p * R) + r) * K + k` holds the normalised
//! amplitude of subcarrier `k` for pair `p` under beam `r` (all zero-based).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::CsiSample;
use crate::dataset::{read_jsonl, write_jsonl, FingerprintDatabase, Split};
use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub subcarriers: usize,
    pub antenna_pairs: usize,
    pub beams: usize,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn index(&self, p: usize, r: usize, k: usize) -> usize {
        (p * self.beams + r) * self.subcarriers + k
    }

    pub fn get(&self, p: usize, r: usize, k: usize) -> f64 {
        self.values[self.index(p, r, k)]
    }
}

/// Maps amplitudes onto [0, 1]; a constant input maps to all zeros.
pub fn maxmin_normalize(amplitudes: &[f64]) -> Result<Vec<f64>> {
    if amplitudes.is_empty() {
        return invalid("cannot normalise an empty amplitude vector");
    }
    if amplitudes.iter().any(|a| !a.is_finite()) {
        return invalid("amplitudes must be finite");
    }
    let min = amplitudes.iter().copied().fold(f64::INFINITY, f64::min);
    let max = amplitudes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = max - min;
    if range == 0.0 {
        return Ok(vec![0.0; amplitudes.len()]);
    }
    Ok(amplitudes
        .iter()
        .map(|&a| ((a - min) / range).clamp(0.0, 1.0))
        .collect())
}

/// Concatenates one case repetition: exactly one sample per beam, each
/// carrying every antenna pair.
pub fn concat_features(group: &[&CsiSample]) -> Result<FeatureVector> {
    let Some(first) = group.first() else {
        return invalid("empty sample group");
    };
    let beams = group.len();
    let pairs = first.amplitudes.len();
    if pairs == 0 {
        return invalid("sample has no antenna pairs");
    }
    let k = first.amplitudes[0].len();
    let mut by_beam: Vec<Option<&CsiSample>> = vec![None; beams];
    for s in group {
        if s.beam_index >= beams {
            return invalid(format!("beam index {} outside 0..{beams}", s.beam_index));
        }
        if by_beam[s.beam_index].replace(s).is_some() {
            return invalid(format!("duplicate sample for beam {}", s.beam_index));
        }
        if s.amplitudes.len() != pairs || s.amplitudes.iter().any(|a| a.len() != k) {
            return invalid("samples disagree on antenna pair or subcarrier count");
        }
    }
    let mut values = Vec::with_capacity(pairs * beams * k);
    for p in 0..pairs {
        for (r, s) in by_beam.iter().enumerate() {
            let s = s.ok_or_else(|| crate::Error::InvalidArgument(format!("missing beam {r}")))?;
            values.extend(maxmin_normalize(&s.amplitudes[p])?);
        }
    }
    Ok(FeatureVector {
        subcarriers: k,
        antenna_pairs: pairs,
        beams,
        values,
    })
}

/// A preprocessed repetition, as cached in `features.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub case_index: usize,
    pub case_id: usize,
    pub repetition: usize,
    pub split: Option<Split>,
    pub features: FeatureVector,
}

pub fn database_features(db: &FingerprintDatabase) -> Result<Vec<FeatureRecord>> {
    let mut out = Vec::with_capacity(db.cases.len() * db.samples_per_case);
    for (c, case) in db.cases.iter().enumerate() {
        for rep in 0..db.samples_per_case {
            out.push(FeatureRecord {
                case_index: c,
                case_id: case.case_id,
                repetition: rep,
                split: db.split_of(c, rep),
                features: concat_features(&db.group(c, rep))?,
            });
        }
    }
    Ok(out)
}

pub fn save_features(path: &Path, features: &[FeatureRecord]) -> Result<()> {
    write_jsonl(path, features)
}

pub fn load_features(path: &Path) -> Result<Vec<FeatureRecord>> {
    read_jsonl(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(beam: usize, amps: Vec<Vec<f64>>) -> CsiSample {
        CsiSample {
            case_id: 0,
            beam_index: beam,
            repetition: 0,
            noise_seed: 0,
            amplitudes: amps,
        }
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(maxmin_normalize(&[1.0, 3.0, 2.0]).unwrap(), vec![0.0, 1.0, 0.5]);
        assert_eq!(maxmin_normalize(&[5.0, 5.0, 5.0]).unwrap(), vec![0.0; 3]);
        let v = vec![0.0, 0.25, 1.0, 0.5];
        assert_eq!(maxmin_normalize(&v).unwrap(), v);
    }

    #[test]
    fn normalize_rejects_nan_and_empty() {
        assert!(maxmin_normalize(&[1.0, f64::NAN]).is_err());
        assert!(maxmin_normalize(&[]).is_err());
    }

    #[test]
    fn single_pair_single_beam_equals_normalize() {
        let a = vec![2.0, 4.0, 3.0, 8.0];
        let f = concat_features(&[&sample(0, vec![a.clone()])]).unwrap();
        assert_eq!(f.values, maxmin_normalize(&a).unwrap());
    }

    #[test]
    fn layout_lengths() {
        let mk = |pairs: usize, beams: usize| {
            let samples: Vec<CsiSample> = (0..beams)
                .map(|r| sample(r, (0..pairs).map(|p| (0..52).map(|k| (k * (p + 1) + r) as f64).collect()).collect()))
                .collect();
            let refs: Vec<&CsiSample> = samples.iter().collect();
            concat_features(&refs).unwrap().len()
        };
        assert_eq!(mk(1, 9), 468);
        assert_eq!(mk(2, 6), 624);
    }

    #[test]
    fn missing_or_duplicate_beam_rejected() {
        let a = sample(0, vec![vec![1.0, 2.0]]);
        let b = sample(0, vec![vec![1.0, 2.0]]);
        assert!(concat_features(&[&a, &b]).is_err());
        let c = sample(2, vec![vec![1.0, 2.0]]);
        assert!(concat_features(&[&a, &c]).is_err());
        let d = sample(1, vec![vec![1.0, 2.0, 3.0]]);
        assert!(concat_features(&[&a, &d]).is_err());
    }
}
