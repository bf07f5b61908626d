//! Counting accuracy, localisation error, confusion matrices and the
//! with/without-RIS comparison.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{write_json, PlacementCase};
use crate::error::{invalid, io_err, Error, Result};
use crate::geometry::Point2;
use crate::tokens::{TokenSequence, TokenVocab};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountingAccuracy {
    pub overall: f64,
    /// Keyed by true people count.
    pub per_count: BTreeMap<usize, f64>,
    pub samples: usize,
}

/// A malformed prediction (odd body, unknown token, x/y out of turn) counts as wrong.
pub fn counting_accuracy(
    predictions: &[TokenSequence],
    labels: &[TokenSequence],
    vocab: &TokenVocab,
) -> Result<CountingAccuracy> {
    if predictions.len() != labels.len() {
        return invalid(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        ));
    }
    let mut hits: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for (p, l) in predictions.iter().zip(labels) {
        let Some(truth) = vocab.decode_people(l).map(|v| v.len()) else {
            return invalid("label is not a well-formed sequence");
        };
        let e = hits.entry(truth).or_default();
        e.1 += 1;
        if vocab.decode_people(p).map(|v| v.len()) == Some(truth) {
            e.0 += 1;
        }
    }
    let correct: usize = hits.values().map(|h| h.0).sum();
    Ok(CountingAccuracy {
        overall: if labels.is_empty() { 0.0 } else { correct as f64 / labels.len() as f64 },
        per_count: hits
            .into_iter()
            .map(|(c, (ok, n))| (c, ok as f64 / n as f64))
            .collect(),
        samples: labels.len(),
    })
}

/// Minimum-cost perfect matching on a square cost matrix (Hungarian method
/// with potentials). Returns `assignment[row] = column`.
pub fn min_cost_assignment(cost: &[Vec<f64>]) -> Result<Vec<usize>> {
    let n = cost.len();
    if cost.iter().any(|r| r.len() != n) {
        return invalid("cost matrix must be square");
    }
    if cost.iter().flatten().any(|c| !c.is_finite()) {
        return invalid("costs must be finite");
    }
    // 1-based arrays; column 0 is the virtual start.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        assignment[row_of[j] - 1] = j - 1;
    }
    Ok(assignment)
}

/// Per-pair distances after matching `predicted` to `truth` with minimum
/// total distance. Both sets must have the same size.
pub fn matched_distances(predicted: &[Point2], truth: &[Point2]) -> Result<Vec<f64>> {
    if predicted.len() != truth.len() {
        return invalid("matching needs equally many predicted and true points");
    }
    let cost: Vec<Vec<f64>> = predicted
        .iter()
        .map(|p| truth.iter().map(|t| p.distance(*t)).collect())
        .collect();
    let assignment = min_cost_assignment(&cost)?;
    Ok(assignment
        .iter()
        .enumerate()
        .map(|(i, &j)| cost[i][j])
        .collect())
}

/// Distances for every person in samples whose count was predicted
/// correctly; malformed or wrongly counted samples contribute nothing.
pub fn localization_errors(
    predictions: &[TokenSequence],
    labels: &[TokenSequence],
    vocab: &TokenVocab,
) -> Result<Vec<f64>> {
    if predictions.len() != labels.len() {
        return invalid("predictions and labels must align");
    }
    let mut out = Vec::new();
    for (p, l) in predictions.iter().zip(labels) {
        let truth = vocab
            .decode_people(l)
            .ok_or_else(|| Error::InvalidArgument("label does not decode".into()))?;
        let Some(pred) = vocab.decode_people(p) else { continue };
        if pred.len() != truth.len() {
            continue;
        }
        out.extend(matched_distances(&pred, &truth)?);
    }
    Ok(out)
}

/// Empirical CDF as `(value, fraction <= value)` at each distinct value.
pub fn cdf(errors: &[f64]) -> Vec<(f64, f64)> {
    let mut sorted: Vec<f64> = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, &v) in sorted.iter().enumerate() {
        let frac = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == v => last.1 = frac,
            _ => out.push((v, frac)),
        }
    }
    out
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

/// Rows are true cases, columns predicted cases plus a final "other" column
/// for predictions that match no case exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub case_labels: Vec<String>,
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> usize {
        (0..self.counts.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_sums(&self) -> Vec<usize> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }
}

/// Maps a prediction onto a case index by its exact occupied set.
pub fn predicted_case(
    prediction: &TokenSequence,
    vocab: &TokenVocab,
    reference_points: &[Point2],
    cases: &[PlacementCase],
) -> Option<usize> {
    let people = vocab.decode_people(prediction)?;
    let mut occupied = people
        .iter()
        .map(|p| reference_points.iter().position(|r| r == p))
        .collect::<Option<Vec<usize>>>()?;
    occupied.sort_unstable();
    if occupied.windows(2).any(|w| w[0] == w[1]) {
        return None;
    }
    cases.iter().position(|c| c.occupied == occupied)
}

pub fn confusion_matrix(
    predictions: &[TokenSequence],
    true_cases: &[usize],
    cases: &[PlacementCase],
    vocab: &TokenVocab,
    reference_points: &[Point2],
) -> Result<ConfusionMatrix> {
    if predictions.len() != true_cases.len() {
        return invalid("predictions and case indices must align");
    }
    let c = cases.len();
    let mut counts = vec![vec![0; c + 1]; c];
    for (p, &t) in predictions.iter().zip(true_cases) {
        if t >= c {
            return invalid(format!("case index {t} outside 0..{c}"));
        }
        let col = predicted_case(p, vocab, reference_points, cases).unwrap_or(c);
        counts[t][col] += 1;
    }
    Ok(ConfusionMatrix {
        case_labels: cases.iter().map(|k| format!("{:?}", k.occupied)).collect(),
        counts,
    })
}

/// Hardware measurements reported for a 4-point, 6-beam deployment. Kept for
/// side-by-side reading only; the synthetic channel is not expected to match.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceValues {
    pub binding: bool,
    pub with_ris_per_count_accuracy: BTreeMap<usize, f64>,
    pub average_accuracy_without_ris: f64,
    pub average_accuracy_with_ris: f64,
    pub note: String,
}

impl Default for ReferenceValues {
    fn default() -> Self {
        Self {
            binding: false,
            with_ris_per_count_accuracy: BTreeMap::from([(1, 0.9988), (2, 0.9933), (3, 0.95)]),
            average_accuracy_without_ris: 0.6526,
            average_accuracy_with_ris: 0.9807,
            note: "hardware measurements, informational only; not an acceptance target for the simulated channel"
                .into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub profile: String,
    pub with_ris: bool,
    pub seeds: BTreeMap<String, u64>,
    pub grid_spacing: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub counting_accuracy: CountingAccuracy,
    /// Fraction of samples whose predicted occupied set is exactly right.
    pub exact_set_accuracy: f64,
    pub error_samples: Vec<f64>,
    pub median_error: Option<f64>,
    pub cdf_points: Vec<(f64, f64)>,
    pub confusion: ConfusionMatrix,
    pub metadata: ReportMetadata,
    pub reference: ReferenceValues,
}

pub struct EvalInput<'a> {
    pub predictions: &'a [TokenSequence],
    pub true_cases: &'a [usize],
    pub cases: &'a [PlacementCase],
    pub labels: &'a BTreeMap<usize, TokenSequence>,
    pub vocab: &'a TokenVocab,
    pub reference_points: &'a [Point2],
}

pub fn evaluate(input: &EvalInput, metadata: ReportMetadata) -> Result<EvalReport> {
    let labels = input
        .true_cases
        .iter()
        .map(|&c| {
            let id = input
                .cases
                .get(c)
                .ok_or_else(|| Error::InvalidArgument(format!("case index {c} out of range")))?
                .case_id;
            input
                .labels
                .get(&id)
                .cloned()
                .ok_or_else(|| Error::InvalidArgument(format!("no label for case {id}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let counting = counting_accuracy(input.predictions, &labels, input.vocab)?;
    let errors = localization_errors(input.predictions, &labels, input.vocab)?;
    let confusion = confusion_matrix(
        input.predictions,
        input.true_cases,
        input.cases,
        input.vocab,
        input.reference_points,
    )?;
    let total = confusion.total();
    Ok(EvalReport {
        exact_set_accuracy: if total == 0 { 0.0 } else { confusion.trace() as f64 / total as f64 },
        median_error: median(&errors),
        cdf_points: cdf(&errors),
        error_samples: errors,
        counting_accuracy: counting,
        confusion,
        metadata,
        reference: ReferenceValues::default(),
    })
}

impl EvalReport {
    /// Writes `report.json`, `cdf.csv` and `confusion.csv` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        write_json(&dir.join("report.json"), self)?;
        let mut w = csv::Writer::from_path(dir.join("cdf.csv")).map_err(csv_io(dir))?;
        w.write_record(["error_m", "fraction"])?;
        for (e, f) in &self.cdf_points {
            w.write_record([e.to_string(), f.to_string()])?;
        }
        w.flush().map_err(io_err(dir))?;
        let mut w = csv::Writer::from_path(dir.join("confusion.csv")).map_err(csv_io(dir))?;
        let mut header = vec!["true_case".to_string()];
        header.extend(self.confusion.case_labels.iter().cloned());
        header.push("other".into());
        w.write_record(&header)?;
        for (label, row) in self.confusion.case_labels.iter().zip(&self.confusion.counts) {
            let mut rec = vec![label.clone()];
            rec.extend(row.iter().map(|c| c.to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(io_err(dir))?;
        Ok(())
    }
}

fn csv_io(dir: &Path) -> impl FnOnce(csv::Error) -> Error + '_ {
    move |e| match e.into_kind() {
        csv::ErrorKind::Io(io) => io_err(dir)(io),
        other => Error::InvalidArgument(format!("{other:?}")),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub with_ris_accuracy: f64,
    pub without_ris_accuracy: f64,
    pub accuracy_gain: f64,
    pub per_count_gain: BTreeMap<usize, f64>,
    pub with_ris_median_error: Option<f64>,
    pub without_ris_median_error: Option<f64>,
    /// Higher counting accuracy and no worse median error.
    pub with_ris_dominates: bool,
}

pub fn compare(with_ris: &EvalReport, without_ris: &EvalReport) -> Comparison {
    let a = with_ris.counting_accuracy.overall;
    let b = without_ris.counting_accuracy.overall;
    let per_count_gain = with_ris
        .counting_accuracy
        .per_count
        .iter()
        .filter_map(|(c, v)| {
            without_ris
                .counting_accuracy
                .per_count
                .get(c)
                .map(|w| (*c, v - w))
        })
        .collect();
    let error_ok = match (with_ris.median_error, without_ris.median_error) {
        (Some(x), Some(y)) => x <= y,
        (Some(_), None) => true,
        (None, _) => false,
    };
    Comparison {
        with_ris_accuracy: a,
        without_ris_accuracy: b,
        accuracy_gain: a - b,
        per_count_gain,
        with_ris_median_error: with_ris.median_error,
        without_ris_median_error: without_ris.median_error,
        with_ris_dominates: a > b && error_ok,
    }
}

/// Case index lookup by occupied set.
pub fn case_index(cases: &[PlacementCase]) -> HashMap<Vec<usize>, usize> {
    cases
        .iter()
        .enumerate()
        .map(|(i, c)| (c.occupied.clone(), i))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(ids: &[u32]) -> TokenSequence {
        TokenSequence(ids.to_vec())
    }

    fn vocab() -> TokenVocab {
        TokenVocab::new(vec![1.0, 2.0], vec![1.0, 2.0]).unwrap()
    }

    #[test]
    fn counting_examples() {
        // SOS=1, EOS=2, coordinates from 3
        let one = seq(&[1, 3, 5, 2]);
        let two = seq(&[1, 3, 5, 4, 6, 2]);
        let three = seq(&[1, 3, 5, 4, 6, 3, 6, 2]);
        let acc = counting_accuracy(&[one.clone(), three], &[one.clone(), two.clone()], &vocab()).unwrap();
        assert_eq!(acc.overall, 0.5);
        assert_eq!(acc.per_count[&1], 1.0);
        assert_eq!(acc.per_count[&2], 0.0);
        let all = counting_accuracy(&[one.clone(), two.clone()], &[one, two], &vocab()).unwrap();
        assert_eq!(all.overall, 1.0);
    }

    #[test]
    fn malformed_prediction_counts_as_wrong() {
        let label = seq(&[1, 3, 5, 2]);
        let odd = seq(&[1, 3, 2]);
        let swapped = seq(&[1, 5, 3, 2]);
        let acc = counting_accuracy(&[odd, swapped], &[label.clone(), label], &vocab()).unwrap();
        assert_eq!(acc.overall, 0.0);
    }

    #[test]
    fn cdf_examples() {
        assert_eq!(cdf(&[0.0, 0.0, 1.0]), vec![(0.0, 2.0 / 3.0), (1.0, 1.0)]);
        assert!(cdf(&[]).is_empty());
    }

    #[test]
    fn swapped_prediction_matches_at_zero() {
        let a = [Point2::new(0.0, 0.0), Point2::new(1.0, 2.0)];
        let b = [a[1], a[0]];
        assert_eq!(matched_distances(&a, &b).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn assignment_handles_degenerate_sizes() {
        assert!(min_cost_assignment(&[]).unwrap().is_empty());
        assert_eq!(min_cost_assignment(&[vec![3.0]]).unwrap(), vec![0]);
        assert!(min_cost_assignment(&[vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[1.0, 2.0, 3.0, 4.0]), Some(2.5));
        assert_eq!(median(&[]), None);
    }
}
