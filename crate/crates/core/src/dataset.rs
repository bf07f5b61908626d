//! Placement-case enumeration and the beam-swept fingerprint database.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::{add_noise, CsiSample, GridChannel, RadioConfig, Scene};
use crate::codebook::Codebook;
use crate::error::{invalid, io_err, Error, Result};
use crate::geometry::Point2;
use crate::seed::{derive_seed, seeded_rng};
use crate::tokens::{TokenSequence, TokenVocab};

pub const DATABASE_SCHEMA_VERSION: u32 = 1;

/// A set of occupied reference points (indices into the scene grid).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlacementCase {
    pub case_id: usize,
    pub occupied: Vec<usize>,
}

impl PlacementCase {
    pub fn people_count(&self) -> usize {
        self.occupied.len()
    }

    pub fn positions(&self, scene: &Scene) -> Vec<Point2> {
        self.occupied
            .iter()
            .map(|&i| scene.reference_points[i])
            .collect()
    }
}

/// All placements of 1..=`max_people` people on `points` reference points,
/// ordered by head count and lexicographically within each count.
pub fn enumerate_cases(points: usize, max_people: usize) -> Result<Vec<PlacementCase>> {
    if max_people == 0 {
        return invalid("maximum people count must be at least 1");
    }
    if max_people > points {
        return invalid(format!(
            "cannot place {max_people} people on {points} reference points"
        ));
    }
    let mut cases = Vec::new();
    for size in 1..=max_people {
        let mut combo: Vec<usize> = (0..size).collect();
        loop {
            cases.push(PlacementCase {
                case_id: cases.len(),
                occupied: combo.clone(),
            });
            // advance to the next combination in lexicographic order
            let mut i = size;
            while i > 0 && combo[i - 1] == points - size + i - 1 {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            combo[i - 1] += 1;
            for j in i..size {
                combo[j] = combo[j - 1] + 1;
            }
        }
    }
    Ok(cases)
}

pub fn label_sequence(
    case: &PlacementCase,
    scene: &Scene,
    vocab: &TokenVocab,
) -> Result<TokenSequence> {
    if case.occupied.iter().any(|&i| i >= scene.reference_count()) {
        return invalid(format!("case {} references a missing point", case.case_id));
    }
    vocab.encode_people(&case.positions(scene))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// Every case contributes repetitions to every split.
    Repetition,
    /// Whole cases are held out; counts are case counts.
    HeldOutCases,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl SplitCounts {
    pub fn new(train: usize, val: usize, test: usize) -> Self {
        Self { train, val, test }
    }

    pub fn total(&self) -> usize {
        self.train + self.val + self.test
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub counts: SplitCounts,
    pub seed: u64,
    pub mode: SplitMode,
    /// `assignment[case_index][repetition]`; `None` marks an unused repetition.
    pub assignment: Vec<Vec<Option<Split>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FingerprintDatabase {
    pub scene: Scene,
    pub radio: RadioConfig,
    pub codebook: Codebook,
    pub vocab: TokenVocab,
    pub cases: Vec<PlacementCase>,
    pub samples_per_case: usize,
    pub master_seed: u64,
    /// Ordered by (case, beam, repetition).
    pub records: Vec<CsiSample>,
    pub labels: BTreeMap<usize, TokenSequence>,
    pub split: Option<SplitAssignment>,
}

pub fn build_database(
    scene: &Scene,
    radio: &RadioConfig,
    codebook: &Codebook,
    cases: &[PlacementCase],
    samples_per_case: usize,
    master_seed: u64,
) -> Result<FingerprintDatabase> {
    if samples_per_case == 0 {
        return invalid("samples per case must be at least 1");
    }
    codebook.validate(scene.ris_panel.element_count())?;
    let vocab = TokenVocab::from_points(&scene.reference_points)?;
    let grid = GridChannel::new(scene, radio)?;
    let per_case: Vec<Vec<CsiSample>> = cases
        .par_iter()
        .map(|case| {
            let terms = grid.placement(&case.occupied)?;
            let mut out = Vec::with_capacity(codebook.beam_count() * samples_per_case);
            for (r, config) in codebook.configurations.iter().enumerate() {
                let channel = terms.channel(config)?;
                for rep in 0..samples_per_case {
                    let seed =
                        derive_seed(master_seed, &[case.case_id as u64, r as u64, rep as u64]);
                    let mut sample = add_noise(&channel, radio, seed);
                    sample.case_id = case.case_id;
                    sample.beam_index = r;
                    sample.repetition = rep;
                    out.push(sample);
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let labels = cases
        .iter()
        .map(|c| Ok((c.case_id, label_sequence(c, scene, &vocab)?)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    Ok(FingerprintDatabase {
        scene: scene.clone(),
        radio: radio.clone(),
        codebook: codebook.clone(),
        vocab,
        cases: cases.to_vec(),
        samples_per_case,
        master_seed,
        records: per_case.into_iter().flatten().collect(),
        labels,
        split: None,
    })
}

/// Assigns repetitions (or whole cases) to train/val/test. Deterministic in `seed`.
pub fn split(
    mut db: FingerprintDatabase,
    counts: SplitCounts,
    seed: u64,
    mode: SplitMode,
) -> Result<FingerprintDatabase> {
    let mut rng = seeded_rng(seed);
    let assignment = match mode {
        SplitMode::Repetition => {
            if counts.total() > db.samples_per_case {
                return invalid(format!(
                    "split needs {} repetitions per case, database has {}",
                    counts.total(),
                    db.samples_per_case
                ));
            }
            db.cases
                .iter()
                .map(|_| {
                    let mut order: Vec<usize> = (0..db.samples_per_case).collect();
                    order.shuffle(&mut rng);
                    let mut slots = vec![None; db.samples_per_case];
                    for (pos, &rep) in order.iter().enumerate() {
                        slots[rep] = split_for(pos, &counts);
                    }
                    slots
                })
                .collect()
        }
        SplitMode::HeldOutCases => {
            if counts.total() > db.cases.len() {
                return invalid(format!(
                    "split needs {} cases, database has {}",
                    counts.total(),
                    db.cases.len()
                ));
            }
            let mut order: Vec<usize> = (0..db.cases.len()).collect();
            order.shuffle(&mut rng);
            let mut per_case = vec![None; db.cases.len()];
            for (pos, &c) in order.iter().enumerate() {
                per_case[c] = split_for(pos, &counts);
            }
            per_case
                .into_iter()
                .map(|s| vec![s; db.samples_per_case])
                .collect()
        }
    };
    db.split = Some(SplitAssignment {
        counts,
        seed,
        mode,
        assignment,
    });
    Ok(db)
}

fn split_for(pos: usize, counts: &SplitCounts) -> Option<Split> {
    if pos < counts.train {
        Some(Split::Train)
    } else if pos < counts.train + counts.val {
        Some(Split::Val)
    } else if pos < counts.total() {
        Some(Split::Test)
    } else {
        None
    }
}

impl FingerprintDatabase {
    pub fn beam_count(&self) -> usize {
        self.codebook.beam_count()
    }

    pub fn record_index(&self, case_index: usize, beam: usize, repetition: usize) -> usize {
        (case_index * self.beam_count() + beam) * self.samples_per_case + repetition
    }

    /// The R samples (one per beam) measured for one case repetition.
    pub fn group(&self, case_index: usize, repetition: usize) -> Vec<&CsiSample> {
        (0..self.beam_count())
            .map(|r| &self.records[self.record_index(case_index, r, repetition)])
            .collect()
    }

    pub fn split_of(&self, case_index: usize, repetition: usize) -> Option<Split> {
        self.split
            .as_ref()
            .and_then(|s| s.assignment[case_index][repetition])
    }

    /// `(case_index, repetition)` pairs in a split, in deterministic order.
    pub fn members(&self, which: Split) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for c in 0..self.cases.len() {
            for rep in 0..self.samples_per_case {
                if self.split_of(c, rep) == Some(which) {
                    out.push((c, rep));
                }
            }
        }
        out
    }

    pub fn label(&self, case_index: usize) -> &TokenSequence {
        &self.labels[&self.cases[case_index].case_id]
    }

    pub fn scene_hash(&self) -> Result<String> {
        content_hash(&self.scene)
    }

    pub fn codebook_hash(&self) -> Result<String> {
        content_hash(&self.codebook)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        self.scene.save(&dir.join("scene.json"))?;
        self.codebook.save(&dir.join("codebook.json"))?;
        let manifest = DatabaseManifest {
            schema_version: DATABASE_SCHEMA_VERSION,
            scene_hash: self.scene_hash()?,
            codebook_hash: self.codebook_hash()?,
            radio: self.radio.clone(),
            vocab: self.vocab.clone(),
            cases: self.cases.len(),
            beams: self.beam_count(),
            samples_per_case: self.samples_per_case,
            records: self.records.len(),
            master_seed: self.master_seed,
            split: self.split.clone(),
        };
        write_json(&dir.join("manifest.json"), &manifest)?;
        write_jsonl(&dir.join("records.jsonl"), &self.records)?;
        let labels: Vec<LabelRecord> = self
            .cases
            .iter()
            .map(|c| LabelRecord {
                case_id: c.case_id,
                occupied: c.occupied.clone(),
                tokens: self.labels[&c.case_id].clone(),
            })
            .collect();
        write_jsonl(&dir.join("labels.jsonl"), &labels)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let manifest: DatabaseManifest = read_json(&dir.join("manifest.json"))?;
        if manifest.schema_version != DATABASE_SCHEMA_VERSION {
            return Err(Error::SchemaMismatch {
                path: dir.join("manifest.json"),
                expected: DATABASE_SCHEMA_VERSION,
                found: manifest.schema_version,
            });
        }
        let scene = Scene::load(&dir.join("scene.json"))?;
        let codebook = Codebook::load(&dir.join("codebook.json"))?;
        if content_hash(&scene)? != manifest.scene_hash {
            return invalid("scene.json does not match the manifest hash (stale input)");
        }
        if content_hash(&codebook)? != manifest.codebook_hash {
            return invalid("codebook.json does not match the manifest hash (stale input)");
        }
        let records: Vec<CsiSample> = read_jsonl(&dir.join("records.jsonl"))?;
        let label_records: Vec<LabelRecord> = read_jsonl(&dir.join("labels.jsonl"))?;
        if records.len() != manifest.records
            || records.len() != manifest.cases * manifest.beams * manifest.samples_per_case
        {
            return invalid(format!(
                "records.jsonl holds {} records, manifest expects {}",
                records.len(),
                manifest.records
            ));
        }
        let cases = label_records
            .iter()
            .map(|l| PlacementCase {
                case_id: l.case_id,
                occupied: l.occupied.clone(),
            })
            .collect();
        let labels = label_records
            .into_iter()
            .map(|l| (l.case_id, l.tokens))
            .collect();
        Ok(Self {
            scene,
            radio: manifest.radio,
            codebook,
            vocab: manifest.vocab,
            cases,
            samples_per_case: manifest.samples_per_case,
            master_seed: manifest.master_seed,
            records,
            labels,
            split: manifest.split,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatabaseManifest {
    pub schema_version: u32,
    pub scene_hash: String,
    pub codebook_hash: String,
    pub radio: RadioConfig,
    pub vocab: TokenVocab,
    pub cases: usize,
    pub beams: usize,
    pub samples_per_case: usize,
    pub records: usize,
    pub master_seed: u64,
    pub split: Option<SplitAssignment>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LabelRecord {
    case_id: usize,
    occupied: Vec<usize>,
    tokens: TokenSequence,
}

/// SHA-256 of the canonical JSON encoding.
pub fn content_hash<T: Serialize>(value: &T) -> Result<String> {
    let bytes = serde_json::to_vec(value)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text).map_err(io_err(path))
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    if !path.exists() {
        return Err(Error::MissingInput {
            path: path.to_path_buf(),
            hint: "run the upstream stage first".into(),
        });
    }
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    Ok(serde_json::from_str(&text)?)
}

pub(crate) fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub(crate) fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    if !path.exists() {
        return Err(Error::MissingInput {
            path: path.to_path_buf(),
            hint: "run the upstream stage first".into(),
        });
    }
    let file = File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(io_err(path))?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::GridSpec;
    use crate::codebook::{build_codebook, Quantization};
    use crate::tokens::{EOS, SOS};

    fn binomial(n: usize, k: usize) -> usize {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    #[test]
    fn case_counts() {
        assert_eq!(enumerate_cases(16, 3).unwrap().len(), 696);
        assert_eq!(enumerate_cases(4, 3).unwrap().len(), 14);
        let one = enumerate_cases(1, 1).unwrap();
        assert_eq!(one, vec![PlacementCase { case_id: 0, occupied: vec![0] }]);
        assert!(enumerate_cases(3, 4).is_err());
        assert!(enumerate_cases(3, 0).is_err());
    }

    #[test]
    fn cases_match_powerset_filter() {
        for s in 1..=12usize {
            for i in 1..=s.min(4) {
                let cases = enumerate_cases(s, i).unwrap();
                let want: usize = (1..=i).map(|k| binomial(s, k)).sum();
                assert_eq!(cases.len(), want);
                let brute = (1u32..(1 << s)).filter(|m| m.count_ones() as usize <= i).count();
                assert_eq!(cases.len(), brute);
                let mut seen = std::collections::HashSet::new();
                for (id, c) in cases.iter().enumerate() {
                    assert_eq!(c.case_id, id);
                    assert!(c.occupied.windows(2).all(|w| w[0] < w[1]));
                    assert!(c.occupied.iter().all(|&x| x < s));
                    assert!(seen.insert(c.occupied.clone()));
                }
            }
        }
    }

    fn small_db(samples: usize) -> FingerprintDatabase {
        let radio = RadioConfig::experiment();
        let scene = Scene::whiteboard_room(&radio, GridSpec::experiment()).unwrap();
        let cb = build_codebook(
            &scene.ris_panel,
            0.0,
            &[10.0, 20.0, 30.0, 40.0, 50.0, 60.0],
            Quantization::OneBit,
            radio.wavelength(),
        )
        .unwrap();
        let cases = enumerate_cases(4, 3).unwrap();
        build_database(&scene, &radio, &cb, &cases, samples, 11).unwrap()
    }

    #[test]
    fn experiment_profile_record_count() {
        let db = small_db(1);
        assert_eq!(db.records.len(), 84);
        assert_eq!(db.labels.len(), 14);
        for (c, case) in db.cases.iter().enumerate() {
            let label = db.label(c);
            assert_eq!(label.len(), 2 * case.people_count() + 2);
            assert_eq!(label.ids()[0], SOS);
            assert_eq!(*label.ids().last().unwrap(), EOS);
        }
        let distinct: std::collections::HashSet<_> = db.labels.values().collect();
        assert_eq!(distinct.len(), 14);
    }

    #[test]
    fn repetitions_differ_but_rerun_is_identical() {
        let radio = RadioConfig::experiment();
        let scene = Scene::whiteboard_room(&radio, GridSpec::experiment()).unwrap();
        let cb = build_codebook(&scene.ris_panel, 0.0, &[30.0], Quantization::OneBit, radio.wavelength())
            .unwrap();
        let cases = vec![PlacementCase { case_id: 0, occupied: vec![2] }];
        let a = build_database(&scene, &radio, &cb, &cases, 5, 3).unwrap();
        let b = build_database(&scene, &radio, &cb, &cases, 5, 3).unwrap();
        assert_eq!(a.records.len(), 5);
        assert_eq!(a.records, b.records);
        for i in 0..5 {
            for j in 0..i {
                assert_ne!(a.records[i].amplitudes, a.records[j].amplitudes);
            }
        }
    }

    #[test]
    fn split_counts_are_exact_per_case() {
        let db = split(small_db(10), SplitCounts::new(6, 2, 2), 5, SplitMode::Repetition).unwrap();
        for c in 0..db.cases.len() {
            let mut n = [0usize; 3];
            for rep in 0..10 {
                match db.split_of(c, rep).unwrap() {
                    Split::Train => n[0] += 1,
                    Split::Val => n[1] += 1,
                    Split::Test => n[2] += 1,
                }
            }
            assert_eq!(n, [6, 2, 2]);
        }
        let again = split(small_db(10), SplitCounts::new(6, 2, 2), 5, SplitMode::Repetition).unwrap();
        assert_eq!(db.split, again.split);
    }

    #[test]
    fn all_train_and_insufficient_repetitions() {
        let db = split(small_db(3), SplitCounts::new(3, 0, 0), 1, SplitMode::Repetition).unwrap();
        assert_eq!(db.members(Split::Train).len(), 14 * 3);
        assert!(db.members(Split::Test).is_empty());
        assert!(split(small_db(3), SplitCounts::new(3, 1, 0), 1, SplitMode::Repetition).is_err());
    }

    #[test]
    fn held_out_cases_keep_cases_whole() {
        let db = split(small_db(2), SplitCounts::new(10, 2, 2), 9, SplitMode::HeldOutCases).unwrap();
        for c in 0..14 {
            assert_eq!(db.split_of(c, 0), db.split_of(c, 1));
        }
        assert_eq!(db.members(Split::Test).len(), 4);
    }

    #[test]
    fn save_load_round_trip() {
        let db = split(small_db(2), SplitCounts::new(1, 1, 0), 4, SplitMode::Repetition).unwrap();
        let dir = tempfile::tempdir().unwrap();
        db.save(dir.path()).unwrap();
        let back = FingerprintDatabase::load(dir.path()).unwrap();
        assert_eq!(back, db);
    }

    #[test]
    fn stale_codebook_rejected() {
        let db = small_db(1);
        let dir = tempfile::tempdir().unwrap();
        db.save(dir.path()).unwrap();
        let mut cb = db.codebook.clone();
        cb.configurations.pop();
        cb.save(&dir.path().join("codebook.json")).unwrap();
        assert!(FingerprintDatabase::load(dir.path()).is_err());
    }
}
