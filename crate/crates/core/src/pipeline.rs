//! File-driven stages: codebook, simulate, preprocess, train, evaluate and the
//! full with/without-RIS reproduction. Every stage reads its inputs from the
//! run directory, checks their hashes against the upstream manifest and
//! writes deterministic outputs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channel::{GridSpec, RadioConfig, Scene};
use crate::codebook::{
    array_gain, build_codebook, gain_sweep, half_power_beamwidth, peak_angles, Codebook, Quantization,
};
use crate::dataset::{
    build_database, content_hash, enumerate_cases, read_json, split, write_json, FingerprintDatabase, Split,
    SplitCounts, SplitMode,
};
use crate::error::{invalid, io_err, Error, Result};
use crate::eval::{compare, evaluate, Comparison, EvalInput, EvalReport, ReportMetadata};
use crate::model::train::{train, Example, TrainConfig, TrainingLog};
use crate::model::{Checkpoint, ModelConfig, ModelParams, Profile};
use crate::preprocess::{database_features, load_features, save_features, FeatureRecord};
use crate::seed::derive_seed;
use crate::tokens::TokenSequence;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Room {
    /// 5x5 m room, transmitter behind a whiteboard 1 m in front of the RIS.
    WhiteboardRoom,
    /// 6x6 m L-shaped room; the corner walls block the direct path.
    LShaped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridProfile {
    /// 2x2 points, 1 m apart.
    Experiment,
    /// 4x4 points, 0.5 m apart.
    Simulation,
}

impl GridProfile {
    pub fn spec(self) -> GridSpec {
        match self {
            Self::Experiment => GridSpec::experiment(),
            Self::Simulation => GridSpec::simulation(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneSource {
    Builtin { room: Room, grid: GridProfile },
    /// Scene JSON, relative paths resolved against the config file.
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadioProfile {
    /// One Tx and one Rx antenna.
    Simulation,
    /// One Tx, two Rx antennas, 10 dBm.
    Experiment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadioSpec {
    pub profile: RadioProfile,
    pub transmit_power_dbm: Option<f64>,
}

impl RadioSpec {
    pub fn build(&self) -> RadioConfig {
        let mut radio = match self.profile {
            RadioProfile::Simulation => RadioConfig::simulation(20.0),
            RadioProfile::Experiment => RadioConfig::experiment(),
        };
        if let Some(p) = self.transmit_power_dbm {
            radio.transmit_power_dbm = p;
        }
        radio
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodebookSpec {
    pub incidence_deg: f64,
    pub angles_deg: Vec<f64>,
    pub quantization: Quantization,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub max_people: usize,
    pub samples_per_case: usize,
    pub split: SplitCounts,
    pub split_mode: SplitMode,
    pub noise_seed: u64,
    pub split_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub profile: Profile,
    pub dropout: f64,
    pub seed: u64,
}

/// One JSON document describing a whole run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub scene: SceneSource,
    pub radio: RadioSpec,
    pub codebook: CodebookSpec,
    pub dataset: DatasetSpec,
    pub model: ModelSpec,
    pub training: TrainConfig,
}

impl RunConfig {
    /// Four reference points 1 m apart, up to three people, six 1-bit beams
    /// (10 to 60 degrees), two receive antennas, desk-sized model.
    pub fn desk(seed: u64) -> Self {
        let mut cfg = Self {
            scene: SceneSource::Builtin {
                room: Room::WhiteboardRoom,
                grid: GridProfile::Experiment,
            },
            radio: RadioSpec {
                profile: RadioProfile::Experiment,
                transmit_power_dbm: None,
            },
            codebook: CodebookSpec {
                incidence_deg: 0.0,
                angles_deg: (1..=6).map(|i| 10.0 * i as f64).collect(),
                quantization: Quantization::OneBit,
            },
            dataset: DatasetSpec {
                max_people: 3,
                samples_per_case: 100,
                split: SplitCounts::new(60, 20, 20),
                split_mode: SplitMode::Repetition,
                noise_seed: 0,
                split_seed: 0,
            },
            model: ModelSpec {
                profile: Profile::Desk,
                dropout: 0.1,
                seed: 0,
            },
            training: TrainConfig {
                learning_rate: 1e-3,
                warmup_steps: 50,
                cosine_decay: true,
                batch_size: 8,
                max_epochs: 16,
                patience: 6,
                ..TrainConfig::default()
            },
        };
        cfg.reseed(seed);
        cfg
    }

    /// Sixteen points 0.5 m apart in the L-shaped room, nine continuous beams
    /// (0 to 80 degrees), single antennas, full-size model.
    pub fn simulation(seed: u64, transmit_power_dbm: f64) -> Self {
        let mut cfg = Self {
            scene: SceneSource::Builtin {
                room: Room::LShaped,
                grid: GridProfile::Simulation,
            },
            radio: RadioSpec {
                profile: RadioProfile::Simulation,
                transmit_power_dbm: Some(transmit_power_dbm),
            },
            codebook: CodebookSpec {
                incidence_deg: 0.0,
                angles_deg: (0..=8).map(|i| 10.0 * i as f64).collect(),
                quantization: Quantization::Continuous,
            },
            dataset: DatasetSpec {
                max_people: 3,
                samples_per_case: 100,
                split: SplitCounts::new(60, 20, 20),
                split_mode: SplitMode::Repetition,
                noise_seed: 0,
                split_seed: 0,
            },
            model: ModelSpec {
                profile: Profile::Paper,
                dropout: 0.1,
                seed: 0,
            },
            training: TrainConfig::default(),
        };
        cfg.reseed(seed);
        cfg
    }

    /// Derives every stage seed from one master seed.
    pub fn reseed(&mut self, seed: u64) {
        self.dataset.noise_seed = derive_seed(seed, &[1]);
        self.dataset.split_seed = derive_seed(seed, &[2]);
        self.model.seed = derive_seed(seed, &[3]);
        self.training.seed = derive_seed(seed, &[4]);
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg: Self = read_json(path)?;
        if let SceneSource::File(p) = &mut cfg.scene {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn radio(&self) -> RadioConfig {
        self.radio.build()
    }

    pub fn scene(&self) -> Result<Scene> {
        let radio = self.radio();
        let scene = match &self.scene {
            SceneSource::Builtin { room, grid } => match room {
                Room::WhiteboardRoom => Scene::whiteboard_room(&radio, grid.spec())?,
                Room::LShaped => Scene::l_shaped(&radio, grid.spec())?,
            },
            SceneSource::File(p) => {
                if !p.exists() {
                    return Err(Error::MissingInput {
                        path: p.clone(),
                        hint: "the config's scene file does not exist".into(),
                    });
                }
                Scene::load(p)?
            }
        };
        scene.check_radio(&radio)?;
        Ok(scene)
    }

    pub fn build_codebook(&self, scene: &Scene) -> Result<Codebook> {
        build_codebook(
            &scene.ris_panel,
            self.codebook.incidence_deg,
            &self.codebook.angles_deg,
            self.codebook.quantization,
            self.radio().wavelength(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    WithRis,
    WithoutRis,
}

impl Variant {
    pub fn from_flag(without_ris: bool) -> Self {
        if without_ris {
            Self::WithoutRis
        } else {
            Self::WithRis
        }
    }

    pub fn dir(self, out: &Path) -> PathBuf {
        out.join(match self {
            Self::WithRis => "with_ris",
            Self::WithoutRis => "without_ris",
        })
    }
}

fn require(path: &Path, stage: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::StageOrder(format!(
            "{} is missing; run `{stage}` with the same --out first",
            path.display()
        )))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamSummary {
    pub theta_r_deg: f64,
    pub gain_at_target: f64,
    pub peak_deg: Vec<f64>,
    pub hpbw_deg: Option<f64>,
}

/// Builds the scene and codebook, writes `scene.json` and `codebook.json`
/// and summarises a 0.5 degree gain sweep per beam.
pub fn codebook_stage(cfg: &RunConfig, out: &Path) -> Result<Vec<BeamSummary>> {
    std::fs::create_dir_all(out).map_err(io_err(out))?;
    let scene = cfg.scene()?;
    let codebook = cfg.build_codebook(&scene)?;
    scene.save(&out.join("scene.json"))?;
    codebook.save(&out.join("codebook.json"))?;
    let wavelength = cfg.radio().wavelength();
    codebook
        .configurations
        .iter()
        .map(|c| {
            let sweep = gain_sweep(&scene.ris_panel, c, codebook.incidence_angle, wavelength, 0.5)?;
            let peaks = peak_angles(&sweep, 1e-9);
            let peak = peaks
                .iter()
                .copied()
                .min_by(|a, b| (a - c.beam_label).abs().total_cmp(&(b - c.beam_label).abs()));
            Ok(BeamSummary {
                theta_r_deg: c.beam_label,
                gain_at_target: array_gain(&scene.ris_panel, c, codebook.incidence_angle, c.beam_label, wavelength)?,
                hpbw_deg: peak.and_then(|p| half_power_beamwidth(&sweep, p)),
                peak_deg: peaks,
            })
        })
        .collect()
}

fn load_stage_inputs(cfg: &RunConfig, out: &Path) -> Result<(Scene, Codebook)> {
    let scene_path = out.join("scene.json");
    let codebook_path = out.join("codebook.json");
    require(&scene_path, "codebook")?;
    require(&codebook_path, "codebook")?;
    let scene = Scene::load(&scene_path)?;
    let codebook = Codebook::load(&codebook_path)?;
    if content_hash(&scene)? != content_hash(&cfg.scene()?)? {
        return Err(Error::StageOrder(
            "scene.json does not match the config (stale); rerun `codebook`".into(),
        ));
    }
    if content_hash(&codebook)? != content_hash(&cfg.build_codebook(&scene)?)? {
        return Err(Error::StageOrder(
            "codebook.json does not match the config (stale); rerun `codebook`".into(),
        ));
    }
    Ok((scene, codebook))
}

/// Enumerates cases, sweeps the codebook (or the all-off state) and splits.
pub fn simulate_stage(cfg: &RunConfig, out: &Path, variant: Variant) -> Result<FingerprintDatabase> {
    let (scene, codebook) = load_stage_inputs(cfg, out)?;
    let codebook = match variant {
        Variant::WithRis => codebook,
        Variant::WithoutRis => Codebook::without_ris(scene.ris_panel.element_count()),
    };
    let d = &cfg.dataset;
    let cases = enumerate_cases(scene.reference_count(), d.max_people)?;
    let db = build_database(&scene, &cfg.radio(), &codebook, &cases, d.samples_per_case, d.noise_seed)?;
    let db = split(db, d.split, d.split_seed, d.split_mode)?;
    db.save(&variant.dir(out).join("database"))?;
    Ok(db)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturesManifest {
    pub database_manifest_hash: String,
    pub features_hash: String,
    pub records: usize,
    pub input_len: usize,
}

fn file_hash(path: &Path) -> Result<String> {
    use sha2::{Digest, Sha256};
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Normalises and concatenates every repetition into `features.jsonl`.
pub fn preprocess_stage(out: &Path, variant: Variant) -> Result<Vec<FeatureRecord>> {
    let db_dir = variant.dir(out).join("database");
    require(&db_dir.join("manifest.json"), "simulate")?;
    let db = FingerprintDatabase::load(&db_dir)?;
    let features = database_features(&db)?;
    let path = db_dir.join("features.jsonl");
    save_features(&path, &features)?;
    let manifest = FeaturesManifest {
        database_manifest_hash: file_hash(&db_dir.join("manifest.json"))?,
        features_hash: file_hash(&path)?,
        records: features.len(),
        input_len: features.first().map_or(0, |f| f.features.len()),
    };
    write_json(&db_dir.join("features_manifest.json"), &manifest)?;
    Ok(features)
}

/// Features plus their verified manifest.
fn load_checked_features(out: &Path, variant: Variant) -> Result<(FingerprintDatabase, Vec<FeatureRecord>, FeaturesManifest)> {
    let db_dir = variant.dir(out).join("database");
    require(&db_dir.join("manifest.json"), "simulate")?;
    require(&db_dir.join("features_manifest.json"), "preprocess")?;
    let manifest: FeaturesManifest = read_json(&db_dir.join("features_manifest.json"))?;
    if file_hash(&db_dir.join("manifest.json"))? != manifest.database_manifest_hash {
        return Err(Error::StageOrder(
            "features were built from a different database (stale); rerun `preprocess`".into(),
        ));
    }
    let path = db_dir.join("features.jsonl");
    if file_hash(&path)? != manifest.features_hash {
        return Err(Error::StageOrder(
            "features.jsonl does not match its manifest (stale); rerun `preprocess`".into(),
        ));
    }
    let db = FingerprintDatabase::load(&db_dir)?;
    let features = load_features(&path)?;
    Ok((db, features, manifest))
}

pub fn examples(db: &FingerprintDatabase, features: &[FeatureRecord], which: Split) -> Vec<Example> {
    features
        .iter()
        .filter(|r| r.split == Some(which))
        .map(|r| Example {
            features: r.features.values.clone(),
            label: db.label(r.case_index).0.clone(),
        })
        .collect()
}

pub fn model_config(cfg: &RunConfig, db: &FingerprintDatabase, input_len: usize) -> ModelConfig {
    let mut m = ModelConfig::profile(cfg.model.profile, input_len, db.vocab.len(), cfg.dataset.max_people, cfg.model.seed);
    m.dropout = cfg.model.dropout;
    m
}

/// Trains on the train split with early stopping on the validation split;
/// writes `checkpoint.json` and `train_log.csv`.
pub fn train_stage(
    cfg: &RunConfig,
    out: &Path,
    variant: Variant,
    on_row: impl FnMut(&crate::model::train::LogRow),
) -> Result<(ModelParams, TrainingLog)> {
    let (db, features, manifest) = load_checked_features(out, variant)?;
    let train_set = examples(&db, &features, Split::Train);
    let val_set = examples(&db, &features, Split::Val);
    let mut params = ModelParams::init(&model_config(cfg, &db, manifest.input_len))?;
    let log = train(&mut params, &db.vocab, &train_set, &val_set, &cfg.training, on_row)?;
    let dir = variant.dir(out);
    Checkpoint::new(&params, &db.vocab, Some(manifest.features_hash.clone())).save(&dir.join("checkpoint.json"))?;
    log.write_csv(&dir.join("train_log.csv"))?;
    Ok((params, log))
}

/// Greedy predictions on the test split, scored and written to `report/`.
pub fn evaluate_stage(cfg: &RunConfig, out: &Path, variant: Variant) -> Result<EvalReport> {
    let (db, features, manifest) = load_checked_features(out, variant)?;
    let dir = variant.dir(out);
    require(&dir.join("checkpoint.json"), "train")?;
    let ckpt = Checkpoint::load(&dir.join("checkpoint.json"))?;
    if ckpt.features_hash.as_deref() != Some(manifest.features_hash.as_str()) {
        return Err(Error::StageOrder(
            "checkpoint was trained on different features (stale); rerun `train`".into(),
        ));
    }
    if ckpt.vocab != db.vocab {
        return invalid("checkpoint vocabulary does not match the database");
    }
    let params = ckpt.params()?;
    let test: Vec<&FeatureRecord> = features.iter().filter(|r| r.split == Some(Split::Test)).collect();
    let predictions = predict_all(&params, &db, &test)?;
    let true_cases: Vec<usize> = test.iter().map(|r| r.case_index).collect();
    let metadata = ReportMetadata {
        profile: format!("{:?}", cfg.model.profile).to_lowercase(),
        with_ris: variant == Variant::WithRis,
        seeds: BTreeMap::from([
            ("noise".to_string(), cfg.dataset.noise_seed),
            ("split".to_string(), cfg.dataset.split_seed),
            ("model".to_string(), cfg.model.seed),
            ("training".to_string(), cfg.training.seed),
        ]),
        grid_spacing: grid_spacing(&db.scene),
    };
    let report = evaluate(
        &EvalInput {
            predictions: &predictions,
            true_cases: &true_cases,
            cases: &db.cases,
            labels: &db.labels,
            vocab: &db.vocab,
            reference_points: &db.scene.reference_points,
        },
        metadata,
    )?;
    report.save(&dir.join("report"))?;
    Ok(report)
}

fn predict_all(params: &ModelParams, db: &FingerprintDatabase, records: &[&FeatureRecord]) -> Result<Vec<TokenSequence>> {
    use rayon::prelude::*;
    records
        .par_iter()
        .map(|r| crate::model::predict(&r.features, params, &db.vocab))
        .collect()
}

/// Smallest distance between two reference points.
pub fn grid_spacing(scene: &Scene) -> Option<f64> {
    let pts = &scene.reference_points;
    let mut best: Option<f64> = None;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let d = pts[i].distance(pts[j]);
            best = Some(best.map_or(d, |b: f64| b.min(d)));
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reproduction {
    pub with_ris: EvalReport,
    pub without_ris: EvalReport,
    pub comparison: Comparison,
}

/// Runs every stage for both variants and writes `comparison.json`.
pub fn reproduce(
    cfg: &RunConfig,
    out: &Path,
    mut progress: impl FnMut(Variant, &crate::model::train::LogRow),
) -> Result<Reproduction> {
    codebook_stage(cfg, out)?;
    let mut reports = Vec::with_capacity(2);
    for variant in [Variant::WithRis, Variant::WithoutRis] {
        simulate_stage(cfg, out, variant)?;
        preprocess_stage(out, variant)?;
        train_stage(cfg, out, variant, |row| progress(variant, row))?;
        reports.push(evaluate_stage(cfg, out, variant)?);
    }
    let without_ris = reports.pop().expect("two reports");
    let with_ris = reports.pop().expect("two reports");
    let comparison = compare(&with_ris, &without_ris);
    write_json(&out.join("comparison.json"), &comparison)?;
    Ok(Reproduction { with_ris, without_ris, comparison })
}
