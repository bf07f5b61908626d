//! JSON checkpoints: config, vocabulary and named flat parameter arrays.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::params::ModelParams;
use super::tensor::Tensor;
use crate::dataset::{read_json, write_json};
use crate::error::{Error, Result};
use crate::tokens::TokenVocab;

pub const CHECKPOINT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub schema_version: u32,
    pub config: ModelConfig,
    pub vocab: TokenVocab,
    /// Hash of the feature file the model was trained on.
    pub features_hash: Option<String>,
    pub tensors: Vec<NamedTensor>,
}

impl Checkpoint {
    pub fn new(params: &ModelParams, vocab: &TokenVocab, features_hash: Option<String>) -> Self {
        Self {
            schema_version: CHECKPOINT_SCHEMA_VERSION,
            config: params.config.clone(),
            vocab: vocab.clone(),
            features_hash,
            tensors: params
                .names
                .iter()
                .zip(&params.tensors)
                .map(|(name, t)| NamedTensor {
                    name: name.clone(),
                    shape: t.shape.clone(),
                    data: t.data.clone(),
                })
                .collect(),
        }
    }

    pub fn params(&self) -> Result<ModelParams> {
        let named = self
            .tensors
            .iter()
            .map(|t| Ok((t.name.clone(), Tensor::new(t.shape.clone(), t.data.clone())?)))
            .collect::<Result<Vec<_>>>()?;
        ModelParams::from_tensors(&self.config, named)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let ckpt: Self = read_json(path)?;
        if ckpt.schema_version != CHECKPOINT_SCHEMA_VERSION {
            return Err(Error::SchemaMismatch {
                path: path.to_path_buf(),
                expected: CHECKPOINT_SCHEMA_VERSION,
                found: ckpt.schema_version,
            });
        }
        Ok(ckpt)
    }
}
