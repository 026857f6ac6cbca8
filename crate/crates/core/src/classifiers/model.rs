//! Persisted model artifact: everything needed to fingerprint and classify
//! an unseen app.
//!
//! Layout: 4 magic bytes, a little-endian `u32` format version, then a JSON
//! body.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Classifier, ClassifierKind};
use crate::clustering::DecoupleConfig;
use crate::embedding::EmbeddingTable;
use crate::stylometry::{TfidfParams, TfidfVocabulary};

pub const MODEL_MAGIC: [u8; 4] = *b"ASCM";
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("model format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("corrupt model artifact: {0}")]
    CorruptArtifact(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Which part of each app the fingerprints were computed from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FingerprintScope {
    #[default]
    PrimaryModule,
    WholeApp,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub classifier: ClassifierKind,
    pub seed: u64,
    pub scope: FingerprintScope,
    pub training_apps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub metadata: ModelMetadata,
    pub decouple: DecoupleConfig,
    pub overrides: Vec<String>,
    pub tfidf: TfidfParams,
    pub vocabularies: Vec<TfidfVocabulary>,
    pub embedding: EmbeddingTable,
    /// Author label of each class index, sorted.
    pub labels: Vec<String>,
    pub classifier: Classifier,
}

impl TrainedModel {
    pub fn to_bytes(&self) -> Result<Vec<u8>, ModelError> {
        let mut out = Vec::new();
        out.extend_from_slice(&MODEL_MAGIC);
        out.extend_from_slice(&MODEL_FORMAT_VERSION.to_le_bytes());
        serde_json::to_writer(&mut out, self).map_err(|e| ModelError::CorruptArtifact(e.to_string()))?;
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ModelError> {
        if bytes.len() < 8 || bytes[..4] != MODEL_MAGIC {
            return Err(ModelError::CorruptArtifact("missing header".into()));
        }
        let found = u32::from_le_bytes([bytes[4], bytes[5], bytes[6], bytes[7]]);
        if found != MODEL_FORMAT_VERSION {
            return Err(ModelError::VersionMismatch { found, expected: MODEL_FORMAT_VERSION });
        }
        let model: TrainedModel =
            serde_json::from_slice(&bytes[8..]).map_err(|e| ModelError::CorruptArtifact(e.to_string()))?;
        if model.classifier.n_features() == 0 || model.labels.is_empty() {
            return Err(ModelError::CorruptArtifact("model has no features or labels".into()));
        }
        Ok(model)
    }
}

pub fn save_model(model: &TrainedModel, path: &Path) -> Result<(), ModelError> {
    fs::write(path, model.to_bytes()?)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<TrainedModel, ModelError> {
    TrainedModel::from_bytes(&fs::read(path)?)
}
