//! Binary checkpoint file.
//!
//! Layout, all integers little-endian:
//!
//! | bytes        | content                                             |
//! |--------------|-----------------------------------------------------|
//! | 4            | magic `SAGC`                                        |
//! | 4            | format version (u32)                                |
//! | 8            | metadata length N (u64)                             |
//! | N            | UTF-8 JSON metadata                                 |
//! | 8 × count    | every parameter tensor as f64, row-major, in        |
//! |              | [`PARAM_NAMES`] order                               |
//! | 4            | CRC-32 of all preceding bytes                       |
//!
//! The metadata repeats the tensor order and shapes so the file can be read
//! without this crate.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{LabelSet, Modality};
use crate::model::{Model, ModelConfig, ModelParams, PARAM_NAMES};
use crate::numcore::Tensor2;
use crate::persist::{check_header, seal, unseal, write_atomic, Reader};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"SAGC";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub epochs: usize,
    pub seed: u64,
    pub final_train_loss: Option<f64>,
    pub final_train_acc: Option<f64>,
    pub final_val_acc: Option<f64>,
    /// How token vectors were produced, e.g. `hash:128:7` or a table path.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding_source: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub params: ModelParams,
    pub labels: LabelSet,
    pub modality: Modality,
    pub meta: TrainingMeta,
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: [usize; 2],
}

#[derive(Serialize, Deserialize)]
struct Metadata {
    model: ModelConfig,
    labels: LabelSet,
    modality: Modality,
    training: TrainingMeta,
    tensors: Vec<TensorEntry>,
}

impl Checkpoint {
    pub fn model(&self) -> Model {
        Model {
            config: self.config,
            params: self.params.clone(),
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        self.params.check_shapes(&self.config)?;
        let meta = Metadata {
            model: self.config,
            labels: self.labels.clone(),
            modality: self.modality,
            training: self.meta.clone(),
            tensors: PARAM_NAMES
                .iter()
                .zip(self.params.tensors())
                .map(|(n, t)| TensorEntry {
                    name: n.to_string(),
                    shape: [t.rows(), t.cols()],
                })
                .collect(),
        };
        let json = serde_json::to_vec(&meta).map_err(|e| Error::Format(e.to_string()))?;
        let mut out = Vec::with_capacity(24 + json.len() + self.params.count() * 8);
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for t in self.params.tensors() {
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(seal(out))
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        // Header first so a bumped version is reported as such.
        check_header(
            &mut Reader::new(bytes),
            CHECKPOINT_MAGIC,
            CHECKPOINT_VERSION,
        )?;
        let body = unseal(bytes)?;
        let mut r = Reader::new(body);
        check_header(&mut r, CHECKPOINT_MAGIC, CHECKPOINT_VERSION)?;
        let meta_len = usize::try_from(r.u64()?)
            .map_err(|_| Error::Integrity("metadata length overflows".into()))?;
        let meta: Metadata = serde_json::from_slice(r.take(meta_len)?)
            .map_err(|e| Error::Integrity(format!("bad checkpoint metadata: {e}")))?;
        meta.model
            .validate()
            .map_err(|e| Error::Integrity(e.to_string()))?;
        let shapes = ModelParams::<f64>::expected_shapes(&meta.model);
        let listed: Vec<(&str, (usize, usize))> = meta
            .tensors
            .iter()
            .map(|t| (t.name.as_str(), (t.shape[0], t.shape[1])))
            .collect();
        let expected: Vec<(&str, (usize, usize))> = PARAM_NAMES
            .iter()
            .copied()
            .zip(shapes.iter().copied())
            .collect();
        if listed != expected {
            return Err(Error::Integrity(
                "tensor table does not match the model configuration".into(),
            ));
        }
        let mut tensors = Vec::with_capacity(shapes.len());
        for (rows, cols) in shapes {
            let data = r.f64s(rows * cols)?;
            tensors.push(Tensor2::from_vec(rows, cols, data)?);
        }
        if r.remaining() != 0 {
            return Err(Error::Integrity(format!(
                "{} trailing bytes after tensors",
                r.remaining()
            )));
        }
        if meta.labels.len() != meta.model.n_classes {
            return Err(Error::Integrity(format!(
                "{} labels for {} classes",
                meta.labels.len(),
                meta.model.n_classes
            )));
        }
        Ok(Self {
            config: meta.model,
            params: ModelParams::from_ordered(tensors)?,
            labels: meta.labels,
            modality: meta.modality,
            meta: meta.training,
        })
    }
}

pub fn save_checkpoint(checkpoint: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path, &checkpoint.to_bytes()?)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    Checkpoint::from_bytes(&fs::read(path)?)
}
