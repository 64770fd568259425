use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use songattn::ingest::{hash_embedder, load_embedding_table, EmbeddingProvider};

use crate::failure::{at_path, require_file, CmdResult, Failure};

/// Flat JSON settings file. Every key mirrors a command-line flag of the
/// same name with `_` in place of `-`.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub corpus: Option<PathBuf>,
    pub embeddings: Option<String>,
    pub checkpoint: Option<PathBuf>,
    pub store: Option<PathBuf>,
    pub seed: Option<u64>,
    pub learning_rate: Option<f64>,
    pub batch_size: Option<usize>,
    pub epochs: Option<usize>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub epsilon: Option<f64>,
    pub grad_clip_norm: Option<f64>,
    pub validation_fraction: Option<f64>,
    pub seq_len: Option<usize>,
    pub input_dim: Option<usize>,
    pub hidden: Option<usize>,
    pub attention_dim: Option<usize>,
    pub hops: Option<usize>,
    pub k: Option<usize>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> CmdResult<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        require_file("config file", path)?;
        let text = fs::read_to_string(path).map_err(|e| at_path(path)(e.into()))?;
        serde_json::from_str(&text)
            .map_err(|e| Failure::config(format!("{}: invalid config: {e}", path.display())))
    }
}

/// Where token vectors for lyric records come from.
#[derive(Debug, Clone, PartialEq)]
pub enum EmbeddingSource {
    Hash { dim: usize, seed: u64 },
    Table(PathBuf),
}

pub const DEFAULT_EMBEDDING_DIM: usize = 128;

impl EmbeddingSource {
    /// Accepts `hash`, `hash:DIM` or `hash:DIM:SEED`; anything else is a
    /// path to a token table. A bare `hash` takes `default_dim`.
    pub fn parse(spec: &str, default_dim: usize) -> CmdResult<Self> {
        let Some(rest) = spec.strip_prefix("hash") else {
            return Ok(Self::Table(PathBuf::from(spec)));
        };
        let parts: Vec<&str> = rest.split(':').collect();
        let bad = || {
            Failure::config(format!(
                "invalid embedding source {spec:?}, expected hash[:DIM[:SEED]]"
            ))
        };
        let (dim, seed) = match parts.as_slice() {
            [""] => (default_dim, 0),
            ["", d] => (d.parse().map_err(|_| bad())?, 0),
            ["", d, s] => (d.parse().map_err(|_| bad())?, s.parse().map_err(|_| bad())?),
            _ => return Err(bad()),
        };
        if dim == 0 {
            return Err(bad());
        }
        Ok(Self::Hash { dim, seed })
    }

    pub fn check_exists(&self) -> CmdResult {
        match self {
            Self::Hash { .. } => Ok(()),
            Self::Table(path) => require_file("embedding table", path),
        }
    }

    pub fn load(&self) -> CmdResult<Box<dyn EmbeddingProvider>> {
        match self {
            Self::Hash { dim, seed } => Ok(Box::new(hash_embedder(*dim, *seed))),
            Self::Table(path) => {
                require_file("embedding table", path)?;
                Ok(Box::new(load_embedding_table(path).map_err(at_path(path))?))
            }
        }
    }
}

impl fmt::Display for EmbeddingSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Hash { dim, seed } => write!(f, "hash:{dim}:{seed}"),
            Self::Table(path) => write!(f, "{}", path.display()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedding_source_forms() {
        assert_eq!(
            EmbeddingSource::parse("hash", 64).unwrap(),
            EmbeddingSource::Hash { dim: 64, seed: 0 }
        );
        assert_eq!(
            EmbeddingSource::parse("hash:16:9", 64).unwrap(),
            EmbeddingSource::Hash { dim: 16, seed: 9 }
        );
        assert_eq!(
            EmbeddingSource::parse("glove.txt", 64).unwrap(),
            EmbeddingSource::Table("glove.txt".into())
        );
        assert!(EmbeddingSource::parse("hash:x", 64).is_err());
        assert!(EmbeddingSource::parse("hash:0", 64).is_err());
        let canonical = EmbeddingSource::Hash { dim: 16, seed: 9 }.to_string();
        assert_eq!(
            EmbeddingSource::parse(&canonical, 1).unwrap().to_string(),
            canonical
        );
    }

    #[test]
    fn unknown_config_keys_rejected() {
        let err = serde_json::from_str::<FileConfig>(r#"{"epochz": 3}"#).unwrap_err();
        assert!(err.to_string().contains("epochz"));
        let ok: FileConfig = serde_json::from_str(r#"{"epochs": 3, "seed": 1}"#).unwrap();
        assert_eq!((ok.epochs, ok.seed), (Some(3), Some(1)));
    }
}
