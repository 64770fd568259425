use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Modality, SequenceShape};

/// Width of the content embedding in the reference configuration.
pub const CONTENT_DIM: usize = 2000;

/// Network dimensions.
///
/// `hops * 2 * hidden` is the content-embedding width; the defaults
/// (`hidden = 100`, `hops = 10`) give 2000.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Sequence length L.
    pub seq_len: usize,
    /// Input vector width d.
    pub input_dim: usize,
    /// LSTM units per direction u.
    pub hidden: usize,
    /// Attention hidden width d_a.
    pub attention_dim: usize,
    /// Attention hops r.
    pub hops: usize,
    pub n_classes: usize,
}

impl ModelConfig {
    pub const DEFAULT_HIDDEN: usize = 100;
    pub const DEFAULT_ATTENTION_DIM: usize = 64;
    pub const DEFAULT_HOPS: usize = 10;

    pub fn for_modality(modality: Modality, n_classes: usize) -> Self {
        let shape = SequenceShape::for_modality(modality);
        Self {
            seq_len: shape.len,
            input_dim: shape.dim,
            hidden: Self::DEFAULT_HIDDEN,
            attention_dim: Self::DEFAULT_ATTENTION_DIM,
            hops: Self::DEFAULT_HOPS,
            n_classes,
        }
    }

    pub fn lyric(n_classes: usize) -> Self {
        Self::for_modality(Modality::Lyric, n_classes)
    }

    pub fn audio(n_classes: usize) -> Self {
        Self::for_modality(Modality::Audio, n_classes)
    }

    pub fn content_dim(&self) -> usize {
        self.hops * 2 * self.hidden
    }

    pub fn input_shape(&self) -> SequenceShape {
        SequenceShape {
            len: self.seq_len,
            dim: self.input_dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("seq_len", self.seq_len),
            ("input_dim", self.input_dim),
            ("hidden", self.hidden),
            ("attention_dim", self.attention_dim),
            ("hops", self.hops),
            ("n_classes", self.n_classes),
        ];
        for (name, v) in fields {
            if v == 0 {
                return Err(Error::Config(format!("model {name} must be positive")));
            }
        }
        if self.content_dim() != CONTENT_DIM {
            log::warn!(
                "content embedding width is {} (hops {} x 2 x hidden {}), not {CONTENT_DIM}",
                self.content_dim(),
                self.hops,
                self.hidden
            );
        }
        Ok(())
    }
}
