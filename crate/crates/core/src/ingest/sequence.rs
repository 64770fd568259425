use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{AudioRecord, EmbeddingProvider, Modality};
use crate::numcore::{Scalar, Tensor2};

/// Fixed length × width of a model input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceShape {
    pub len: usize,
    pub dim: usize,
}

impl SequenceShape {
    /// 500 words of 128-d word vectors.
    pub const LYRIC: SequenceShape = SequenceShape { len: 500, dim: 128 };
    /// 30 one-second frames of 128-d audio embeddings.
    pub const AUDIO: SequenceShape = SequenceShape { len: 30, dim: 128 };

    pub fn for_modality(m: Modality) -> Self {
        match m {
            Modality::Lyric => Self::LYRIC,
            Modality::Audio => Self::AUDIO,
        }
    }
}

/// Zero-padded L×d model input. Rows at and after `valid_len` are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedSequence<T: Scalar = f64> {
    pub matrix: Tensor2<T>,
    pub valid_len: usize,
    pub modality: Modality,
}

impl<T: Scalar> EmbeddedSequence<T> {
    pub fn new(matrix: Tensor2<T>, valid_len: usize, modality: Modality) -> Result<Self> {
        if valid_len > matrix.rows() {
            return Err(Error::Contract(format!(
                "valid_len {valid_len} exceeds sequence length {}",
                matrix.rows()
            )));
        }
        Ok(Self {
            matrix,
            valid_len,
            modality,
        })
    }

    pub fn len(&self) -> usize {
        self.matrix.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.valid_len == 0
    }

    pub fn cast<U: Scalar>(&self) -> EmbeddedSequence<U> {
        EmbeddedSequence {
            matrix: self.matrix.cast(),
            valid_len: self.valid_len,
            modality: self.modality,
        }
    }
}

/// Embeds tokens into the standard 500×128 lyric input.
pub fn embed_lyric(
    tokens: &[String],
    provider: &dyn EmbeddingProvider,
) -> Result<EmbeddedSequence> {
    embed_lyric_with(tokens, provider, SequenceShape::LYRIC)
}

/// Keeps the first `shape.len` tokens; unknown tokens become zero rows.
pub fn embed_lyric_with(
    tokens: &[String],
    provider: &dyn EmbeddingProvider,
    shape: SequenceShape,
) -> Result<EmbeddedSequence> {
    if provider.dimension() != shape.dim {
        return Err(Error::Config(format!(
            "embedding provider has dimension {}, model input expects {}",
            provider.dimension(),
            shape.dim
        )));
    }
    let valid_len = tokens.len().min(shape.len);
    let mut matrix = Tensor2::zeros(shape.len, shape.dim);
    for (i, token) in tokens.iter().take(valid_len).enumerate() {
        if let Some(v) = provider.lookup(token) {
            matrix.row_mut(i).copy_from_slice(&v);
        }
    }
    EmbeddedSequence::new(matrix, valid_len, Modality::Lyric)
}

/// Copies the first 30 frames into the standard 30×128 audio input.
pub fn embed_audio(record: &AudioRecord) -> Result<EmbeddedSequence> {
    embed_audio_with(record, SequenceShape::AUDIO)
}

pub fn embed_audio_with(record: &AudioRecord, shape: SequenceShape) -> Result<EmbeddedSequence> {
    if record.frames.cols() != shape.dim {
        return Err(Error::Format(format!(
            "audio record {:?} has {}-d frames, expected {}",
            record.id,
            record.frames.cols(),
            shape.dim
        )));
    }
    let valid_len = record.frames.rows().min(shape.len);
    let mut matrix = Tensor2::zeros(shape.len, shape.dim);
    for i in 0..valid_len {
        matrix.row_mut(i).copy_from_slice(record.frames.row(i));
    }
    EmbeddedSequence::new(matrix, valid_len, Modality::Audio)
}
