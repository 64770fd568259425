//! Song-level self-attentive genre classification.
//!
//! Pre-embedded lyric (500×128) or audio (30×128) sequences pass through a
//! BiLSTM and a multi-hop self-attention layer. The attended states are
//! flattened into a content embedding used both for genre classification
//! and for similar-song retrieval, and the attention weights explain which
//! words or seconds the model relied on.

pub mod error;
pub mod explain;
pub mod ingest;
pub mod model;
pub mod numcore;
pub mod persist;
pub mod retrieve;
pub mod synthetic;
pub mod train;

pub use error::{Error, Result};
pub use ingest::{EmbeddedSequence, Modality};
pub use model::{ForwardOutput, Model, ModelConfig, ModelParams};
pub use numcore::{Scalar, Tape, Tensor2, Var};
pub use retrieve::EmbeddingStore;
pub use train::{Checkpoint, TrainConfig};

pub type Tensor = Tensor2<f64>;
pub type TensorF32 = Tensor2<f32>;
pub type ModelF64 = Model<f64>;
pub type ModelF32 = Model<f32>;
pub type TapeF64 = Tape<f64>;
