//! BiLSTM + structured self-attention genre classifier.

mod config;
mod forward;
mod params;

pub use config::{ModelConfig, CONTENT_DIM};
pub(crate) use forward::argmax;
pub use forward::{
    attention_forward, bilstm_forward, classify_forward, extract_content_embedding, loss_and_grads,
    lstm_cell, record_forward, ForwardGraph, ForwardOutput, Model, MASK_VALUE,
};
pub use params::{init_params, LstmWeights, ModelParams, ParamSet, PARAM_NAMES};
