use std::io;

use thiserror::Error;

/// Failure classes shared by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {op}: {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("contract violated: {0}")]
    Contract(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("corpus error: {0}")]
    Corpus(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("record {id} rejected: {reason}")]
    Rejected { id: String, reason: String },
    #[error("training error: {0}")]
    Training(String),
    #[error("evaluation error: {0}")]
    Evaluation(String),
    #[error("integrity error: {0}")]
    Integrity(String),
    #[error("version error: file has version {found}, expected {expected}")]
    Version { found: u32, expected: u32 },
    #[error("metric error: {0}")]
    Metric(String),
    #[error("store error: {0}")]
    Store(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn shape(op: &'static str, left: (usize, usize), right: (usize, usize)) -> Self {
        Error::Shape { op, left, right }
    }
}
