use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("malformed dataset: {0}")]
    MalformedDataset(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("integrity check failed: {0}")]
    Integrity(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("numeric failure: {0}")]
    NumericFailure(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("degenerate graph: {0}")]
    DegenerateGraph(String),

    #[error("negative sampling exhausted after {attempts} attempts ({found} of {wanted} non-edges found)")]
    SamplingExhausted {
        attempts: usize,
        found: usize,
        wanted: usize,
    },

    #[error("bad file format in {path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }
}
