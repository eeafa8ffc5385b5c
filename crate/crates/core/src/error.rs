use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch on {axis}: expected {expected}, got {actual}")]
    Shape {
        axis: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite value {value} at index {index:?}")]
    NonFinite { index: [usize; 4], value: f64 },

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("backward called on `{0}` without a cached forward pass")]
    MissingCache(&'static str),

    #[error("layer {index} ({kind}): {reason}")]
    Config {
        index: usize,
        kind: String,
        reason: String,
    },

    #[error("{path}: {reason}")]
    Data { path: PathBuf, reason: String },

    #[error("checkpoint: {0}")]
    Checkpoint(#[from] CheckpointError),

    #[error("non-finite gradient in parameter `{0}`; optimizer step rejected")]
    NonFiniteGradient(String),

    #[error("training diverged at epoch {epoch}, step {step} (loss = {loss})")]
    Diverged { epoch: usize, step: u64, loss: f64 },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("bad magic bytes, not a TFDM checkpoint")]
    BadMagic,
    #[error("unsupported checkpoint version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("checksum mismatch (file truncated or corrupted)")]
    Checksum,
    #[error("malformed record: {0}")]
    Malformed(String),
    #[error("config mismatch: checkpoint holds `{found}`, expected `{expected}`")]
    ConfigMismatch { found: String, expected: String },
    #[error("dtype mismatch: checkpoint stores {found}, network uses {expected}")]
    DType {
        found: &'static str,
        expected: &'static str,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn check_dim(axis: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::Shape {
            axis,
            expected,
            actual,
        })
    }
}
