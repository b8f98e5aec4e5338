use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
///
/// Variants are grouped by the CLI exit code they map to; see [`Error::exit_code`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite CSI entry at subcarrier {k}, time {t}")]
    NonFinite { k: usize, t: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid phase state: expected {expected}, found {found}")]
    PhaseState {
        expected: &'static str,
        found: &'static str,
    },

    #[error("underdetermined linear fit: need at least 2 subcarriers, got {0}")]
    Underdetermined(usize),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("label {label} out of range for {classes} classes")]
    Label { label: usize, classes: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("mode error: {0}")]
    Mode(&'static str),

    #[error("tape already consumed")]
    TapeConsumed,

    #[error("data error: {0}")]
    Data(String),

    #[error("validation error at sample {index}: {reason}")]
    Validation { index: usize, reason: String },

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    Format { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported format version {0}")]
    UnsupportedVersion(u8),

    #[error("corrupt file: expected {expected} bytes, found {actual}")]
    Corrupt { expected: u64, actual: u64 },

    #[error("training diverged at epoch {epoch}, step {step}: {detail}")]
    Divergence {
        epoch: usize,
        step: usize,
        detail: String,
    },

    #[error("non-finite gradient for parameter `{0}`")]
    NonFiniteGradient(String),

    #[error("usage: {0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 2 usage, 3 data/format, 4 divergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::Config(_) | Error::Mode(_) => 2,
            Error::Divergence { .. } | Error::NonFiniteGradient(_) => 4,
            _ => 3,
        }
    }
}
