use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failure modes of binary container parsing (DLF, DKPT, DROM).
#[derive(Debug, Error, PartialEq, Eq)]
pub enum FormatError {
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    Magic { expected: [u8; 4], found: [u8; 4] },
    #[error("unsupported version {found} (expected {expected})")]
    Version { expected: u32, found: u32 },
    #[error("truncated payload: needed {needed} bytes at offset {offset}, {available} available")]
    Truncated { offset: usize, needed: usize, available: usize },
    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Checksum { stored: u32, computed: u32 },
    #[error("malformed content: {0}")]
    Malformed(String),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("shape mismatch in {layer}: {detail}")]
    Shape { layer: String, detail: String },
    #[error("pile-up solver failed at frame {frame}: {detail}")]
    Solver { frame: usize, detail: String },
    #[error("time step failed at t={t:.6} s after {iterations} iterations: {detail}")]
    Step { t: f64, iterations: usize, detail: String },
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("rank deficiency: {0}")]
    RankDeficient(String),
    #[error("evaluation error: {0}")]
    Eval(String),
    #[error("incomplete run grid: {0}")]
    IncompleteGrid(String),
    #[error("{path}: {source}")]
    Format {
        path: PathBuf,
        #[source]
        source: FormatError,
    },
    #[error(transparent)]
    Decode(#[from] FormatError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn shape(layer: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Shape { layer: layer.into(), detail: detail.into() }
    }

    /// Process exit code used by the command line front-end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidGeometry(_) | Error::Json(_) | Error::Shape { .. } => 2,
            Error::Solver { .. }
            | Error::Step { .. }
            | Error::NonFinite(_)
            | Error::RankDeficient(_)
            | Error::Eval(_) => 3,
            Error::Io { .. } | Error::Format { .. } | Error::Decode(_) => 4,
            Error::IncompleteGrid(_) => 5,
        }
    }
}
