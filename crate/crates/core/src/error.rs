use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("no token occurs at least {min_count} times; vocabulary is empty")]
    EmptyVocabulary { min_count: u64 },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("{what}: bad magic bytes {found:?}")]
    BadMagic { what: &'static str, found: [u8; 4] },

    #[error("{what}: unsupported format version {found} (expected {expected})")]
    VersionMismatch {
        what: &'static str,
        expected: u32,
        found: u32,
    },

    #[error("{what}: truncated record {index} of {expected}")]
    TruncatedRecord {
        what: &'static str,
        index: u64,
        expected: u64,
    },

    #[error("{what}: {msg}")]
    Format { what: &'static str, msg: String },

    #[error("{}:{line}: {msg}", path.display())]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("co-occurrence matrix is empty")]
    EmptyMatrix,

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("cosine undefined for a zero vector")]
    ZeroVector,

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("outside domain: {0}")]
    Domain(String),

    #[error("{dataset}: only {scored} of {total} items scored")]
    InsufficientCoverage {
        dataset: String,
        scored: usize,
        total: usize,
    },
}

impl Error {
    pub(crate) fn format(what: &'static str, msg: impl Into<String>) -> Self {
        Error::Format { what, msg: msg.into() }
    }
}
