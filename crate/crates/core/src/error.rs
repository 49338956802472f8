use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the scoring pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("line {line}: expected {expected} fields, found {found}")]
    RaggedRow {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("line {line}, column {column}: cannot parse {token:?} as a finite number")]
    Parse {
        line: usize,
        column: usize,
        token: String,
    },

    #[error("bad magic bytes {0:?}, expected \"KENF\"")]
    BadMagic([u8; 4]),

    #[error("payload is {actual} bytes, expected {expected}")]
    Length { expected: u64, actual: u64 },

    #[error("non-finite value at row {row}, column {column}")]
    NonFinite { row: usize, column: usize },

    #[error("invalid embedding set: {0}")]
    InvalidSet(String),

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("joint kernel matrix is not PSD: eigenvalue {eigenvalue:e} below -{tolerance:e}")]
    NotPsd { eigenvalue: f64, tolerance: f64 },

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("eigenvalue {0:e} is not positive; apply the cutoff before scoring")]
    NonPositiveEigenvalue(f64),

    #[error("invalid probability vector: {0}")]
    InvalidProbability(String),

    #[error("subsample of {0} points is too small (need at least 2)")]
    SubsampleTooSmall(usize),

    #[error("report serialization failed: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the linear algebra itself, as opposed to bad
    /// input files or arguments.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NotPsd { .. } | Error::Eigensolver(_))
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
