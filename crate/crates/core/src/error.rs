use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed input row. `line` is 1-based.
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("label error: {0}")]
    Label(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("invalid fold count k={k} for n={n} samples (need 2 <= k <= n)")]
    InvalidFoldCount { k: usize, n: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("training data contains a single class")]
    SingleClassDataset,

    #[error("granular-ball family contains a single class")]
    SingleClassFamily,

    #[error("score vector misaligned with ball family: expected {expected} scores, got {got}")]
    ScoreMisalignment { expected: usize, got: usize },

    #[error("invalid quadratic program: {0}")]
    InvalidProblem(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("degenerate model: hyperplane {plane} has a zero normal vector")]
    DegenerateModel { plane: u8 },

    #[error("dimension mismatch: expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty input")]
    EmptyInput,

    #[error("every fold was skipped")]
    NoUsableFolds,

    #[error("shape error: {0}")]
    Shape(String),

    #[error("model file line {line}: {message}")]
    ModelFormat { line: usize, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(line: u64, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
