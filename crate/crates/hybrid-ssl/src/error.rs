//! Crate-wide error type.

use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("inconsistent dimension at line {line}: expected {expected}, found {found}")]
    Dimension {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("dataset has {found} distinct class(es); at least 2 required")]
    ClassCount { found: usize },

    #[error("split leaves the {side} set empty")]
    EmptySplit { side: &'static str },

    #[error("cannot mask {requested} of {total} records while keeping every class labeled")]
    Masking { requested: usize, total: usize },

    #[error("cannot reach skew ratio {ratio}: {reason}")]
    Skew { ratio: f64, reason: String },

    #[error("non-finite value encountered in {context}")]
    NonFinite { context: &'static str },

    #[error("row {row} has zero weight sum and cannot be normalized")]
    ZeroRowSum { row: usize },

    #[error("class {class} has no labeled record")]
    UnlabeledClass { class: usize },

    #[error("linear system is singular")]
    SingularSystem,

    #[error("binary training needs both classes; every label is {0}")]
    SingleClass(i8),

    #[error("class pair ({0}, {1}) has no labeled records on one side")]
    UntrainablePair(usize, usize),

    #[error("training diverged (non-finite loss) at epoch {0}")]
    Diverged(usize),

    #[error("classifier/model mismatch: {0}")]
    ClassifierMismatch(String),

    #[error("feature dimension mismatch: expected {expected}, got {got}")]
    FeatureDim { expected: usize, got: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("confusion matrix is empty")]
    EmptyMatrix,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("model file {path}: {msg}")]
    ModelFormat { path: PathBuf, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
