use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("architecture error at layer {layer} ({kind}): {reason}")]
    Architecture {
        layer: usize,
        kind: String,
        reason: String,
    },

    #[error("degenerate series: {0}")]
    DegenerateSeries(String),

    #[error("augmentation not applicable: {0}")]
    AugmentationNotApplicable(String),

    #[error("empty window set: {0}")]
    EmptyWindowSet(String),

    #[error("window of {len} samples exceeds the {max}-sample input")]
    OversizeWindow { len: usize, max: usize },

    #[error("invalid annotated signal: {0}")]
    InvalidSignal(String),

    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("numerical failure at epoch {epoch}, batch {batch}: {reason}")]
    Numerical {
        epoch: usize,
        batch: usize,
        reason: String,
    },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn shape(op: &'static str, lhs: &[usize], rhs: &[usize]) -> Self {
        Error::Shape {
            op,
            lhs: lhs.to_vec(),
            rhs: rhs.to_vec(),
        }
    }
}
