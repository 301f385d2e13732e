//! Kernel support vector machines: a sequential-minimal-optimization dual
//! solver, one-vs-rest multiclass arbitration and classification metrics.
//!
//! Solvers work directly on precomputed kernel matrices; they never see
//! feature vectors, so any estimated or exact kernel can be plugged in.

mod metrics;
mod ovr;
mod smo;

pub use metrics::{accuracy, confusion};
pub use ovr::{train_ovr, OvrClassifier};
pub use smo::{
    kernel_checksum, kkt_violation, train_binary, train_binary_with, SmoParams, SvmModel,
    DEFAULT_C, DEFAULT_TOLERANCE,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LearnerError {
    #[error("training labels contain a single class")]
    OneClass,
    #[error("class {0} has no training examples")]
    MissingClass(usize),
    #[error("kernel entry ({row}, {col}) is not finite")]
    NonFinite { row: usize, col: usize },
    #[error("kernel is degenerate: every entry equals {0}")]
    Degenerate(f64),
    #[error("expected length {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("kernel must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("labels must be +1 or -1, found {0}")]
    BadLabel(i64),
    #[error("regularization C must be positive and finite, got {0}")]
    BadRegularization(f64),
    #[error("solver did not converge within {0} iterations")]
    NotConverged(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = LearnerError> = std::result::Result<T, E>;
