use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("topology resampling gave up after {attempts} attempts ({reason})")]
    ResampleExhausted { attempts: usize, reason: String },

    #[error("codebook is empty")]
    EmptyCodebook,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degenerate channel: {0}")]
    DegenerateChannel(String),

    #[error("no channel entry for BS {bs} -> UE {ue}")]
    MissingChannel { bs: usize, ue: usize },

    #[error("UE {0} has no combiner")]
    MissingCombiner(usize),

    #[error("BS {0} serves no UE")]
    NoServedUe(usize),

    #[error("UE {0} is not associated")]
    UnassociatedUe(usize),

    #[error("infeasible association instance: {0}")]
    Infeasible(String),

    #[error("instance too large for exhaustive enumeration ({candidates} candidates, limit {limit})")]
    InstanceTooLarge { candidates: f64, limit: f64 },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("no baseline row for cell `{0}`")]
    MissingBaseline(String),

    #[error("report error: {0}")]
    Report(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
