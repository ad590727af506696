use thiserror::Error;

use crate::packing::PackingResult;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix has {len} entries, expected {rows}x{cols}")]
    BadShape { rows: usize, cols: usize, len: usize },

    #[error("matrix contains a non-finite entry")]
    NonFinite,

    #[error("matrix is not Hermitian (deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("trace is {0}, expected 1")]
    NotUnitTrace(f64),

    #[error("smallest eigenvalue {0:.3e} is below the PSD tolerance")]
    NotPsd(f64),

    #[error("operator is not a projector: {0}")]
    NotProjector(String),

    #[error("matrix is not unitary (deviation {0:.3e})")]
    NotUnitary(f64),

    #[error("Hermitian eigensolver did not converge")]
    EigenFailed,

    #[error("no positive eigenvalue survives clipping")]
    ZeroAfterClipping,

    #[error("invalid POVM: {0}")]
    InvalidPovm(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("support violation: outcome {0} has zero reference probability but positive mass")]
    SupportViolation(usize),

    #[error("index {index} out of range (limit {limit})")]
    IndexOutOfRange { index: usize, limit: usize },

    #[error("packing stopped after {draws} draws with {accepted} of {target} states")]
    PackingExhausted {
        draws: u64,
        accepted: usize,
        target: usize,
        partial: Box<PackingResult>,
    },

    #[error("verification failed: {0}")]
    VerificationFailed(String),

    #[error("bisection budget of {0} probes exhausted")]
    BisectionExhausted(usize),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
