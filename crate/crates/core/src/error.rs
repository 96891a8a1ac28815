use thiserror::Error;

/// Errors raised by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension {dim} exceeds the configured cap {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("duplicate subsystem label `{0}`")]
    DuplicateLabel(String),

    #[error("unknown subsystem label `{0}`")]
    UnknownLabel(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid subsystem dimension {0} (must be >= 1)")]
    InvalidDim(usize),

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("operator is not Hermitian (deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("operator is not positive semidefinite (min eigenvalue {0:.3e})")]
    NotPsd(f64),

    #[error("trace {0} outside the allowed range")]
    BadTrace(f64),

    #[error("state is not normalized (trace {0})")]
    NotNormalized(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("SDP failed: {0}")]
    Sdp(String),

    #[error("cross-check failed: {0}")]
    CrossCheck(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("smoothing parameter {0} is outside [0, 1)")]
    SmoothingOutOfRange(f64),

    #[error("channel is not trace preserving")]
    NotTracePreserving,

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("divisibility violated: L = {l} does not divide K*|A| = {n}")]
    Divisibility { l: usize, n: usize },

    /// An entropy evaluation failed after the Monte Carlo stage finished;
    /// the sample statistics are kept.
    #[error("{source} (sample statistics retained)")]
    Experiment {
        source: Box<Error>,
        partial: Box<crate::decoupling::SampleStats>,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
