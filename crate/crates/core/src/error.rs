use thiserror::Error;

pub type Result<T> = std::result::Result<T, FcltError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FcltError {
    #[error("{kind} rate at position {index} is {value}; every rate must be > 0")]
    ZeroRate {
        kind: &'static str,
        index: usize,
        value: f64,
    },

    #[error("row {row} is not a generator row: {reason}")]
    NotAGenerator { row: usize, reason: String },

    #[error("chain is not ergodic: {0}")]
    NotErgodic(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("observable is constant under pi; its centered version is zero")]
    DegenerateObservable,

    #[error("operation requires a reversible model (detailed-balance residual {residual:e})")]
    NotReversible { residual: f64 },

    #[error("spectral decomposition failed: {0}")]
    SpectralFailure(String),

    #[error("shifted linear system is singular (lambda = {lambda})")]
    SingularSolve { lambda: f64 },

    #[error("vector has a constant component <f,1>_pi = {component:e}")]
    NotCentered { component: f64 },

    #[error("time {t} exceeds path horizon {horizon}")]
    HorizonExceeded { t: f64, horizon: f64 },

    #[error("schedule exponent {exponent} must be > 1 for lambda_n = o(1/n)")]
    ScheduleNotSmallO { exponent: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("contract violated: {invariant}: {detail}")]
    ContractViolation { invariant: String, detail: String },
}

impl FcltError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        FcltError::InvalidArgument(msg.into())
    }

    pub(crate) fn violation(invariant: &str, detail: impl Into<String>) -> Self {
        FcltError::ContractViolation {
            invariant: invariant.to_string(),
            detail: detail.into(),
        }
    }
}
