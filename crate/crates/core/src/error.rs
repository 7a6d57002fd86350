use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("state outside the target support")]
    OutsideSupport,
    #[error("unsupported target: {0}")]
    UnsupportedTarget(String),
    #[error("unsupported dimension {0}: quadrature is available for d <= 2")]
    UnsupportedDimension(usize),
    #[error("configuration error: {0}")]
    Configuration(String),
    #[error("invariant violated at step {step}: {what}")]
    InvariantViolation { step: u64, what: String },
    #[error("coupling contract broken: {0}")]
    CouplingContract(String),
    #[error("bracket [{lo}, {hi}] does not enclose the target acceptance rate")]
    Bracketing { lo: f64, hi: f64 },
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("profile error: {0}")]
    Profile(String),
    #[error("sink error at step {step}: {message}")]
    Sink { step: u64, message: String },
}
