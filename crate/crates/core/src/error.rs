use thiserror::Error;

pub type Result<T, E = SabcError> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SabcError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("output kinds differ (continuous vs count)")]
    OutputKindMismatch,

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid distance {value} at index {index}: distances must be finite and >= 0")]
    InvalidDistance { index: usize, value: f64 },

    #[error("jump kernel covariance is not positive definite")]
    DegenerateKernel,

    #[error("ensemble needs at least 2 particles, has {0}")]
    TooFewParticles(usize),

    #[error("model `{0}` provides no prior log-density, required for the prior energy")]
    MissingPriorDensity(String),

    #[error("singular or ill-conditioned matrix (condition estimate {0:.3e}); recalibration needed")]
    IllConditioned(f64),

    #[error("recalibration did not converge after {iterations} iterations (residual {residual:.3e})")]
    RecalibrationFailed { iterations: usize, residual: f64 },

    #[error("simulator failure: {0}")]
    Simulator(String),

    #[error("invalid model parameters: {0}")]
    InvalidModel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    InvalidConfig(Vec<String>),

    #[error("trace too short for an asymptotic fit: {sweeps} sweeps, need >= {needed}")]
    TraceTooShort { sweeps: usize, needed: usize },
}
