use thiserror::Error;

pub type Result<T, E = CoreError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoreError {
    #[error("invalid link configuration: {0}")]
    InvalidConfig(String),

    #[error("(S, S) is not a valid state pair")]
    SilentPair,

    #[error("expected {expected} samples, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error(
        "adaptive quadrature did not converge: estimate {estimate:e}, error estimate {error:e} \
         exceeds tolerance {tolerance:e} after {subdivisions} subdivisions"
    )]
    Quadrature {
        estimate: f64,
        error: f64,
        tolerance: f64,
        subdivisions: usize,
    },

    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
}
