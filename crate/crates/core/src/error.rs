use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid spin quantum number {0}: 2j must be a non-negative integer")]
    InvalidSpin(f64),

    #[error("dimension must be at least {min}, got {got}")]
    DimensionTooSmall { min: usize, got: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not Hermitian (residual {0:e})")]
    NotHermitian(f64),

    #[error("density matrix has trace {0}, expected 1")]
    NotNormalized(f64),

    #[error("state vector has norm {0}, expected 1")]
    NotNormalizedKet(f64),

    #[error("point is off the unit sphere (norm {0})")]
    OffSphere(f64),

    #[error("target state is mixed (purity {0}); fidelity requires a pure target")]
    MixedTarget(f64),

    #[error("kick count must be at least 1")]
    NoKicks,

    #[error("measurement record contains no information (all design rows vanish)")]
    NoInformation,

    #[error("spectrum has no positive weight")]
    EmptySpectrum,

    #[error("parity sectors have dimensions {got:?}, expected {expected:?}")]
    ParitySectors {
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("unsupported: {0}")]
    Unsupported(String),
}
