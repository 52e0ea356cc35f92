use thiserror::Error;

/// Errors raised by the integrators, linear algebra, reservoir and metrics.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite state encountered at t = {time}")]
    NonfiniteState { time: f64 },

    #[error("adaptive step size {step:e} underflowed at t = {time}")]
    StepUnderflow { time: f64, step: f64 },

    #[error("eigenvalue iteration did not converge")]
    NoConvergence,

    #[error("cannot rescale a matrix whose spectral radius is zero")]
    ZeroRadiusInput,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("abscissa values are all equal; no line can be fitted")]
    DegenerateAbscissa,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("reference trajectory has zero variance")]
    ZeroVariance,

    #[error("only {found} samples inside the growth window ({low:e}, {high:e}); need at least {needed}")]
    InsufficientGrowthWindow {
        found: usize,
        needed: usize,
        low: f64,
        high: f64,
    },

    #[error("initial error {error} already at or above threshold {threshold}")]
    AlreadyExceeded { error: f64, threshold: f64 },

    #[error("growth rate must be positive, got {0}")]
    NonpositiveSlope(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl Error {
    /// True for failures caused by numerics (blow-up, non-convergence) rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonfiniteState { .. } | Error::StepUnderflow { .. } | Error::NoConvergence
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
