use thiserror::Error;

/// Errors raised by the numerical and control layers.
///
/// Magnitudes are carried as `f64` regardless of the scalar type the
/// computation ran in, so the error type stays non-generic.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch { context: &'static str, expected: String, found: String },

    #[error("matrix is not symmetric (relative asymmetry {asymmetry:.3e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("matrix {name} is not positive definite (smallest eigenvalue {min_eigenvalue:.3e})")]
    NotPositiveDefinite { name: &'static str, min_eigenvalue: f64 },

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("{what} did not converge after {iterations} iterations (last residual {residual:.3e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
        /// Tail of the residual history, oldest first.
        history: Vec<f64>,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("rate {rate} at index {index} is outside [0, 1)")]
    RateOutOfRange { index: usize, rate: f64 },

    #[error("empirical check `{check}` violated: worst ratio {worst:.6e} exceeds {limit:.6e}")]
    EmpiricalViolation { check: String, worst: f64, limit: f64 },

    #[error("required constant `{0}` is not available")]
    MissingConstant(&'static str),

    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("trajectory file: {0}")]
    Trajectory(String),
}

impl Error {
    pub(crate) fn dims(context: &'static str, expected: impl ToString, found: impl ToString) -> Self {
        Error::DimensionMismatch { context, expected: expected.to_string(), found: found.to_string() }
    }

    pub(crate) fn at_step(step: usize, source: Error) -> Self {
        Error::AtStep { step, source: Box::new(source) }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
