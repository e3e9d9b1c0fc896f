use thiserror::Error;

/// Errors raised by the analytics, numerical kernels and simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("singularity: {0}")]
    Singularity(String),

    #[error("divergent integral: {0}")]
    Divergence(String),

    #[error("inconclusive: {0}")]
    Inconclusive(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("no convergence: {message} (best estimate {best_estimate:e}, error {abs_error:e})")]
    NonConvergence {
        message: String,
        best_estimate: f64,
        abs_error: f64,
    },

    #[error("ODE step size underflow at t = {t}: {message}")]
    StepUnderflow { t: f64, message: String },

    #[error("no closed form: {0}")]
    NoPattern(String),

    #[error("path {path_index}: {source}")]
    Path {
        path_index: u64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// True for failures of a numerical method (non-convergence, underflow),
    /// as opposed to invalid input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NonConvergence { .. } | Error::StepUnderflow { .. } => true,
            Error::Path { source, .. } => source.is_numerical(),
            _ => false,
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
