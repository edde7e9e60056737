use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Adaptive quadrature or a maximizer ran out of budget before
    /// reaching its tolerance.
    #[error("convergence failure: estimate {estimate} with error bound {error_bound}")]
    Convergence { estimate: f64, error_bound: f64 },

    /// A solver target that no admissible input can reach.
    #[error("infeasible target: {0}")]
    InfeasibleTarget(String),

    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    /// Monte Carlo run retained too few draws to form an estimate.
    #[error("insufficient sample: {0}")]
    InsufficientSample(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("validation error at line {line}: {message}")]
    Validation { line: u64, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Errors caused by bad input rather than by a failed computation.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Domain(_)
                | Error::UnsupportedModel(_)
                | Error::Parse { .. }
                | Error::Validation { .. }
                | Error::Io(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
