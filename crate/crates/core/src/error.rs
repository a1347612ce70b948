use thiserror::Error;

/// Errors produced by the numerical routines in this crate.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative method ran out of budget. `partial` carries the last iterate.
    #[error("{what} did not converge (partial value {partial:e})")]
    NoConvergence { what: String, partial: f64 },

    /// Quadrature could not meet the requested tolerance.
    #[error("integration failed to reach tolerance: value {value:e}, error estimate {error:e}")]
    Accuracy { value: f64, error: f64 },

    /// The integrand returned a non-finite value.
    #[error("integrand evaluated to a non-finite value at x = {at}")]
    Evaluation { at: f64 },

    /// Invalid configuration, e.g. an unknown identifier or an inconsistent pairing.
    #[error("configuration error: {0}")]
    Config(String),

    /// A sample cannot be standardized (zero spread, too few points, ...).
    #[error("degenerate sample: {0}")]
    Degenerate(String),

    /// A component of an efficiency computation failed; `context` names the cell.
    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error, skipping any context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for configuration/domain problems as opposed to numerical failure.
    pub fn is_config(&self) -> bool {
        matches!(self.root(), Error::Config(_) | Error::Domain(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
