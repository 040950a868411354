use thiserror::Error;

/// Errors raised by the library.
///
/// Variants fall in two families: contract violations (bad inputs, bad
/// configuration) and numerical-domain failures (non-finite evaluations,
/// diverging inner solvers). The CLI maps the first family to exit code 1
/// and the second to exit code 2.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite {what} at scenario {index}")]
    NonFiniteScenario { what: &'static str, index: usize },

    #[error("non-finite {0}")]
    NonFinite(&'static str),

    #[error("{solver} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("linear program failed: {0}")]
    LinearProgram(String),

    #[error("configuration invalid:\n{}", .0.join("\n"))]
    Config(Vec<String>),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the caller's inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFiniteScenario { .. }
                | Error::NonFinite(_)
                | Error::NoConvergence { .. }
                | Error::LinearProgram(_)
        )
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            got,
        })
    }
}
