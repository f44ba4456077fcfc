use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An objective, metric or field could not be built from the given data.
    #[error("construction error: {0}")]
    Construction(String),

    /// A parameter lies outside the range where the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("coordinate frame mismatch: field expects {expected} coordinates, state is in {got} coordinates")]
    FrameMismatch {
        expected: &'static str,
        got: &'static str,
    },

    /// An iterative method (equilibrium search, fixed point) ran out of budget.
    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    Convergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    /// A solver failed at a given step of an integration.
    #[error("integration failed at step {step}: {source}")]
    StepFailed {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("sampling error: {0}")]
    Sampling(String),

    /// A computed step size violates the admissible explicit Euler window.
    #[error("step size {h:e} lies outside the admissible window (0, {window:e})")]
    WindowViolation { h: f64, window: f64 },

    /// Invalid experiment configuration; `field` names the offending entry.
    #[error("invalid config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
