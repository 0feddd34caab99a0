use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("moment {0} is neither stored nor reachable through conjugation")]
    UnknownMoment(String),

    #[error("integration aborted at step {step}: {reason}")]
    IntegrationAbort { step: usize, reason: String },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("squeezing parameter undefined: transverse spin is zero")]
    UndefinedSqueezing,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("steady state not reached within {steps} steps (last relative change {last_change:e})")]
    Convergence { steps: usize, last_change: f64 },

    #[error("fit did not converge (best residual norm {best_residual:e})")]
    Fit { best_residual: f64 },

    #[error("fitted curve has no interior minimum")]
    NoMinimum,

    #[error("no oscillation detected: {0}")]
    NoOscillation(String),

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("oracle rejected: {0}")]
    Oracle(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Error {
    Error::Parameter {
        name,
        reason: reason.into(),
    }
}
