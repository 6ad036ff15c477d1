use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter violates a stated constraint; the message names it.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("pole: {context} argument {arg} is within {tol:e} of a pole")]
    Pole { context: String, arg: f64, tol: f64 },

    #[error("simulation blew up at step {step}: {reason}")]
    Simulation { step: usize, reason: String },

    #[error("observer at 1 was swallowed at t = {time}")]
    CurveHitOne { time: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("quality gate failed: {0}")]
    Quality(String),

    #[error("degenerate sample: {0}")]
    Degenerate(String),

    #[error("resolution error: {0}")]
    Resolution(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
