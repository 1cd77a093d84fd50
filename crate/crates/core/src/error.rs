use thiserror::Error;

/// Errors raised by the engine.
///
/// The variants are grouped so that a front end can map them onto stable
/// exit codes: argument/config problems, model validation, numerical domain
/// failures and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("degenerate ensemble: every row is excluded by the cutoff")]
    DegenerateEnsemble,

    #[error("evaluation failed for variable `{variable}`: {source}")]
    Evaluation {
        variable: String,
        #[source]
        source: Box<Error>,
    },

    #[error("density is not normalized (trapezoid integral = {integral})")]
    Unnormalized { integral: f64 },

    #[error("unstable step with dt = {dt}: {reason}")]
    Unstable { dt: f64, reason: String },

    #[error("unavailable: {0}")]
    Unavailable(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn model(msg: impl Into<String>) -> Self {
        Error::InvalidModel(msg.into())
    }

    /// Short machine-readable tag for the error class.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::InvalidModel(_) => "invalid_model",
            Error::DegenerateEnsemble => "degenerate_ensemble",
            Error::Evaluation { source, .. } => source.kind(),
            Error::Unnormalized { .. } => "unnormalized",
            Error::Unstable { .. } => "unstable",
            Error::Unavailable(_) => "unavailable",
            Error::Io(_) => "io",
            Error::Parse(_) => "parse",
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
