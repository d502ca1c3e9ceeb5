use thiserror::Error;

/// Errors produced by topology construction, analysis and experiment planning.
#[derive(Debug, Error)]
pub enum Error {
    /// A topology or analysis parameter is outside its admissible range.
    #[error("invalid parameter `{name}`: {reason}")]
    Param { name: &'static str, reason: String },

    /// A topology, plan or dataset document could not be parsed or failed validation.
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    /// An experiment or report configuration is inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    /// A value lies outside the domain of the function evaluated.
    #[error("domain error: {0}")]
    Domain(String),

    /// The requested combination is not covered by the closed-form models.
    #[error("out of scope: {0}")]
    OutOfScope(String),

    /// Numerical routine failed to converge.
    #[error("numeric error: {0}")]
    Numeric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Param {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
