use thiserror::Error;

/// Errors raised across the toolkit. The variant names the subsystem so a
/// caller can report where a pipeline failed.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("validation: {0}")]
    Validation(String),
    #[error("domain: {0}")]
    Domain(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("estimation failed: {0}")]
    Estimation(String),
    #[error("singular design matrix: {0}")]
    Singular(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("forecast: {0}")]
    Forecast(String),
    #[error("misaligned inputs: {0}")]
    Alignment(String),
    #[error("io: {0}")]
    Io(String),
    #[error("parse: {0}")]
    Parse(String),
}

impl Error {
    /// Short tag of the subsystem that produced the error.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Validation(_) => "validation",
            Error::Domain(_) => "domain",
            Error::Config(_) => "config",
            Error::Estimation(_) => "estimation",
            Error::Singular(_) => "singular",
            Error::Degenerate(_) => "degenerate",
            Error::Forecast(_) => "forecast",
            Error::Alignment(_) => "alignment",
            Error::Io(_) => "io",
            Error::Parse(_) => "parse",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
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

pub type Result<T, E = Error> = std::result::Result<T, E>;
