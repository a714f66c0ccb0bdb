use thiserror::Error;

/// Errors raised by the simulator library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("singular matrix (pivot magnitude {pivot:e})")]
    Singular { pivot: f64 },
    #[error("{what} did not converge (last residual {residual:e})")]
    NonConvergence { what: &'static str, residual: f64 },
    #[error("empty sensor subset: {0}")]
    EmptyMask(String),
    #[error("degraded update: every {kind} sensor was excluded")]
    DegradedUpdate { kind: char },
    #[error("residual model: {0}")]
    Model(String),
    #[error("invalid configuration: {field}: {message}")]
    Config { field: String, message: String },
    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
