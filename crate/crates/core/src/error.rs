use thiserror::Error;

/// Errors raised by the explanation toolkit.
#[derive(Debug, Error)]
pub enum RdxError {
    /// Caller-supplied data does not fit the operation (lengths, ranges, ids).
    #[error("input error: {0}")]
    Input(String),

    /// A configuration value or grouping is inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    /// An optimizer or estimator produced a non-finite value.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Random scene generation gave up.
    #[error("generation error: {0}")]
    Generation(String),

    /// A text file (model fixture, scene, manifest) failed to parse.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, RdxError>;

pub(crate) fn input_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(RdxError::Input(msg.into()))
}

pub(crate) fn config_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(RdxError::Config(msg.into()))
}
