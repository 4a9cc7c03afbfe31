use rdx_core::RdxError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Rejected configuration; exit code 2.
    #[error("config error{}{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default(), field.as_ref().map(|f| format!(", field `{f}`")).unwrap_or_default())]
    Config {
        line: Option<usize>,
        field: Option<String>,
        message: String,
    },

    /// The optimizer or estimator produced a non-finite value; exit code 3.
    #[error("numerical abort: {0}")]
    Numerical(String),

    /// Files could not be read or written; exit code 1.
    #[error("io error: {0}")]
    Io(String),

    /// Any other failure while running; exit code 1.
    #[error("{0}")]
    Run(String),
}

impl CliError {
    pub fn config(line: Option<usize>, field: Option<&str>, message: impl Into<String>) -> Self {
        Self::Config {
            line,
            field: field.map(str::to_string),
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config { .. } => 2,
            Self::Numerical(_) => 3,
            Self::Io(_) | Self::Run(_) => 1,
        }
    }
}

impl From<RdxError> for CliError {
    fn from(e: RdxError) -> Self {
        match e {
            RdxError::Numerical(m) => Self::Numerical(m),
            RdxError::Config(m) | RdxError::Input(m) => Self::config(None, None, m),
            RdxError::Parse { line, message } => Self::Run(format!("parse error at line {line}: {message}")),
            RdxError::Io(e) => Self::Io(e.to_string()),
            other => Self::Run(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}
