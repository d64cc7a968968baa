use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration or model parameters. `path` names the offending field.
    #[error("{path}: {message}")]
    Config { path: String, message: String },

    /// Invalid arguments to an analysis routine.
    #[error("usage: {0}")]
    Usage(String),

    /// Malformed trace file.
    #[error("trace line {line}: {message}")]
    TraceFormat { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn usage(message: impl Into<String>) -> Self {
        Error::Usage(message.into())
    }
}
