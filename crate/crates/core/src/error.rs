use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Invalid static configuration (overlapping port sets, bad window, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// An operation was called on an input that violates its precondition.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Post-selection kept nothing, so there is no outcome distribution.
    #[error("no outcomes: {0}")]
    EmptyOutcome(String),

    #[error("fringe fit failed: {0}")]
    Fit(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid value for `{key}`: {message}")]
    Validation { key: String, message: String },

    #[error("I/O error: {0}")]
    Io(String),
}

impl Error {
    /// Process exit status for the command-line front end: 1 for bad input,
    /// 2 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Precondition(_) | Error::Parse { .. } | Error::Validation { .. } => 1,
            Error::EmptyOutcome(_) | Error::Fit(_) | Error::Io(_) => 2,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
