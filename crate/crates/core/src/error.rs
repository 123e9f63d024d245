use std::fmt;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid tags{}: {message}", Location(*sentence, *position))]
    Validation {
        sentence: Option<usize>,
        position: Option<usize>,
        message: String,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("malformed model file: {0}")]
    Format(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Process exit status for command-line front ends: 1 for usage and
    /// configuration problems, 2 for bad data or files, 3 for numerical
    /// failures during training.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            Error::Numerical(_) => 3,
            _ => 2,
        }
    }

    pub(crate) fn validation(position: Option<usize>, message: impl Into<String>) -> Self {
        Error::Validation {
            sentence: None,
            position,
            message: message.into(),
        }
    }

    /// Attaches a sentence index to a validation error.
    pub(crate) fn in_sentence(self, index: usize) -> Self {
        match self {
            Error::Validation {
                position, message, ..
            } => Error::Validation {
                sentence: Some(index),
                position,
                message,
            },
            other => other,
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

struct Location(Option<usize>, Option<usize>);

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.0, self.1) {
            (Some(s), Some(p)) => write!(f, " in sentence {s} at position {p}"),
            (Some(s), None) => write!(f, " in sentence {s}"),
            (None, Some(p)) => write!(f, " at position {p}"),
            (None, None) => Ok(()),
        }
    }
}
