//! Shared error type for the crate.

use std::fmt;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors emitted by tensor math, data handling, and the online loop.
#[derive(Debug)]
pub enum Error {
    /// Two operands have incompatible shapes.
    Dimension {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    /// A configuration value violates an invariant.
    Config(String),
    /// A row of an input file could not be parsed.
    Parse { line: usize, message: String },
    /// An input file is structurally invalid (bad header, irregular interval, ...).
    Format(String),
    /// An API was called in a state it does not support.
    Usage(String),
    /// A non-finite value appeared during computation.
    Numeric { location: String },
    /// A closed-form expression was evaluated outside its validity region.
    Domain(String),
    /// Underlying I/O failure.
    Io(std::io::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn numeric(location: impl Into<String>) -> Self {
        Error::Numeric {
            location: location.into(),
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Dimension { op, left, right } => {
                write!(f, "{op}: incompatible shapes {left:?} and {right:?}")
            }
            Error::Config(msg) => write!(f, "invalid configuration: {msg}"),
            Error::Parse { line, message } => write!(f, "parse error at line {line}: {message}"),
            Error::Format(msg) => write!(f, "invalid input format: {msg}"),
            Error::Usage(msg) => write!(f, "usage error: {msg}"),
            Error::Numeric { location } => write!(f, "non-finite value in {location}"),
            Error::Domain(msg) => write!(f, "out of domain: {msg}"),
            Error::Io(err) => write!(f, "i/o error: {err}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(err) => Some(err),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err)
    }
}
