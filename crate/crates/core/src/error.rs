use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the simulation lab.
///
/// Variants map one-to-one onto CLI exit codes through [`Error::exit_code`].
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter, grid or scenario violated one of its invariants.
    #[error("configuration error: {0}")]
    Config(String),

    /// A scenario file could not be parsed.
    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    /// Non-finite values appeared during time stepping.
    #[error("numerical failure at t = {t}: {reason}")]
    Numerical { t: f64, reason: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parse { .. } => 2,
            Error::Numerical { .. } => 3,
            Error::Io { .. } => 4,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
