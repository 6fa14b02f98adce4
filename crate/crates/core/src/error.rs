use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition of an operation was violated (dimension mismatch,
    /// out-of-range argument, malformed structure).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A non-finite value appeared during a numerical computation.
    #[error("numeric overflow: non-finite {what}{}", step.map(|s| format!(" at time step {s}")).unwrap_or_default())]
    NumericOverflow {
        what: &'static str,
        step: Option<usize>,
    },

    /// A text file could not be parsed.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Invalid configuration or command-line usage.
    #[error("config error: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Attaches a time step to a numeric error that does not carry one yet.
    pub(crate) fn at_step(self, t: usize) -> Self {
        match self {
            Error::NumericOverflow { what, step: None } => Error::NumericOverflow {
                what,
                step: Some(t),
            },
            other => other,
        }
    }

    /// Process exit status used by the command-line front end:
    /// 2 for configuration/usage problems, 3 for numeric failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Contract(_) | Error::Config(_) | Error::Parse { .. } => 2,
            Error::NumericOverflow { .. } => 3,
            Error::Io { .. } => 1,
        }
    }
}

pub(crate) fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Contract(msg()))
    }
}
