use std::path::PathBuf;

use thiserror::Error;

/// Process exit status for a failed command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    /// Bad flags, bad configuration or unreadable input.
    Usage = 2,
    /// The input was valid but the computation could not proceed.
    Numerical = 3,
    /// Writing results failed.
    Io = 1,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        column: u64,
        message: String,
    },

    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error(transparent)]
    Library(#[from] matcol::Error),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn parse(path: &std::path::Path, line: u64, column: u64, message: impl Into<String>) -> Self {
        CliError::Parse {
            path: path.to_path_buf(),
            line,
            column,
            message: message.into(),
        }
    }

    pub fn exit_kind(&self) -> ExitKind {
        match self {
            CliError::Usage(_) | CliError::Parse { .. } | CliError::Read { .. } => ExitKind::Usage,
            CliError::Write { .. } => ExitKind::Io,
            CliError::Library(e) if e.is_numerical() => ExitKind::Numerical,
            CliError::Library(_) => ExitKind::Usage,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
