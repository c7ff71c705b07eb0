//! Std companion to `etacrit-core`: parallel multistart, parameter sweeps
//! with CSV output, text file formats and the `etacrit` command line.

use std::path::{Path, PathBuf};

pub mod check;
pub mod cli;
pub mod files;
pub mod parallel;
pub mod scan;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] etacrit_core::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    /// Malformed input text; `line` 0 means the whole file.
    #[error("{}{message}", location(path.as_deref(), *line))]
    Format {
        path: Option<PathBuf>,
        line: usize,
        message: String,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

fn location(path: Option<&Path>, line: usize) -> String {
    match (path, line) {
        (Some(p), 0) => format!("{}: ", p.display()),
        (Some(p), n) => format!("{}: line {n}: ", p.display()),
        (None, 0) => String::new(),
        (None, n) => format!("line {n}: "),
    }
}

impl Error {
    pub(crate) fn format(line: usize, message: impl Into<String>) -> Self {
        Error::Format {
            path: None,
            line,
            message: message.into(),
        }
    }

    pub(crate) fn in_file(self, p: &Path) -> Self {
        match self {
            Error::Format { line, message, .. } => Error::Format {
                path: Some(p.to_path_buf()),
                line,
                message,
            },
            Error::Core(etacrit_core::Error::Parse { line, message }) => Error::Format {
                path: Some(p.to_path_buf()),
                line,
                message,
            },
            other => other,
        }
    }

    /// True for failed recomputation checks, as opposed to bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Core(etacrit_core::Error::NumericIntegrity(_)))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
