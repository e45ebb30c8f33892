use std::path::{Path, PathBuf};

use thiserror::Error;

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{0}")]
    Numerical(String),

    #[error(transparent)]
    Core(#[from] tidewave::Error),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    pub fn exit_code(&self) -> i32 {
        use tidewave::Error as E;
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Io { .. } => EXIT_IO,
            CliError::Numerical(_) => EXIT_NUMERICAL,
            CliError::Core(e) => match e {
                E::Io(_) => EXIT_IO,
                E::Csv(c) if c.is_io_error() => EXIT_IO,
                E::Numerical(_) => EXIT_NUMERICAL,
                _ => EXIT_VALIDATION,
            },
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
