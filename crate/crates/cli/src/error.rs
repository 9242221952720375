use std::path::PathBuf;

use lsrecovery::LsError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot read matrix {path}: {source}")]
    Matrix {
        path: PathBuf,
        #[source]
        source: LsError,
    },

    #[error("CSV output error: {0}")]
    Csv(#[from] csv::Error),

    #[error("numerical abort: {0}")]
    Numerical(LsError),
}

impl CliError {
    /// Process exit code: 2 config, 3 I/O, 4 numerical abort.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } | CliError::Matrix { .. } | CliError::Csv(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<LsError> for CliError {
    fn from(e: LsError) -> Self {
        match e {
            LsError::InvalidInput(_) | LsError::ShapeMismatch { .. } => {
                CliError::Config(e.to_string())
            }
            LsError::Io(source) => CliError::Io {
                path: PathBuf::new(),
                source,
            },
            LsError::Parse { .. } => CliError::Matrix {
                path: PathBuf::new(),
                source: e,
            },
            LsError::OutOfRegime { .. } | LsError::DegenerateStep { .. } => CliError::Numerical(e),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
