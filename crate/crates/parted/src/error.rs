use std::path::PathBuf;

/// Failures of the command-line pipeline, grouped by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Usage(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error(transparent)]
    Core(#[from] parted_core::Error),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        CliError::Parse {
            path: path.into(),
            message: message.to_string(),
        }
    }

    /// 1 for validation failures, 2 for I/O, parse, config and usage errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) | CliError::Core(_) => 1,
            CliError::Io { .. } | CliError::Parse { .. } | CliError::Config(_) | CliError::Usage(_) => 2,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
