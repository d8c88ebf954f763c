use std::path::PathBuf;

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("{0}")]
    Usage(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error(transparent)]
    Core(#[from] youngheat_core::Error),

    #[error("verification failed: {0}")]
    Failed(String),
}

impl AppError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AppError::Io { path: path.into(), source }
    }

    pub fn format(path: impl Into<PathBuf>, msg: impl ToString) -> Self {
        AppError::Format { path: path.into(), msg: msg.to_string() }
    }

    pub fn exit_code(&self) -> i32 {
        use youngheat_core::Error as E;
        match self {
            AppError::Usage(_) | AppError::Config(_) => EXIT_USAGE,
            AppError::Io { .. } | AppError::Format { .. } => EXIT_IO,
            AppError::Core(E::InvalidHurst(_) | E::InvalidArgument(_) | E::GridMismatch(_) | E::NotInLattice(_)) => {
                EXIT_USAGE
            }
            AppError::Core(_) | AppError::Failed(_) => EXIT_NUMERIC,
        }
    }
}

pub type AppResult<T> = Result<T, AppError>;
