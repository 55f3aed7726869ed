use std::path::{Path, PathBuf};

/// Failures of a command, grouped by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("missing upstream artifact `{}`: {hint}", path.display())]
    Dependency { path: PathBuf, hint: String },
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] flexlp_core::Error),
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Process exit code: 2 config, 3 dependency, 4 numeric, 5 validation.
    pub fn exit_code(&self) -> i32 {
        use flexlp_core::Error as E;
        match self {
            CliError::Config(_) | CliError::Core(E::Config(_)) => 2,
            CliError::Dependency { .. } => 3,
            CliError::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => 3,
            CliError::Numeric(_) | CliError::Core(E::Numeric(_)) => 4,
            CliError::Io { .. } => 2,
            CliError::Validation(_)
            | CliError::Core(E::Input(_))
            | CliError::Core(E::Shape { .. })
            | CliError::Core(E::DegenerateSplit { .. })
            | CliError::Core(E::Validation { .. }) => 5,
        }
    }
}
