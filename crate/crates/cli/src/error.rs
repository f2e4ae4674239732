//! CLI errors and their exit codes.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flag, grid or config file content.
    #[error("{0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] dnls_core::Error),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// The run finished but a requested check was outside tolerance.
    #[error("{0}")]
    CheckFailed(String),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Process exit status; see the table in the README.
    pub fn exit_code(&self) -> i32 {
        use dnls_core::Error as E;
        match self {
            CliError::CheckFailed(_) => 1,
            CliError::Config(_) => 2,
            CliError::Core(e) => match e {
                E::InvalidArgument(_) => 3,
                E::DivergentConstant(_) => 4,
                E::NoSolution(_) | E::BracketFailure { .. } => 5,
                E::ConvergenceFailure { .. } | E::AccuracyNotMet { .. } => 6,
                E::NumericOverflow { .. } => 7,
                E::UnreliableEstimate { .. } | E::InsufficientData(_) => 8,
                E::Inconsistency { .. } => 9,
                E::Io(_) | E::Parse(_) => 10,
            },
            CliError::Io { .. } => 10,
        }
    }
}
