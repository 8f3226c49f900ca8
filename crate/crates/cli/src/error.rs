use thiserror::Error;

/// Process exit statuses.
pub const EXIT_PASS: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_GOLDEN: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(#[from] cmclab::Error),

    #[error("golden mismatch: {0}")]
    Golden(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Numerical(_) | CliError::Io { .. } => EXIT_NUMERICAL,
            CliError::Golden(_) => EXIT_GOLDEN,
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
