use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the command-line front-end, each mapped to an exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// A config value is missing, malformed or inconsistent.
    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },

    /// The config text could not be parsed.
    #[error("config parse error: {0}")]
    Parse(String),

    /// Inputs to `compare` are incompatible.
    #[error("input error: {0}")]
    Input(String),

    #[error("runtime error: {0}")]
    Runtime(#[from] stochavg::Error),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{failed} of {total} acceptance criteria failed")]
    VerifyFailed { failed: usize, total: usize },
}

impl CliError {
    pub fn config(key: impl Into<String>, message: impl std::fmt::Display) -> Self {
        Self::Config {
            key: key.into(),
            message: message.to_string(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 for validation errors, 3 for runtime errors, 1 for failed verdicts.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config { .. } | Self::Parse(_) | Self::Input(_) => 2,
            Self::Runtime(_) | Self::Io { .. } => 3,
            Self::VerifyFailed { .. } => 1,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
