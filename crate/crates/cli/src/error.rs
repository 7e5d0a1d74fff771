use std::path::Path;

use pgo_core::adaptive::AdaptiveError;
use pgo_core::detect::DetectError;
use pgo_core::profile::ProfileError;
use pgo_core::rewrite::RewriteError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("config {path}: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Profile(#[from] ProfileError),

    #[error(transparent)]
    Detect(#[from] DetectError),

    #[error(transparent)]
    Adaptive(#[from] AdaptiveError),

    #[error(transparent)]
    Rewrite(#[from] RewriteError),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Data(String),
}

pub type Result<T> = std::result::Result<T, CliError>;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

impl CliError {
    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config { .. } => EXIT_USAGE,
            CliError::Rewrite(RewriteError::VerificationFailure(_)) => EXIT_VERIFY,
            CliError::Detect(DetectError::InvalidConfig(_)) | CliError::Adaptive(AdaptiveError::InvalidConfig(_)) => {
                EXIT_USAGE
            }
            _ => EXIT_DATA,
        }
    }
}
