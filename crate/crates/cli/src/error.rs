use std::process::ExitCode;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Contract(_) => ExitCode::from(2),
            _ => ExitCode::from(1),
        }
    }
}

/// Numerical failures after a valid configuration are contract failures.
impl From<fclt_core::FcltError> for CliError {
    fn from(e: fclt_core::FcltError) -> Self {
        CliError::Contract(e.to_string())
    }
}
