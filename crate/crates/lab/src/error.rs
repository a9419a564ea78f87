use dampspec::LabError;
use thiserror::Error;

use crate::config::FieldError;

/// Process exit status for a run that completes with failing checks.
pub const EXIT_CHECK_FAILURE: u8 = 1;
pub const EXIT_INVALID_CONFIG: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("cannot parse configuration: {0}")]
    Parse(String),
    #[error("invalid configuration:\n{}", format_fields(.0))]
    Invalid(Vec<FieldError>),
    #[error("unknown scenario '{0}'")]
    UnknownScenario(String),
    #[error(transparent)]
    Numeric(#[from] LabError),
    #[error("i/o failure on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

fn format_fields(errors: &[FieldError]) -> String {
    errors.iter().map(|e| format!("  {e}")).collect::<Vec<_>>().join("\n")
}

impl RunError {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Self::Io { path: path.as_ref().display().to_string(), source }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Parse(_) | Self::Invalid(_) | Self::UnknownScenario(_) => EXIT_INVALID_CONFIG,
            // Arguments the validator cannot see (e.g. a scenario needing two profiles).
            Self::Numeric(LabError::InvalidArgument(_) | LabError::OutsideTruncation { .. }) => EXIT_INVALID_CONFIG,
            Self::Numeric(_) | Self::Io { .. } => EXIT_NUMERIC,
        }
    }
}
