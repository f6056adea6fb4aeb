use cfl_core::Error as CoreError;

/// Failure of a CLI run, classified for scripts by [`CliError::category`].
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Convergence(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Golden(String),
}

impl CliError {
    pub fn category(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Convergence(_) => "convergence",
            CliError::Io(_) => "io",
            CliError::Golden(_) => "golden",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Convergence(_) => 3,
            CliError::Io(_) => 4,
            CliError::Golden(_) => 5,
        }
    }

    /// Single-line JSON error record for stderr.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "error": {
                "category": self.category(),
                "message": self.to_string(),
            }
        })
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InvalidParameter { .. } | CoreError::DimensionMismatch { .. } | CoreError::NotHermitian { .. } | CoreError::Parse { .. } => {
                CliError::Config(e.to_string())
            }
            CoreError::GridTooShort { .. }
            | CoreError::NormDrift { .. }
            | CoreError::Truncation { .. }
            | CoreError::Consistency { .. } => CliError::Convergence(e.to_string()),
            CoreError::Io(_) => CliError::Io(e.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub fn io_error(path: &std::path::Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}
