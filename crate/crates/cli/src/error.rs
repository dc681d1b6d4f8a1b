use thiserror::Error;

/// Exit code for configuration problems, including levels that are too
/// coarse for the market parameters.
pub const EXIT_CONFIG: u8 = 2;
/// Exit code when a numerical guard (step cap, depth cap, ...) trips.
pub const EXIT_NUMERICAL: u8 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] strongwalk_core::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_numerical_guard() => EXIT_NUMERICAL,
            _ => EXIT_CONFIG,
        }
    }
}
