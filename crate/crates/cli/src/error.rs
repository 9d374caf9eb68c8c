use thiserror::Error;

/// Failure classes, each with its own process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(format!("i/o error: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Data(format!("csv error: {e}"))
    }
}

impl From<sonar_complexity::dataset::DatasetError> for CliError {
    fn from(e: sonar_complexity::dataset::DatasetError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<sonar_complexity::elo::EloError> for CliError {
    fn from(e: sonar_complexity::elo::EloError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<sonar_complexity::analysis::StatsError> for CliError {
    fn from(e: sonar_complexity::analysis::StatsError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<sonar_complexity::simulate::SimulationError> for CliError {
    fn from(e: sonar_complexity::simulate::SimulationError) -> Self {
        CliError::Usage(e.to_string())
    }
}
