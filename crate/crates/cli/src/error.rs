use mvdis::config::ConfigError;
use mvdis::data::DataError;
use mvdis::experiment::ExperimentError;
use mvdis::metrics::MetricsError;
use mvdis::networks::CheckpointError;
use mvdis::projection::ProjectionError;
use mvdis::trainer::TrainError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Training(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Input(_) => 2,
            CliError::Training(_) => 3,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<CheckpointError> for CliError {
    fn from(e: CheckpointError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<ProjectionError> for CliError {
    fn from(e: ProjectionError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::Length { .. } => CliError::Input(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Config(c) => c.into(),
            TrainError::Views { .. } => CliError::Input(e.to_string()),
            _ => CliError::Training(e.to_string()),
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Config(c) => c.into(),
            ExperimentError::Data(d) => d.into(),
            ExperimentError::Train(t) => t.into(),
            ExperimentError::Metrics(m) => m.into(),
        }
    }
}

pub fn io(path: &std::path::Path, e: std::io::Error) -> CliError {
    CliError::Input(format!("{}: {e}", path.display()))
}
