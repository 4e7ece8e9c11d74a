use mlm_core::config::ConfigError;
use mlm_core::data::DataError;
use mlm_core::document::DocumentError;
use mlm_core::interpret::InterpretError;
use mlm_core::mixture::MixtureError;
use mlm_core::pipeline::PipelineError;
use mlm_core::report::ReportError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("data: {0}")]
    Data(DataError),
    #[error("schema: {0}")]
    Schema(DataError),
    #[error("train: {0}")]
    Train(#[from] PipelineError),
    #[error("model: {0}")]
    Document(#[from] DocumentError),
    #[error("report: {0}")]
    Report(#[from] ReportError),
    #[error("predict: {0}")]
    Predict(#[from] MixtureError),
    #[error("explain: {0}")]
    Explain(#[from] InterpretError),
    #[error("i/o: {0}")]
    Io(String),
    #[error("{0}")]
    Usage(String),
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::SchemaMismatch { .. }
            | DataError::UnknownLevel { .. }
            | DataError::MissingTarget(_) => CliError::Schema(e),
            other => CliError::Data(other),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Train(_) | CliError::Predict(_) => 4,
            CliError::Document(_) => 5,
            CliError::Schema(_) => 6,
            CliError::Io(_) | CliError::Report(_) => 7,
            CliError::Explain(_) => 8,
        }
    }
}
