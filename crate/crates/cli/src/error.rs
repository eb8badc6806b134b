use std::fmt;

use relgcn::data::DataError;
use relgcn::model::CheckpointError;
use relgcn::{ModelError, TrainError};

pub const EXIT_RUNTIME: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

/// An error with the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub error: anyhow::Error,
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn usage(error: impl Into<anyhow::Error>) -> Self {
        CliError { code: EXIT_USAGE, error: error.into() }
    }

    pub fn runtime(error: impl Into<anyhow::Error>) -> Self {
        CliError { code: EXIT_RUNTIME, error: error.into() }
    }

    pub fn context(self, what: impl fmt::Display + Send + Sync + 'static) -> Self {
        CliError { code: self.code, error: self.error.context(what) }
    }
}

/// The error chain joined by ": ", skipping causes whose text the previous
/// message already includes.
impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut last = String::new();
        for (i, cause) in self.error.chain().enumerate() {
            let text = cause.to_string();
            if last.contains(&text) {
                continue;
            }
            if i > 0 {
                f.write_str(": ")?;
            }
            f.write_str(&text)?;
            last = text;
        }
        Ok(())
    }
}

fn data_code(e: &DataError) -> u8 {
    match e {
        DataError::Io { .. } => EXIT_RUNTIME,
        _ => EXIT_USAGE,
    }
}

fn model_code(e: &ModelError) -> u8 {
    match e {
        ModelError::Config(_) | ModelError::Tree(_) | ModelError::EmptyEntity(_) => EXIT_USAGE,
        ModelError::Tensor(_) | ModelError::Checkpoint(_) => EXIT_RUNTIME,
    }
}

fn train_code(e: &TrainError) -> u8 {
    match e {
        TrainError::Config(_)
        | TrainError::EmptyTrainingSet
        | TrainError::UnknownLabel(_)
        | TrainError::Mismatch(_)
        | TrainError::Runs { .. } => EXIT_USAGE,
        TrainError::NonFinite { .. } | TrainError::Predictions(_) | TrainError::Io { .. } => EXIT_RUNTIME,
        TrainError::Data(d) => data_code(d),
        TrainError::Model(m) => model_code(m),
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError { code: data_code(&e), error: e.into() }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError { code: model_code(&e), error: e.into() }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        CliError { code: train_code(&e), error: e.into() }
    }
}

impl From<CheckpointError> for CliError {
    fn from(e: CheckpointError) -> Self {
        CliError::runtime(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::runtime(e)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::runtime(e)
    }
}
