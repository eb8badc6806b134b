//! Training loop, evaluation metrics, the median-of-runs protocol and
//! prediction interpolation.

mod config;
mod median;
mod metrics;
mod predictions;
mod synthetic;
mod trainer;

use thiserror::Error;

pub use config::{LrSchedule, Metric, TrainConfig};
pub use median::{run_median_protocol, select_median, RunSummary};
pub use metrics::{
    bucket_name, bucket_of, evaluate_macro, evaluate_micro, f1_score, relation_type, score, BucketMetrics, ClassCounts,
    Metrics, DISTANCE_BUCKETS,
};
pub use predictions::{interpolate, tune_alpha, PredictionSet};
pub use synthetic::{synthetic_dataset, SYNTHETIC_LABELS};
pub use trainer::{
    build_vocab, init_model, dev_score, predict_labels, train, train_with, write_history, EpochRecord, TrainOutcome, TRAIN_STREAM};

use crate::data::DataError;
use crate::model::ModelError;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("non-finite value in epoch {epoch}, batch {batch}: {what}")]
    NonFinite { epoch: usize, batch: usize, what: String },
    #[error("unknown label: {0}")]
    UnknownLabel(String),
    #[error("mismatched inputs: {0}")]
    Mismatch(String),
    #[error("expected {expected} runs, got {found}")]
    Runs { expected: usize, found: usize },
    #[error("invalid prediction file: {0}")]
    Predictions(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Model(#[from] ModelError),
}
