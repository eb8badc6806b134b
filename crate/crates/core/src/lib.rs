//! Relation extraction with graph convolutions over pruned dependency trees.
//!
//! The crate is organised bottom-up: [`tree`] validates parses and prunes
//! them around the entity path, [`tensor`] is a small reverse-mode autodiff
//! engine, [`data`] loads and indexes examples, [`model`] holds the GCN and
//! C-GCN classifiers, and [`train`] covers optimisation, metrics and
//! prediction files.

pub mod data;
pub mod model;
pub mod rng;
pub mod tensor;
pub mod train;
pub mod tree;

pub use data::{DatasetFormat, Example, MaskMode, Vocab, VocabOptions};
pub use model::{Model, ModelConfig, ModelError, PreparedExample, Variant};
pub use tree::{DepTree, PruneK, PruneResult, Span, TreeError};
pub use train::{Metric, Metrics, PredictionSet, TrainConfig, TrainError, TrainOutcome};
