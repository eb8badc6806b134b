//! Dense tensors, a reverse-mode tape, named parameters, gradient checking
//! and the clipped SGD update.

mod array;
mod gradcheck;
mod params;
mod tape;

pub use array::Tensor;
pub use gradcheck::{grad_check, relative_error, GradCheckOptions, GradCheckReport, GroupError};
pub use params::{Gradients, Param, ParamId, ParamStore};
pub use tape::{softmax_rows, GraphBlock, Tape, Var};

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TensorError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("rank {0} exceeds 3")]
    Rank(usize),
    #[error("shape {shape:?} needs {} values, got {len}", shape.iter().product::<usize>())]
    DataLength { shape: Vec<usize>, len: usize },
    #[error("non-finite value produced by {0}")]
    NonFinite(String),
    #[error("max pooling over an empty row set")]
    EmptyPool,
    #[error("loss must be a scalar, got shape {0:?}")]
    NotScalar(Vec<usize>),
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("unknown parameter {0}")]
    UnknownParam(String),
    #[error("duplicate parameter {0}")]
    DuplicateParam(String),
    #[error("loss builder is not deterministic: {first} then {second}")]
    NonDeterministic { first: f64, second: f64 },
}

/// Fills a `rows x cols` matrix uniformly on `±sqrt(6 / (rows + cols))`.
pub fn glorot_uniform<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Tensor {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.gen_range(-bound..=bound)).collect();
    Tensor::new(&[rows, cols], data).expect("shape matches data")
}
