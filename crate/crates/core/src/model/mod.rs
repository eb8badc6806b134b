//! GCN and C-GCN relation classifiers: parameters, forward pass, loss,
//! batched prediction, pooling-based explanations and checkpoints.

mod check;
mod checkpoint;
mod config;
mod explain;
mod network;

use thiserror::Error;

pub use check::{check_model_gradients, random_example, ModelCheck};
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CheckpointError, MAGIC};
pub use config::{ModelConfig, Variant};
pub use explain::{edge_scores, token_contributions, EdgeFilters, EdgeScore, EdgeTally};
pub use network::{
    contextualize, encode_gcn, forward, gcn_layer, graph_blocks, init_params, loss, lstm_direction, param_shapes,
    pool_and_classify, Forward, LstmParams, PoolTrace, PreparedExample,
};

use crate::data::{encode_unlabeled, mask_entities, Example, IndexedExample, MaskMode, Vocab};
use crate::rng::RunRng;
use crate::tensor::{softmax_rows, ParamStore, Tape, Tensor, TensorError};
use crate::tree::TreeError;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error("example {0}: an entity has no tokens left after pruning")]
    EmptyEntity(String),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
}

/// A trained (or freshly initialized) classifier with everything needed to
/// index new data.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub vocab: Vocab,
    pub mask: MaskMode,
    pub params: ParamStore,
}

/// Per-example output of [`Model::explain`].
#[derive(Debug, Clone)]
pub struct Explanation {
    pub prepared: PreparedExample,
    pub probs: Vec<f64>,
    pub trace: PoolTrace,
    /// Pooled dimensions won by each sentence token.
    pub contributions: Vec<usize>,
}

impl Model {
    pub fn init(
        config: ModelConfig,
        vocab: Vocab,
        mask: MaskMode,
        word_vectors: Option<Tensor>,
        rng: &mut RunRng,
    ) -> Result<Self, ModelError> {
        let sizes = (vocab.words.len(), vocab.pos.len(), vocab.ner.len(), vocab.labels().len());
        let params = init_params(&config, sizes, word_vectors, rng)?;
        Ok(Model { config, vocab, mask, params })
    }

    pub fn num_labels(&self) -> usize {
        self.vocab.labels().len()
    }

    /// Masks and indexes a raw example; unknown labels become `None`.
    pub fn index(&self, ex: &Example) -> IndexedExample {
        encode_unlabeled(&mask_entities(ex, self.mask), &self.vocab)
    }

    pub fn prepare(&self, ex: IndexedExample) -> Result<PreparedExample, ModelError> {
        PreparedExample::new(ex, &self.config)
    }

    pub fn prepare_all(&self, examples: &[Example]) -> Result<Vec<PreparedExample>, ModelError> {
        examples.iter().map(|e| self.prepare(self.index(e))).collect()
    }

    /// Evaluation-mode class probabilities for one padded batch.
    pub fn predict_batch(&self, batch: &[&PreparedExample]) -> Result<Tensor, ModelError> {
        let mut tape = Tape::new(&self.params);
        let out = forward(&mut tape, &self.config, batch, None)?;
        Ok(softmax_rows(tape.value(out.logits)))
    }

    /// Probabilities for every example, evaluated in padded batches of
    /// `batch_size`.
    pub fn predict_proba(&self, examples: &[PreparedExample], batch_size: usize) -> Result<Vec<Vec<f64>>, ModelError> {
        let mut out = Vec::with_capacity(examples.len());
        for chunk in examples.chunks(batch_size.max(1)) {
            let refs: Vec<&PreparedExample> = chunk.iter().collect();
            let probs = self.predict_batch(&refs)?;
            out.extend((0..probs.rows()).map(|r| probs.row(r).to_vec()));
        }
        Ok(out)
    }

    pub fn explain(&self, prepared: PreparedExample) -> Result<Explanation, ModelError> {
        let mut tape = Tape::new(&self.params);
        let out = forward(&mut tape, &self.config, &[&prepared], None)?;
        let probs = softmax_rows(tape.value(out.logits)).row(0).to_vec();
        let trace = out.traces.into_iter().next().expect("one trace per example");
        let contributions = token_contributions(&trace, prepared.example.len());
        Ok(Explanation { prepared, probs, trace, contributions })
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}
