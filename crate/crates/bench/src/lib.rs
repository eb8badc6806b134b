//! Shared fixtures for the criterion benches.

use relgcn::data::VocabOptions;
use relgcn::train::{build_vocab, init_model, synthetic_dataset};
use relgcn::{MaskMode, Model, ModelConfig, PreparedExample, PruneK, Variant};

/// Mid-sized configuration: large enough that matrix work dominates.
pub fn bench_config(variant: Variant, k: PruneK) -> ModelConfig {
    ModelConfig {
        variant,
        word_dim: 100,
        pos_dim: 30,
        ner_dim: 30,
        lstm_hidden: 100,
        gcn_hidden: 100,
        ffnn_hidden: 100,
        dropout: 0.5,
        prune_k: k,
        ..ModelConfig::default()
    }
}

/// A model over `count` synthetic examples, plus those examples prepared.
pub fn model_and_batch(config: ModelConfig, count: usize) -> (Model, Vec<PreparedExample>) {
    let data = synthetic_dataset(count, 17);
    let vocab = build_vocab(&data, &[], MaskMode::Typed, &VocabOptions::default()).expect("synthetic data builds a vocabulary");
    let model = init_model(config, vocab, MaskMode::Typed, None, 1).expect("valid config");
    let prepared = model.prepare_all(&data).expect("synthetic examples are valid");
    (model, prepared)
}
