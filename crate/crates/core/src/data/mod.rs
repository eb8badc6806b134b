//! Loading, validation, entity masking and indexing of relation examples,
//! plus pretrained word vectors.

mod conllu;
mod embedding;
mod example;
mod vocab;

use std::path::PathBuf;

use thiserror::Error;

use crate::tree::TreeError;

pub use conllu::parse_conllu;
pub use embedding::{glove_words, load_glove, random_embeddings, read_glove};
pub use example::{
    load_examples, mask_entities, obj_mask_token, parse_jsonl, subj_mask_token, DatasetFormat, Example, MaskMode,
    PAD_TOKEN, UNK_TOKEN,
};
pub use vocab::{encode, encode_unlabeled, IndexedExample, SymbolTable, Vocab, VocabOptions, PAD_ID, UNK_ID};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}, field {field}: {message}")]
    Parse { line: usize, field: String, message: String },
    #[error("example {id}: {reason}")]
    InvalidExample { id: String, reason: String },
    #[error("example {id}: {source}")]
    InvalidTree {
        id: String,
        #[source]
        source: TreeError,
    },
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("label {0:?} is not in the label set")]
    UnknownLabel(String),
    #[error("embedding line {line}: expected {expected} values, found {found}")]
    EmbeddingDim { line: usize, expected: usize, found: usize },
    #[error("embedding line {line}: {message}")]
    Embedding { line: usize, message: String },
}
