use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::tree::PruneK;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Graph convolution over projected input embeddings.
    Gcn,
    /// Graph convolution over full-sentence BiLSTM states.
    #[default]
    Cgcn,
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "gcn" => Ok(Variant::Gcn),
            "cgcn" | "c-gcn" => Ok(Variant::Cgcn),
            _ => Err(format!("unknown model variant {s:?}: expected gcn or cgcn")),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Gcn => "gcn",
            Variant::Cgcn => "cgcn",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub variant: Variant,
    pub word_dim: usize,
    pub pos_dim: usize,
    pub ner_dim: usize,
    /// Total BiLSTM output width; each direction gets half.
    pub lstm_hidden: usize,
    pub gcn_layers: usize,
    pub gcn_hidden: usize,
    pub ffnn_layers: usize,
    pub ffnn_hidden: usize,
    pub dropout: f64,
    /// Weight of the squared norm of the pooled sentence vector in the loss.
    pub beta: f64,
    pub prune_k: PruneK,
    /// Classify from `[h_sent; h_s; h_o]`; when false only `h_sent` is used.
    pub use_entity_pool: bool,
    /// Use dependency edges; when false the graph is the identity.
    pub use_dependency: bool,
    pub trainable_embeddings: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            variant: Variant::Cgcn,
            word_dim: 300,
            pos_dim: 30,
            ner_dim: 30,
            lstm_hidden: 200,
            gcn_layers: 2,
            gcn_hidden: 200,
            ffnn_layers: 2,
            ffnn_hidden: 200,
            dropout: 0.5,
            beta: 0.003,
            prune_k: PruneK::Dist(1),
            use_entity_pool: true,
            use_dependency: true,
            trainable_embeddings: true,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let dims = [
            ("word_dim", self.word_dim),
            ("pos_dim", self.pos_dim),
            ("ner_dim", self.ner_dim),
            ("gcn_layers", self.gcn_layers),
            ("gcn_hidden", self.gcn_hidden),
            ("ffnn_hidden", self.ffnn_hidden),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(ModelError::Config(format!("{name} must be at least 1")));
            }
        }
        if self.variant == Variant::Cgcn && (self.lstm_hidden < 2 || !self.lstm_hidden.is_multiple_of(2)) {
            return Err(ModelError::Config(format!(
                "lstm_hidden must be a positive even total width, got {}",
                self.lstm_hidden
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(ModelError::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(ModelError::Config(format!("beta {} must be non-negative", self.beta)));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.word_dim + self.pos_dim + self.ner_dim
    }

    pub fn lstm_per_direction(&self) -> usize {
        self.lstm_hidden / 2
    }

    /// Width of the representation fed into the first graph convolution.
    pub fn gcn_input_dim(&self) -> usize {
        match self.variant {
            Variant::Cgcn => self.lstm_hidden,
            Variant::Gcn => self.gcn_hidden,
        }
    }

    /// Small dimensions for tests, gradient checks and demos.
    pub fn tiny(variant: Variant) -> Self {
        ModelConfig {
            variant,
            word_dim: 8,
            pos_dim: 3,
            ner_dim: 3,
            lstm_hidden: 8,
            gcn_hidden: 8,
            ffnn_hidden: 8,
            ..ModelConfig::default()
        }
    }
}
