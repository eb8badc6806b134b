use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::TrainError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Micro,
    Macro,
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "micro" => Ok(Metric::Micro),
            "macro" => Ok(Metric::Macro),
            _ => Err(format!("unknown metric {s:?}: expected micro or macro")),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Micro => "micro",
            Metric::Macro => "macro",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub decay: f64,
    /// First epoch (1-based) at which a non-improving dev score decays the
    /// learning rate.
    pub anneal_from_epoch: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub metric: Metric,
    pub max_grad_norm: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            lr: 1.0,
            decay: 0.9,
            anneal_from_epoch: 5,
            batch_size: 50,
            seed: 1234,
            metric: Metric::Micro,
            max_grad_norm: 5.0,
        }
    }
}

impl TrainConfig {
    /// Schedule used for SemEval-style data.
    pub fn semeval() -> Self {
        TrainConfig { epochs: 150, lr: 0.5, decay: 0.95, metric: Metric::Macro, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        if self.epochs == 0 {
            return Err(TrainError::Config("epochs must be at least 1".into()));
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return Err(TrainError::Config(format!("decay {} outside (0, 1]", self.decay)));
        }
        if self.batch_size == 0 {
            return Err(TrainError::Config("batch_size must be at least 1".into()));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(TrainError::Config(format!("learning rate {} must be non-negative", self.lr)));
        }
        if !(self.max_grad_norm > 0.0) {
            return Err(TrainError::Config(format!("max_grad_norm {} must be positive", self.max_grad_norm)));
        }
        Ok(())
    }
}

/// Learning-rate annealing on a plateauing dev score.
#[derive(Debug, Clone, PartialEq)]
pub struct LrSchedule {
    lr: f64,
    decay: f64,
    anneal_from_epoch: usize,
    best: Option<f64>,
}

impl LrSchedule {
    pub fn new(config: &TrainConfig) -> Self {
        LrSchedule { lr: config.lr, decay: config.decay, anneal_from_epoch: config.anneal_from_epoch, best: None }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    /// Records the dev score of 1-based `epoch`. Returns true if it is a new
    /// best; otherwise decays the rate once annealing is active.
    pub fn observe(&mut self, epoch: usize, score: f64) -> bool {
        let improved = self.best.is_none_or(|b| score > b);
        if improved {
            self.best = Some(score);
        } else if epoch >= self.anneal_from_epoch {
            self.lr *= self.decay;
        }
        improved
    }
}
