use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use relgcn::{MaskMode, Metric, PruneK, Variant};

#[derive(Debug, Parser)]
#[command(name = "relgcn", version, about = "Relation extraction with graph convolution over pruned dependency trees")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Report the path-centric pruning of every example.
    Prune(PruneArgs),
    /// Dataset statistics.
    Stats(StatsArgs),
    /// Train a model and write a checkpoint.
    Train(TrainArgs),
    /// Score a checkpoint on labeled data.
    Eval(EvalArgs),
    /// Write class probabilities for every example.
    Predict(PredictArgs),
    /// Mix two prediction files.
    Interpolate(InterpolateArgs),
    /// Token contributions and top dependency edges per relation.
    Explain(ExplainArgs),
    /// Finite-difference check of the full model gradient.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON file of default flag values; keys are flag names without dashes.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

/// 1-based inclusive token range, `START:END` or a single index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TokenRange(pub relgcn::Span);

impl std::str::FromStr for TokenRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s.split_once(':').unwrap_or((s, s));
        let parse = |t: &str| t.trim().parse::<usize>().map_err(|_| format!("invalid token range {s:?}: expected START:END"));
        let (start, end) = (parse(a)?, parse(b)?);
        if start == 0 || end < start {
            return Err(format!("invalid token range {s:?}: need 1 <= START <= END"));
        }
        Ok(TokenRange(relgcn::Span::new(start - 1, end - 1)))
    }
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Dataset file (JSONL, or CoNLL-U with --conllu).
    #[arg(long, value_name = "FILE")]
    pub data: PathBuf,
    /// Read --data as CoNLL-U; entity spans come from --subj and --obj.
    #[arg(long, requires_all = ["subj", "obj"])]
    pub conllu: bool,
    /// Subject token range for CoNLL-U input (1-based, START:END).
    #[arg(long, value_name = "RANGE")]
    pub subj: Option<TokenRange>,
    /// Object token range for CoNLL-U input (1-based, START:END).
    #[arg(long, value_name = "RANGE")]
    pub obj: Option<TokenRange>,
}

#[derive(Debug, Args)]
pub struct PruneArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub input: InputArgs,
    /// Pruning distances: integers, inf or full.
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,inf,full")]
    pub k: Vec<PruneK>,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub input: InputArgs,
    /// Also report the mean kept fraction for these pruning distances.
    #[arg(long, value_delimiter = ',')]
    pub k: Vec<PruneK>,
}

#[derive(Debug, Args, Clone, Default)]
pub struct ModelArgs {
    #[arg(long, value_name = "gcn|cgcn")]
    pub model: Option<Variant>,
    #[arg(long, value_name = "N")]
    pub word_dim: Option<usize>,
    #[arg(long, value_name = "N")]
    pub pos_dim: Option<usize>,
    #[arg(long, value_name = "N")]
    pub ner_dim: Option<usize>,
    /// Total BiLSTM width (both directions).
    #[arg(long, value_name = "N")]
    pub lstm_hidden: Option<usize>,
    #[arg(long, value_name = "N")]
    pub gcn_layers: Option<usize>,
    #[arg(long, value_name = "N")]
    pub gcn_hidden: Option<usize>,
    #[arg(long, value_name = "N")]
    pub ffnn_layers: Option<usize>,
    #[arg(long, value_name = "N")]
    pub ffnn_hidden: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
    /// Weight of the pooled-vector norm penalty.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Classify from the sentence vector only.
    #[arg(long)]
    pub no_entity_pool: bool,
    /// Ignore dependency edges.
    #[arg(long)]
    pub no_dependency: bool,
    #[arg(long)]
    pub freeze_embeddings: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_name = "FILE")]
    pub dev: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub test: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Pruning distance: an integer, inf or full.
    #[arg(long)]
    pub k: Option<PruneK>,
    #[arg(long, value_name = "typed|unk|none")]
    pub mask: Option<MaskMode>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub decay: Option<f64>,
    /// First epoch at which the learning rate may decay.
    #[arg(long, value_name = "EPOCH")]
    pub anneal_from: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub max_grad_norm: Option<f64>,
    /// Dev metric used for model selection.
    #[arg(long, value_name = "micro|macro")]
    pub metric: Option<Metric>,
    #[arg(long, default_value_t = 1)]
    pub min_freq: usize,
    #[arg(long, default_value = "no_relation")]
    pub negative_label: String,
    /// Pretrained word vectors (whitespace-separated text).
    #[arg(long, value_name = "FILE")]
    pub glove: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub checkpoint: PathBuf,
    /// Per-epoch history (JSONL).
    #[arg(long, value_name = "FILE")]
    pub history: Option<PathBuf>,
    /// Number of seeds to train (seed, seed+1, ...).
    #[arg(long, default_value_t = 1)]
    pub runs: usize,
    /// Keep the run with the median dev score.
    #[arg(long, requires = "dev")]
    pub median: bool,
    /// No per-epoch progress on stderr.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_name = "FILE")]
    pub checkpoint: PathBuf,
    /// Add scores per entity-distance bucket.
    #[arg(long)]
    pub buckets: bool,
    #[arg(long, default_value_t = 50)]
    pub batch_size: usize,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_name = "FILE")]
    pub checkpoint: PathBuf,
    #[arg(long, default_value_t = 50)]
    pub batch_size: usize,
    /// Prediction file; stdout when absent.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InterpolateArgs {
    #[command(flatten)]
    pub common: Common,
    /// First prediction file (weight alpha).
    #[arg(value_name = "A")]
    pub first: PathBuf,
    /// Second prediction file (weight 1 - alpha).
    #[arg(value_name = "B")]
    pub second: PathBuf,
    #[arg(long, required_unless_present = "tune", conflicts_with = "tune")]
    pub alpha: Option<f64>,
    /// Choose alpha on a grid by the score against --gold.
    #[arg(long, requires = "gold")]
    pub tune: bool,
    /// Labeled dataset supplying gold labels by id.
    #[arg(long, value_name = "FILE")]
    pub gold: Option<PathBuf>,
    #[arg(long, default_value_t = 0.05)]
    pub step: f64,
    #[arg(long, default_value = "micro", value_name = "micro|macro")]
    pub metric: Metric,
    #[arg(long, default_value = "no_relation")]
    pub negative_label: String,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_name = "FILE")]
    pub checkpoint: PathBuf,
    /// Edges reported per relation.
    #[arg(long, default_value_t = 3)]
    pub top_k: usize,
    #[arg(long)]
    pub keep_punctuation: bool,
    #[arg(long)]
    pub keep_prepositions: bool,
    #[arg(long)]
    pub keep_intra_entity: bool,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[command(flatten)]
    pub common: Common,
    /// Model dimensions; unset ones use small defaults.
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub k: Option<PruneK>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Sentence length of the random example.
    #[arg(long, default_value_t = 7)]
    pub tokens: usize,
    #[arg(long, default_value_t = 1e-5)]
    pub eps: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub threshold: f64,
    /// Perturb one analytic gradient entry so the check must fail.
    #[arg(long)]
    pub corrupt: bool,
}
