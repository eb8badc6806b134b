use anyhow::anyhow;
use relgcn::train::{evaluate_micro, interpolate as mix, tune_alpha};
use relgcn::{DatasetFormat, PredictionSet};
use serde::Serialize;

use super::{load_dataset, print_json};
use crate::args::InterpolateArgs;
use crate::error::{CliError, CliResult};

#[derive(Serialize)]
struct Scores {
    precision: f64,
    recall: f64,
    f1: f64,
    macro_f1: f64,
}

#[derive(Serialize)]
struct InterpolateReport {
    alpha: f64,
    examples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    tuned_score: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    metrics: Option<Scores>,
}

fn load(path: &std::path::Path) -> CliResult<PredictionSet> {
    PredictionSet::load(path).map_err(|e| CliError::from(e).context(format!("reading {}", path.display())))
}

pub fn interpolate(args: &InterpolateArgs) -> CliResult<()> {
    let a = load(&args.first)?;
    let b = load(&args.second)?;
    if a.labels != b.labels {
        return Err(CliError::usage(anyhow!("prediction files have different label lists")));
    }
    let gold: Option<Vec<(String, String)>> = match &args.gold {
        Some(p) => Some(load_dataset(p, DatasetFormat::Jsonl)?.into_iter().map(|e| (e.id, e.relation)).collect()),
        None => None,
    };
    let (alpha, tuned_score) = match (args.alpha, &gold) {
        (Some(alpha), _) => (alpha, None),
        (None, Some(g)) => {
            let (alpha, s) = tune_alpha(&a, &b, g, &args.negative_label, args.metric, args.step)?;
            eprintln!("chose alpha {alpha} ({} {s:.4})", args.metric);
            (alpha, Some(s))
        }
        (None, None) => return Err(CliError::usage(anyhow!("give --alpha, or --tune with --gold"))),
    };
    let mixed = mix(&a, &b, alpha)?;
    mixed.save(&args.out)?;

    let metrics = match &gold {
        Some(g) => {
            let negative = mixed
                .labels
                .iter()
                .position(|l| *l == args.negative_label)
                .ok_or_else(|| CliError::usage(anyhow!("negative label {:?} not in prediction labels", args.negative_label)))?;
            let (pred, golds) = mixed.align(g)?;
            let m = evaluate_micro(&pred, &golds, &mixed.labels, negative, None)?;
            Some(Scores { precision: m.precision, recall: m.recall, f1: m.f1, macro_f1: m.macro_f1 })
        }
        None => None,
    };
    print_json(&InterpolateReport { alpha, examples: mixed.len(), tuned_score, metrics })
}
