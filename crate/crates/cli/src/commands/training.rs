use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::sync::Mutex;

use anyhow::anyhow;
use relgcn::data::{glove_words, load_glove};
use relgcn::model::save_checkpoint;
use relgcn::train::{build_vocab, dev_score, init_model, run_median_protocol, train_with, write_history, RunSummary};
use relgcn::{DatasetFormat, Example, ModelConfig, TrainConfig, TrainError, TrainOutcome, VocabOptions};
use serde::Serialize;

use super::{load_dataset, load_input, model_config, print_json};
use crate::args::TrainArgs;
use crate::error::{CliError, CliResult};

fn train_config(a: &TrainArgs) -> TrainConfig {
    let mut c = TrainConfig::default();
    if let Some(v) = a.seed {
        c.seed = v;
    }
    if let Some(v) = a.epochs {
        c.epochs = v;
    }
    if let Some(v) = a.lr {
        c.lr = v;
    }
    if let Some(v) = a.decay {
        c.decay = v;
    }
    if let Some(v) = a.anneal_from {
        c.anneal_from_epoch = v;
    }
    if let Some(v) = a.batch_size {
        c.batch_size = v;
    }
    if let Some(v) = a.max_grad_norm {
        c.max_grad_norm = v;
    }
    if let Some(v) = a.metric {
        c.metric = v;
    }
    c
}

#[derive(Serialize)]
struct TrainReport {
    seed: u64,
    best_epoch: usize,
    best_dev_f1: Option<f64>,
    test_f1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    runs: Option<Vec<RunSummary>>,
}

pub fn train(args: &TrainArgs) -> CliResult<()> {
    if args.runs > 1 && !args.median {
        return Err(CliError::usage(anyhow!("--runs needs --median")));
    }
    let model_cfg = model_config(ModelConfig::default(), &args.model, args.k);
    model_cfg.validate()?;
    let base = train_config(args);
    base.validate()?;
    let mask = args.mask.unwrap_or_default();

    let train_set = load_input(&args.input)?;
    let load_opt = |p: &Option<std::path::PathBuf>| -> CliResult<Vec<Example>> {
        match p {
            Some(p) => load_dataset(p, DatasetFormat::Jsonl),
            None => Ok(Vec::new()),
        }
    };
    let dev_set = load_opt(&args.dev)?;
    let test_set = load_opt(&args.test)?;

    let pretrained = match &args.glove {
        Some(p) => Some(glove_words(p)?),
        None => None,
    };
    let options = VocabOptions { min_freq: args.min_freq, negative_label: args.negative_label.clone(), pretrained };
    let vocab = build_vocab(&train_set, &[&dev_set, &test_set], mask, &options)?;
    let word_vectors = match &args.glove {
        Some(p) => Some(load_glove(p, &vocab, model_cfg.word_dim, base.seed)?),
        None => None,
    };

    let template = init_model(model_cfg.clone(), vocab.clone(), mask, None, base.seed)?;
    let train_p = template.prepare_all(&train_set)?;
    let dev_p = template.prepare_all(&dev_set)?;
    let test_p = template.prepare_all(&test_set)?;

    let run_one = |seed: u64| -> Result<(TrainOutcome, Option<f64>), TrainError> {
        let cfg = TrainConfig { seed, ..base.clone() };
        let model = init_model(model_cfg.clone(), vocab.clone(), mask, word_vectors.clone(), seed)?;
        let quiet = args.quiet;
        let outcome = train_with(model, &train_p, &dev_p, &cfg, |r| {
            if !quiet {
                let dev = r.dev_f1.map_or(String::new(), |f| format!(" dev {f:.4}"));
                eprintln!("seed {seed} epoch {} lr {:.4} loss {:.6}{dev}", r.epoch, r.lr, r.train_loss);
            }
        })?;
        let test = if test_p.is_empty() { None } else { Some(dev_score(&outcome.model, &test_p, &cfg)?) };
        Ok((outcome, test))
    };

    let (seed, outcome, test_f1, runs) = if args.median {
        let seeds: Vec<u64> = (0..args.runs as u64).map(|i| base.seed + i).collect();
        let finished = Mutex::new(BTreeMap::new());
        let (chosen, runs) = run_median_protocol(&seeds, args.runs, |seed| {
            let (outcome, test) = run_one(seed)?;
            let summary = RunSummary { seed, dev_f1: outcome.best_dev_f1.unwrap_or(f64::NAN), test_f1: test };
            finished.lock().expect("run table").insert(seed, (outcome, test));
            Ok(summary)
        })?;
        let seed = runs[chosen].seed;
        let (outcome, test) = finished.into_inner().expect("run table").remove(&seed).expect("chosen run finished");
        (seed, outcome, test, Some(runs))
    } else {
        let (outcome, test) = run_one(base.seed)?;
        (base.seed, outcome, test, None)
    };

    save_checkpoint(&outcome.model, &args.checkpoint)?;
    if let Some(path) = &args.history {
        let f = File::create(path).map_err(|e| CliError::runtime(anyhow!("{}: {e}", path.display())))?;
        write_history(&outcome.history, BufWriter::new(f))?;
    }
    print_json(&TrainReport { seed, best_epoch: outcome.best_epoch, best_dev_f1: outcome.best_dev_f1, test_f1, runs })
}
