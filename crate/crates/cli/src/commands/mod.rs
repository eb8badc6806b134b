mod data;
mod ensemble;
mod gradcheck;
mod inference;
mod training;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::anyhow;
use relgcn::data::load_examples;
use relgcn::model::load_checkpoint;
use relgcn::{DatasetFormat, Example, Model, ModelConfig, PruneK};
use serde::Serialize;

use crate::args::{InputArgs, ModelArgs};
use crate::error::{CliError, CliResult};

pub use data::{prune, stats};
pub use ensemble::interpolate;
pub use gradcheck::gradcheck;
pub use inference::{eval, explain, predict};
pub use training::train;

pub fn load_input(input: &InputArgs) -> CliResult<Vec<Example>> {
    let format = if input.conllu {
        match (input.subj, input.obj) {
            (Some(s), Some(o)) => DatasetFormat::Conllu { subj: s.0, obj: o.0 },
            _ => return Err(CliError::usage(anyhow!("--conllu needs --subj and --obj"))),
        }
    } else {
        if input.subj.is_some() || input.obj.is_some() {
            return Err(CliError::usage(anyhow!("--subj and --obj only apply to --conllu input")));
        }
        DatasetFormat::Jsonl
    };
    load_dataset(&input.data, format)
}

pub fn load_dataset(path: &Path, format: DatasetFormat) -> CliResult<Vec<Example>> {
    load_examples(path, format).map_err(|e| CliError::from(e).context(format!("reading {}", path.display())))
}

pub fn load_model(path: &Path) -> CliResult<Model> {
    load_checkpoint(path).map_err(|e| CliError::from(e).context(format!("loading checkpoint {}", path.display())))
}

/// `base` with every set flag applied.
pub fn model_config(base: ModelConfig, m: &ModelArgs, k: Option<PruneK>) -> ModelConfig {
    let mut c = base;
    if let Some(v) = m.model {
        c.variant = v;
    }
    let dims = [
        (m.word_dim, &mut c.word_dim),
        (m.pos_dim, &mut c.pos_dim),
        (m.ner_dim, &mut c.ner_dim),
        (m.lstm_hidden, &mut c.lstm_hidden),
        (m.gcn_layers, &mut c.gcn_layers),
        (m.gcn_hidden, &mut c.gcn_hidden),
        (m.ffnn_layers, &mut c.ffnn_layers),
        (m.ffnn_hidden, &mut c.ffnn_hidden),
    ];
    for (flag, field) in dims {
        if let Some(v) = flag {
            *field = v;
        }
    }
    if let Some(v) = m.dropout {
        c.dropout = v;
    }
    if let Some(v) = m.beta {
        c.beta = v;
    }
    if let Some(k) = k {
        c.prune_k = k;
    }
    c.use_entity_pool &= !m.no_entity_pool;
    c.use_dependency &= !m.no_dependency;
    c.trainable_embeddings &= !m.freeze_embeddings;
    c
}

/// Buffered writer on `path`, or stdout.
pub fn output(path: Option<&PathBuf>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            let f = File::create(p).map_err(|e| CliError::runtime(anyhow!("{}: {e}", p.display())))?;
            Box::new(BufWriter::new(f))
        }
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

pub fn write_json_line<T: Serialize>(w: &mut dyn Write, value: &T) -> CliResult<()> {
    serde_json::to_writer(&mut *w, value)?;
    w.write_all(b"\n")?;
    Ok(())
}

/// Pretty JSON document on stdout.
pub fn print_json<T: Serialize>(value: &T) -> CliResult<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

/// Error naming the first example whose label the checkpoint does not know.
pub fn unknown_label(model: &Model, examples: &[Example]) -> CliResult<()> {
    match examples.iter().find(|e| model.vocab.label_id(&e.relation).is_none()) {
        Some(e) => Err(CliError::usage(anyhow!(
            "example {}: label {:?} is not in the checkpoint's label set",
            e.id,
            e.relation
        ))),
        None => Ok(()),
    }
}
