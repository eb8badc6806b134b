use relgcn::data::mask_entities;
use relgcn::model::{edge_scores, EdgeFilters, EdgeTally};
use relgcn::train::{evaluate_micro, predict_labels, BucketMetrics};
use relgcn::{Example, MaskMode, PredictionSet};
use serde::Serialize;

use super::{load_input, load_model, output, print_json, unknown_label, write_json_line};
use crate::args::{EvalArgs, ExplainArgs, PredictArgs};
use crate::error::CliResult;

#[derive(Serialize)]
struct EvalReport {
    examples: usize,
    precision: f64,
    recall: f64,
    f1: f64,
    macro_f1: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    buckets: Option<Vec<BucketMetrics>>,
}

pub fn eval(args: &EvalArgs) -> CliResult<()> {
    let model = load_model(&args.checkpoint)?;
    let examples = load_input(&args.input)?;
    unknown_label(&model, &examples)?;
    let prepared = model.prepare_all(&examples)?;
    let gold: Vec<usize> = prepared.iter().map(|p| p.example.label.expect("labels checked")).collect();
    let pred = predict_labels(&model, &prepared, args.batch_size)?;
    let distances: Vec<usize> = examples.iter().map(Example::entity_distance).collect();
    let m = evaluate_micro(
        &pred,
        &gold,
        model.vocab.labels(),
        model.vocab.negative_id(),
        args.buckets.then_some(distances.as_slice()),
    )?;
    print_json(&EvalReport {
        examples: examples.len(),
        precision: m.precision,
        recall: m.recall,
        f1: m.f1,
        macro_f1: m.macro_f1,
        buckets: m.buckets,
    })
}

pub fn predict(args: &PredictArgs) -> CliResult<()> {
    let model = load_model(&args.checkpoint)?;
    let examples = load_input(&args.input)?;
    let prepared = model.prepare_all(&examples)?;
    let probs = model.predict_proba(&prepared, args.batch_size)?;
    let rows = examples.iter().map(|e| e.id.clone()).zip(probs).collect();
    let set = PredictionSet::new(model.vocab.labels().to_vec(), rows)?;
    let mut out = output(args.out.as_ref())?;
    set.write(&mut out)?;
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct TokenReport<'a> {
    index: usize,
    token: &'a str,
    contribution: usize,
    kept: bool,
}

#[derive(Serialize)]
struct ExampleReport<'a> {
    id: &'a str,
    predicted: &'a str,
    tokens: Vec<TokenReport<'a>>,
}

#[derive(Serialize)]
struct RankedEdge {
    edge: String,
    score: usize,
}

pub fn explain(args: &ExplainArgs) -> CliResult<()> {
    let model = load_model(&args.checkpoint)?;
    let examples = load_input(&args.input)?;
    let filters = EdgeFilters {
        punctuation: !args.keep_punctuation,
        prepositions: !args.keep_prepositions,
        intra_entity: !args.keep_intra_entity,
    };
    let display_mask = if model.mask == MaskMode::None { MaskMode::None } else { MaskMode::Typed };
    let mut tally = EdgeTally::default();
    let mut out = output(args.out.as_ref())?;
    for ex in &examples {
        let explanation = model.explain(model.prepare(model.index(ex))?)?;
        let p = &explanation.prepared;
        let predicted = &model.vocab.labels()[relgcn::model::argmax(&explanation.probs)];
        let tokens = ex
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| TokenReport {
                index: i + 1,
                token: t,
                contribution: explanation.contributions[i],
                kept: p.prune.kept.contains(&i),
            })
            .collect();
        write_json_line(&mut out, &ExampleReport { id: &ex.id, predicted, tokens })?;

        if ex.relation != model.vocab.negative_label() && model.vocab.label_id(&ex.relation).is_some() {
            let display = mask_entities(ex, display_mask).tokens;
            let edges = edge_scores(&p.tree, &p.prune, &explanation.contributions, &display, ex.subj, ex.obj, filters);
            tally.add(&ex.relation, &edges);
        }
    }
    let top: std::collections::BTreeMap<&str, Vec<RankedEdge>> = tally
        .relations()
        .map(|r| {
            let edges = tally.top_k(r, args.top_k).into_iter().map(|(edge, score)| RankedEdge { edge, score }).collect();
            (r, edges)
        })
        .collect();
    write_json_line(&mut out, &serde_json::json!({ "top_edges": top }))?;
    out.flush()?;
    Ok(())
}
