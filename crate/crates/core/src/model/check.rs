//! Finite-difference check of the full classifier on a random sentence.

use rand::seq::SliceRandom;
use rand::Rng;

use super::{forward, init_params, loss, ModelConfig, ModelError, PreparedExample};
use crate::data::IndexedExample;
use crate::rng::{seeded, RunRng};
use crate::tensor::{grad_check, GradCheckOptions, GradCheckReport, ParamStore, Tape, TensorError, Var};
use crate::tree::Span;

const WORDS: usize = 12;
const TAGS: usize = 5;
const LABELS: usize = 3;
const KINK_MARGIN: f64 = 1e-4;
const MAX_ATTEMPTS: usize = 200;

/// Random example with a random tree and two disjoint single-token entities.
pub fn random_example(n: usize, rng: &mut RunRng) -> IndexedExample {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut heads = vec![0; n];
    for k in 1..n {
        heads[order[k]] = order[rng.gen_range(0..k)] + 1;
    }
    let picks: Vec<usize> = (0..n).collect::<Vec<_>>().choose_multiple(rng, 2).copied().collect();
    IndexedExample {
        id: "random".into(),
        words: (0..n).map(|_| rng.gen_range(2..WORDS)).collect(),
        pos: (0..n).map(|_| rng.gen_range(2..TAGS)).collect(),
        ner: (0..n).map(|_| rng.gen_range(2..TAGS)).collect(),
        heads,
        subj: Span::new(picks[0], picks[0]),
        obj: Span::new(picks[1], picks[1]),
        label: Some(rng.gen_range(0..LABELS)),
    }
}

#[derive(Debug, Clone)]
pub struct ModelCheck {
    pub report: GradCheckReport,
    /// Draws needed to land far enough from ReLU and max-pool kinks.
    pub attempts: usize,
    pub kink_margin: f64,
}

/// Gradient check of the full loss on one random `n`-token example. Draws
/// parameters (with small random biases) and examples from `seed` until the
/// forward pass stays clear of non-differentiable points.
pub fn check_model_gradients(
    config: &ModelConfig,
    n: usize,
    seed: u64,
    opts: &GradCheckOptions,
) -> Result<ModelCheck, ModelError> {
    let config = ModelConfig { dropout: 0.0, ..config.clone() };
    config.validate()?;
    let mut rng = seeded(seed);
    for attempt in 1..=MAX_ATTEMPTS {
        let ex = random_example(n, &mut rng);
        let prepared = PreparedExample::new(ex, &config)?;
        let mut store = init_params(&config, (WORDS, TAGS, TAGS, LABELS), None, &mut rng)?;
        jitter_biases(&mut store, &mut rng);
        let label = prepared.example.label.expect("random examples are labeled");
        let build = |tape: &mut Tape<'_>| -> Result<Var, TensorError> {
            let out = forward(tape, &config, &[&prepared], None)?;
            loss(tape, out.logits, &[label], out.h_sent, config.beta)
        };
        let margin = {
            let mut tape = Tape::new(&store);
            build(&mut tape)?;
            tape.kink_margin()
        };
        if margin < KINK_MARGIN {
            continue;
        }
        let report = grad_check(&mut store, opts, build)?;
        return Ok(ModelCheck { report, attempts: attempt, kink_margin: margin });
    }
    Err(ModelError::Config(format!("no draw in {MAX_ATTEMPTS} attempts stayed clear of kinks")))
}

fn jitter_biases(store: &mut ParamStore, rng: &mut RunRng) {
    let ids: Vec<_> = store.iter().filter(|(_, p)| p.name.ends_with(".b")).map(|(id, _)| id).collect();
    for id in ids {
        for v in store.get_mut(id).value.data_mut() {
            *v = rng.gen_range(-0.1..0.1);
        }
    }
}
