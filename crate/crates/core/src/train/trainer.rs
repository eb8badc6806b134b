use std::io::Write;

use rand::seq::SliceRandom;
use serde::Serialize;

use super::metrics::score;
use super::{TrainConfig, TrainError};
use crate::data::{mask_entities, Example, MaskMode, Vocab, VocabOptions};
use crate::model::{argmax, forward, loss, Model, ModelConfig, ModelError, PreparedExample};
use crate::rng::{seeded, seeded_stream};
use crate::tensor::{Tape, Tensor, TensorError};

/// Random stream used for shuffling and dropout; model initialization uses
/// stream 0 of the same seed.
pub const TRAIN_STREAM: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub dev_f1: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the best dev score, or the last
    /// epoch when there is no dev set.
    pub model: Model,
    pub best_epoch: usize,
    pub best_dev_f1: Option<f64>,
    pub history: Vec<EpochRecord>,
}

pub fn write_history<W: Write>(history: &[EpochRecord], mut w: W) -> std::io::Result<()> {
    for r in history {
        writeln!(w, "{}", serde_json::to_string(r)?)?;
    }
    w.flush()
}

fn gold_labels(examples: &[PreparedExample]) -> Result<Vec<usize>, TrainError> {
    examples
        .iter()
        .map(|e| e.example.label.ok_or_else(|| TrainError::UnknownLabel(format!("example {} has no known label", e.example.id))))
        .collect()
}

/// Vocabulary from the masked training split; `other_splits` contribute
/// only pretrained words.
pub fn build_vocab(
    train_set: &[Example],
    other_splits: &[&[Example]],
    mask: MaskMode,
    options: &VocabOptions,
) -> Result<Vocab, TrainError> {
    let masked: Vec<Example> = train_set.iter().map(|e| mask_entities(e, mask)).collect();
    let others: Vec<Vec<Example>> = other_splits.iter().map(|s| s.iter().map(|e| mask_entities(e, mask)).collect()).collect();
    let refs: Vec<&[Example]> = others.iter().map(Vec::as_slice).collect();
    Ok(Vocab::build(&masked, &refs, options)?)
}

/// Freshly initialized model drawing from stream 0 of `seed`.
pub fn init_model(
    config: ModelConfig,
    vocab: Vocab,
    mask: MaskMode,
    word_vectors: Option<Tensor>,
    seed: u64,
) -> Result<Model, TrainError> {
    Ok(Model::init(config, vocab, mask, word_vectors, &mut seeded(seed))?)
}

/// Argmax label of every example in evaluation mode.
pub fn predict_labels(model: &Model, examples: &[PreparedExample], batch_size: usize) -> Result<Vec<usize>, ModelError> {
    Ok(model.predict_proba(examples, batch_size)?.iter().map(|p| argmax(p)).collect())
}

/// Dev score of `model` under the configured metric.
pub fn dev_score(model: &Model, examples: &[PreparedExample], config: &TrainConfig) -> Result<f64, TrainError> {
    let gold = gold_labels(examples)?;
    let pred = predict_labels(model, examples, config.batch_size)?;
    score(config.metric, &pred, &gold, model.vocab.labels(), model.vocab.negative_id())
}

pub fn train(
    model: Model,
    train_set: &[PreparedExample],
    dev_set: &[PreparedExample],
    config: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    train_with(model, train_set, dev_set, config, |_| {})
}

/// Minibatch SGD with gradient clipping and dev-driven annealing.
/// `on_epoch` sees each history record as it is produced.
pub fn train_with(
    mut model: Model,
    train_set: &[PreparedExample],
    dev_set: &[PreparedExample],
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(TrainError::EmptyTrainingSet);
    }
    let labels = gold_labels(train_set)?;
    if !dev_set.is_empty() {
        gold_labels(dev_set)?;
    }
    let mut rng = seeded_stream(config.seed, TRAIN_STREAM);
    let mut schedule = super::LrSchedule::new(config);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<(usize, f64, crate::tensor::ParamStore)> = None;

    for epoch in 1..=config.epochs {
        let lr = schedule.lr();
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<&PreparedExample> = chunk.iter().map(|&i| &train_set[i]).collect();
            let gold: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            let non_finite = |e: TensorError| match e {
                TensorError::NonFinite(what) => TrainError::NonFinite { epoch, batch: b + 1, what },
                other => TrainError::Model(other.into()),
            };
            let (value, grads) = {
                let mut tape = Tape::new(&model.params);
                let out = forward(&mut tape, &model.config, &batch, Some(&mut rng)).map_err(non_finite)?;
                let l = loss(&mut tape, out.logits, &gold, out.h_sent, model.config.beta).map_err(non_finite)?;
                (tape.value(l).item(), tape.backward(l).map_err(non_finite)?)
            };
            model.params.accumulate(&grads).map_err(non_finite)?;
            model.params.clip_and_step(lr, config.max_grad_norm).map_err(non_finite)?;
            total += value * chunk.len() as f64;
        }
        let train_loss = total / train_set.len() as f64;

        let dev_f1 = if dev_set.is_empty() { None } else { Some(dev_score(&model, dev_set, config)?) };
        if let Some(f1) = dev_f1 {
            if schedule.observe(epoch, f1) {
                best = Some((epoch, f1, model.params.clone()));
            }
        }
        let record = EpochRecord { epoch, lr, train_loss, dev_f1 };
        on_epoch(&record);
        history.push(record);
    }

    let (best_epoch, best_dev_f1) = match best {
        Some((epoch, f1, params)) => {
            model.params = params;
            (epoch, Some(f1))
        }
        None => (config.epochs, None),
    };
    Ok(TrainOutcome { model, best_epoch, best_dev_f1, history })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{write_checkpoint, Variant};
    use crate::train::synthetic_dataset;

    fn setup(n: usize) -> (Model, Vec<PreparedExample>) {
        let data = synthetic_dataset(n, 5);
        let vocab = build_vocab(&data, &[], MaskMode::Typed, &VocabOptions::default()).unwrap();
        let model = init_model(ModelConfig::tiny(Variant::Cgcn), vocab, MaskMode::Typed, None, 3).unwrap();
        let prepared = model.prepare_all(&data).unwrap();
        (model, prepared)
    }

    fn quick() -> TrainConfig {
        TrainConfig { epochs: 3, lr: 0.1, batch_size: 4, ..TrainConfig::default() }
    }

    #[test]
    fn identical_runs_are_bit_identical() {
        let (model, data) = setup(10);
        let a = train(model.clone(), &data, &data[..4], &quick()).unwrap();
        let b = train(model, &data, &data[..4], &quick()).unwrap();
        assert_eq!(a.history, b.history);
        let (mut ca, mut cb) = (Vec::new(), Vec::new());
        write_checkpoint(&a.model, &mut ca).unwrap();
        write_checkpoint(&b.model, &mut cb).unwrap();
        assert_eq!(ca, cb);
    }

    #[test]
    fn without_dev_the_last_epoch_is_kept() {
        let (model, data) = setup(6);
        let out = train(model, &data, &[], &quick()).unwrap();
        assert_eq!(out.best_epoch, 3);
        assert_eq!(out.best_dev_f1, None);
        assert!(out.history.iter().all(|r| r.dev_f1.is_none() && r.lr == 0.1));
    }

    #[test]
    fn best_epoch_is_the_first_maximum() {
        let (model, data) = setup(9);
        let out = train(model, &data, &data, &TrainConfig { epochs: 6, ..quick() }).unwrap();
        let scores: Vec<f64> = out.history.iter().map(|r| r.dev_f1.unwrap()).collect();
        let best = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(out.best_dev_f1, Some(best));
        assert_eq!(out.best_epoch, scores.iter().position(|&s| s == best).unwrap() + 1);
        assert_eq!(dev_score(&out.model, &data, &quick()).unwrap(), best);
    }

    #[test]
    fn non_finite_values_report_their_position() {
        let (mut model, data) = setup(6);
        let id = model.params.id("out.b").unwrap();
        model.params.get_mut(id).value.data_mut()[0] = f64::NAN;
        let err = train(model, &data, &[], &quick()).unwrap_err();
        assert!(matches!(err, TrainError::NonFinite { epoch: 1, batch: 1, .. }), "{err}");
    }

    #[test]
    fn rejects_empty_or_unlabeled_training_data() {
        let (model, mut data) = setup(3);
        assert!(matches!(train(model.clone(), &[], &[], &quick()), Err(TrainError::EmptyTrainingSet)));
        data[1].example.label = None;
        assert!(matches!(train(model, &data, &[], &quick()), Err(TrainError::UnknownLabel(_))));
    }

    #[test]
    fn history_lines_are_json() {
        let rec = EpochRecord { epoch: 1, lr: 0.9, train_loss: 1.5, dev_f1: None };
        let mut buf = Vec::new();
        write_history(&[rec], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "{\"epoch\":1,\"lr\":0.9,\"train_loss\":1.5,\"dev_f1\":null}\n");
    }
}
