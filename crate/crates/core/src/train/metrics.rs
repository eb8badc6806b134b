use serde::Serialize;

use super::{Metric, TrainError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClassCounts {
    pub label: String,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BucketMetrics {
    pub bucket: String,
    pub examples: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub macro_f1: f64,
    pub per_class: Vec<ClassCounts>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub buckets: Option<Vec<BucketMetrics>>,
}

/// Inclusive lower edges of the entity-distance buckets; the last is open.
pub const DISTANCE_BUCKETS: [usize; 7] = [0, 11, 16, 21, 26, 31, 36];

pub fn bucket_of(distance: usize) -> usize {
    DISTANCE_BUCKETS.iter().rposition(|&lo| distance >= lo).unwrap_or(0)
}

pub fn bucket_name(bucket: usize) -> String {
    match DISTANCE_BUCKETS.get(bucket + 1) {
        Some(next) => format!("{}-{}", DISTANCE_BUCKETS[bucket], next - 1),
        None => format!(">={}", DISTANCE_BUCKETS[bucket]),
    }
}

pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn check(pred: &[usize], gold: &[usize], labels: &[String], negative: usize) -> Result<(), TrainError> {
    if pred.len() != gold.len() {
        return Err(TrainError::Mismatch(format!("{} predictions for {} gold labels", pred.len(), gold.len())));
    }
    if negative >= labels.len() {
        return Err(TrainError::UnknownLabel(format!("negative label id {negative}")));
    }
    if let Some(&bad) = pred.iter().chain(gold).find(|&&l| l >= labels.len()) {
        return Err(TrainError::UnknownLabel(format!("label id {bad} of {}", labels.len())));
    }
    Ok(())
}

/// `(precision, recall)` over positive labels: a prediction counts as
/// correct only if it is positive and equal to the gold label.
fn micro_pr(pred: &[usize], gold: &[usize], negative: usize) -> (f64, f64) {
    let correct = pred.iter().zip(gold).filter(|(p, g)| p == g && **p != negative).count();
    let predicted = pred.iter().filter(|&&p| p != negative).count();
    let actual = gold.iter().filter(|&&g| g != negative).count();
    (ratio(correct, predicted), ratio(correct, actual))
}

/// Micro-averaged scores with the negative label excluded. `distances`
/// (token distance between entity starts, one per example) adds a
/// per-bucket breakdown.
pub fn evaluate_micro(
    pred: &[usize],
    gold: &[usize],
    labels: &[String],
    negative: usize,
    distances: Option<&[usize]>,
) -> Result<Metrics, TrainError> {
    check(pred, gold, labels, negative)?;
    let (precision, recall) = micro_pr(pred, gold, negative);
    let mut per_class: Vec<ClassCounts> =
        labels.iter().map(|l| ClassCounts { label: l.clone(), tp: 0, fp: 0, fn_: 0 }).collect();
    for (&p, &g) in pred.iter().zip(gold) {
        if p == g {
            per_class[p].tp += 1;
        } else {
            per_class[p].fp += 1;
            per_class[g].fn_ += 1;
        }
    }
    let buckets = match distances {
        None => None,
        Some(d) => {
            if d.len() != pred.len() {
                return Err(TrainError::Mismatch(format!("{} distances for {} predictions", d.len(), pred.len())));
            }
            let mut groups: Vec<(Vec<usize>, Vec<usize>)> = vec![Default::default(); DISTANCE_BUCKETS.len()];
            for ((&p, &g), &dist) in pred.iter().zip(gold).zip(d) {
                let b = &mut groups[bucket_of(dist)];
                b.0.push(p);
                b.1.push(g);
            }
            Some(
                groups
                    .iter()
                    .enumerate()
                    .map(|(i, (p, g))| {
                        let (bp, br) = micro_pr(p, g, negative);
                        BucketMetrics { bucket: bucket_name(i), examples: p.len(), precision: bp, recall: br, f1: f1_score(bp, br) }
                    })
                    .collect(),
            )
        }
    };
    Ok(Metrics {
        precision,
        recall,
        f1: f1_score(precision, recall),
        macro_f1: macro_f1(pred, gold, labels, negative),
        per_class,
        buckets,
    })
}

/// Relation type of a directed label: the part before `(`.
pub fn relation_type(label: &str) -> &str {
    label.split('(').next().unwrap_or(label).trim()
}

fn macro_f1(pred: &[usize], gold: &[usize], labels: &[String], negative: usize) -> f64 {
    let mut types: Vec<&str> = Vec::new();
    for (i, l) in labels.iter().enumerate() {
        let t = relation_type(l);
        if i != negative && !types.contains(&t) {
            types.push(t);
        }
    }
    if types.is_empty() {
        return 0.0;
    }
    let type_of: Vec<Option<usize>> = labels
        .iter()
        .enumerate()
        .map(|(i, l)| if i == negative { None } else { types.iter().position(|t| *t == relation_type(l)) })
        .collect();
    let mut tp = vec![0; types.len()];
    let mut predicted = vec![0; types.len()];
    let mut actual = vec![0; types.len()];
    for (&p, &g) in pred.iter().zip(gold) {
        if let Some(t) = type_of[p] {
            predicted[t] += 1;
        }
        if let Some(t) = type_of[g] {
            actual[t] += 1;
            if p == g {
                tp[t] += 1;
            }
        }
    }
    let total: f64 = (0..types.len()).map(|t| f1_score(ratio(tp[t], predicted[t]), ratio(tp[t], actual[t]))).sum();
    total / types.len() as f64
}

/// Macro F1 over undirected relation types: both directions of a type are
/// pooled, a prediction is correct only if type and direction match, and
/// the negative label is excluded from the average.
pub fn evaluate_macro(pred: &[usize], gold: &[usize], labels: &[String], negative: usize) -> Result<f64, TrainError> {
    check(pred, gold, labels, negative)?;
    Ok(macro_f1(pred, gold, labels, negative))
}

pub fn score(metric: Metric, pred: &[usize], gold: &[usize], labels: &[String], negative: usize) -> Result<f64, TrainError> {
    check(pred, gold, labels, negative)?;
    Ok(match metric {
        Metric::Micro => {
            let (p, r) = micro_pr(pred, gold, negative);
            f1_score(p, r)
        }
        Metric::Macro => macro_f1(pred, gold, labels, negative),
    })
}
