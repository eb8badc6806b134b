use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::score;
use super::{Metric, TrainError};
use crate::model::argmax;

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    pub labels: Vec<String>,
    /// `(example id, probability vector)` in file order.
    pub rows: Vec<(String, Vec<f64>)>,
}

#[derive(Serialize, Deserialize)]
struct HeaderLine {
    labels: Vec<String>,
}

#[derive(Deserialize)]
struct RowLine {
    id: String,
    probs: Vec<f64>,
}

const SUM_TOLERANCE: f64 = 1e-9;

impl PredictionSet {
    pub fn new(labels: Vec<String>, rows: Vec<(String, Vec<f64>)>) -> Result<Self, TrainError> {
        let set = PredictionSet { labels, rows };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let mut seen = HashMap::new();
        for (i, (id, p)) in self.rows.iter().enumerate() {
            if seen.insert(id.as_str(), i).is_some() {
                return Err(TrainError::Predictions(format!("duplicate id {id:?}")));
            }
            if p.len() != self.labels.len() {
                return Err(TrainError::Predictions(format!(
                    "{id}: {} probabilities for {} labels",
                    p.len(),
                    self.labels.len()
                )));
            }
            if p.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
                return Err(TrainError::Predictions(format!("{id}: probabilities must be finite and non-negative")));
            }
            let sum: f64 = p.iter().sum();
            if (sum - 1.0).abs() > SUM_TOLERANCE {
                return Err(TrainError::Predictions(format!("{id}: probabilities sum to {sum}")));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn predicted(&self) -> Vec<usize> {
        self.rows.iter().map(|(_, p)| argmax(p)).collect()
    }

    /// Writes the header line then one JSON row per example, probabilities
    /// with 17 significant digits.
    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", serde_json::to_string(&HeaderLine { labels: self.labels.clone() })?)?;
        for (id, probs) in &self.rows {
            let nums: Vec<String> = probs.iter().map(|x| format!("{x:.16e}")).collect();
            writeln!(w, "{{\"id\":{},\"probs\":[{}]}}", serde_json::to_string(id)?, nums.join(","))?;
        }
        w.flush()
    }

    pub fn read<R: BufRead>(r: R) -> Result<Self, TrainError> {
        let mut lines = r.lines().enumerate();
        let parse_err = |line: usize, e: &dyn std::fmt::Display| TrainError::Predictions(format!("line {line}: {e}"));
        let header = match lines.next() {
            Some((_, line)) => line.map_err(|e| parse_err(1, &e))?,
            None => return Err(TrainError::Predictions("empty prediction file".into())),
        };
        let header: HeaderLine = serde_json::from_str(&header).map_err(|e| parse_err(1, &e))?;
        let mut rows = Vec::new();
        for (i, line) in lines {
            let line = line.map_err(|e| parse_err(i + 1, &e))?;
            if line.trim().is_empty() {
                continue;
            }
            let row: RowLine = serde_json::from_str(&line).map_err(|e| parse_err(i + 1, &e))?;
            rows.push((row.id, row.probs));
        }
        PredictionSet::new(header.labels, rows)
    }

    pub fn save(&self, path: &Path) -> Result<(), TrainError> {
        let io = |e| TrainError::Io { path: path.display().to_string(), source: e };
        let file = File::create(path).map_err(io)?;
        self.write(BufWriter::new(file)).map_err(io)
    }

    pub fn load(path: &Path) -> Result<Self, TrainError> {
        let file = File::open(path).map_err(|e| TrainError::Io { path: path.display().to_string(), source: e })?;
        Self::read(BufReader::new(file))
    }

    /// Label ids of this set's predictions and of `gold` (id → label name),
    /// in this set's row order. Every row needs a gold label and vice versa.
    pub fn align(&self, gold: &[(String, String)]) -> Result<(Vec<usize>, Vec<usize>), TrainError> {
        let label_id: HashMap<&str, usize> = self.labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
        let by_id: HashMap<&str, &str> = gold.iter().map(|(id, l)| (id.as_str(), l.as_str())).collect();
        if by_id.len() != self.rows.len() {
            return Err(TrainError::Mismatch(format!("{} predictions for {} gold examples", self.rows.len(), by_id.len())));
        }
        let mut golds = Vec::with_capacity(self.rows.len());
        for (id, _) in &self.rows {
            let label = by_id.get(id.as_str()).ok_or_else(|| TrainError::Mismatch(format!("no gold example with id {id:?}")))?;
            golds.push(*label_id.get(label).ok_or_else(|| TrainError::UnknownLabel(label.to_string()))?);
        }
        Ok((self.predicted(), golds))
    }
}

/// Convex combination `alpha * a + (1 - alpha) * b`, row by row.
pub fn interpolate(a: &PredictionSet, b: &PredictionSet, alpha: f64) -> Result<PredictionSet, TrainError> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(TrainError::Config(format!("alpha {alpha} outside [0, 1]")));
    }
    if a.labels != b.labels {
        return Err(TrainError::Mismatch("prediction files have different label lists".into()));
    }
    let other: HashMap<&str, &Vec<f64>> = b.rows.iter().map(|(id, p)| (id.as_str(), p)).collect();
    if other.len() != a.rows.len() {
        return Err(TrainError::Mismatch(format!("{} vs {} examples", a.rows.len(), b.rows.len())));
    }
    let rows = a
        .rows
        .iter()
        .map(|(id, pa)| {
            let pb = other.get(id.as_str()).ok_or_else(|| TrainError::Mismatch(format!("id {id:?} missing from second file")))?;
            let mixed = pa
                .iter()
                .zip(pb.iter())
                .map(|(&x, &y)| alpha * x + (1.0 - alpha) * y)
                .collect();
            Ok((id.clone(), mixed))
        })
        .collect::<Result<_, TrainError>>()?;
    Ok(PredictionSet { labels: a.labels.clone(), rows })
}

/// Grid search over `alpha = k * step`; returns the best alpha and its
/// score, preferring the smaller alpha on ties.
pub fn tune_alpha(
    a: &PredictionSet,
    b: &PredictionSet,
    gold: &[(String, String)],
    negative_label: &str,
    metric: Metric,
    step: f64,
) -> Result<(f64, f64), TrainError> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(TrainError::Config(format!("grid step {step} outside (0, 1]")));
    }
    let negative = a
        .labels
        .iter()
        .position(|l| l == negative_label)
        .ok_or_else(|| TrainError::UnknownLabel(negative_label.to_string()))?;
    let steps = (1.0 / step + 1e-9).floor() as usize;
    let mut best: Option<(f64, f64)> = None;
    for k in 0..=steps {
        let alpha = (k as f64 * step).min(1.0);
        let mixed = interpolate(a, b, alpha)?;
        let (pred, golds) = mixed.align(gold)?;
        let s = score(metric, &pred, &golds, &a.labels, negative)?;
        if best.is_none_or(|(_, bs)| s > bs) {
            best = Some((alpha, s));
        }
    }
    Ok(best.expect("grid has at least one point"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(rows: &[(&str, &[f64])]) -> PredictionSet {
        PredictionSet::new(
            vec!["no_relation".into(), "r".into()],
            rows.iter().map(|(id, p)| (id.to_string(), p.to_vec())).collect(),
        )
        .unwrap()
    }

    #[test]
    fn toy_interpolation() {
        let a = set(&[("x", &[1.0, 0.0])]);
        let b = set(&[("x", &[0.0, 1.0])]);
        assert_eq!(interpolate(&a, &b, 0.6).unwrap().rows[0].1, vec![0.6, 0.4]);
        assert_eq!(interpolate(&a, &b, 1.0).unwrap(), a);
        assert_eq!(interpolate(&a, &b, 0.0).unwrap().rows, b.rows);
        assert!(interpolate(&a, &b, 1.5).is_err());
    }

    #[test]
    fn mismatched_sets_are_rejected() {
        let a = set(&[("x", &[1.0, 0.0])]);
        let b = set(&[("y", &[0.0, 1.0])]);
        assert!(matches!(interpolate(&a, &b, 0.5), Err(TrainError::Mismatch(_))));
        let c = PredictionSet::new(vec!["a".into(), "b".into()], vec![("x".into(), vec![0.5, 0.5])]).unwrap();
        assert!(matches!(interpolate(&a, &c, 0.5), Err(TrainError::Mismatch(_))));
    }

    #[test]
    fn file_round_trip_is_exact() {
        let third = 1.0 / 3.0;
        let a = set(&[("a\"1", &[third, 1.0 - third]), ("b", &[0.1 + 0.2 - 0.3 + 0.7, 1.0 - (0.1 + 0.2 - 0.3 + 0.7)])]);
        let mut buf = Vec::new();
        a.write(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("{\"labels\":[\"no_relation\",\"r\"]}\n"));
        assert_eq!(PredictionSet::read(buf.as_slice()).unwrap(), a);
    }

    #[test]
    fn invalid_rows_are_rejected() {
        let bad = PredictionSet::new(vec!["a".into(), "b".into()], vec![("x".into(), vec![0.5, 0.6])]);
        assert!(bad.is_err());
        let short = PredictionSet::new(vec!["a".into(), "b".into()], vec![("x".into(), vec![1.0])]);
        assert!(short.is_err());
        assert!(PredictionSet::read("".as_bytes()).is_err());
    }

    #[test]
    fn tuning_prefers_smaller_alpha_on_ties() {
        let gold = vec![("x".to_string(), "r".to_string()), ("y".to_string(), "no_relation".to_string())];
        let good = set(&[("x", &[0.0, 1.0]), ("y", &[1.0, 0.0])]);
        let bad = set(&[("x", &[0.9, 0.1]), ("y", &[0.1, 0.9])]);
        let (alpha, f1) = tune_alpha(&good, &bad, &gold, "no_relation", Metric::Micro, 0.05).unwrap();
        assert_eq!(f1, 1.0);
        assert!((alpha - 0.45).abs() < 1e-12, "{alpha}");
        let (alpha, _) = tune_alpha(&good, &good, &gold, "no_relation", Metric::Micro, 0.05).unwrap();
        assert_eq!(alpha, 0.0);
    }

    #[test]
    fn alignment_by_id() {
        let p = set(&[("x", &[0.0, 1.0]), ("y", &[1.0, 0.0])]);
        let gold = vec![("y".to_string(), "r".to_string()), ("x".to_string(), "r".to_string())];
        assert_eq!(p.align(&gold).unwrap(), (vec![1, 0], vec![1, 1]));
        let missing = vec![("x".to_string(), "r".to_string()), ("z".to_string(), "r".to_string())];
        assert!(matches!(p.align(&missing), Err(TrainError::Mismatch(_))));
    }
}
