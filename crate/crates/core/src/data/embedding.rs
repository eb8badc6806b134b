use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::Rng;

use super::vocab::PAD_ID;
use super::{DataError, Vocab};
use crate::rng::seeded;
use crate::tensor::Tensor;

/// Word set of a GloVe-style text file, without reading the vectors.
pub fn glove_words(path: &Path) -> Result<HashSet<String>, DataError> {
    let file = File::open(path).map_err(|source| DataError::Io { path: path.into(), source })?;
    let mut words = HashSet::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|source| DataError::Io { path: path.into(), source })?;
        if let Some(w) = line.split(' ').next().filter(|w| !w.is_empty()) {
            words.insert(w.to_string());
        }
    }
    Ok(words)
}

/// Random initialization for rows without a pretrained vector: uniform on
/// `±1/sqrt(dim)`, drawn in row order from `seed`. The PAD row is zero.
pub fn random_embeddings(rows: usize, dim: usize, seed: u64) -> Tensor {
    let mut rng = seeded(seed);
    let bound = 1.0 / (dim as f64).sqrt();
    let mut t = Tensor::zeros(&[rows, dim]);
    for r in 0..rows {
        for v in t.row_mut(r) {
            *v = rng.gen_range(-1.0..=1.0) * bound;
        }
    }
    if rows > PAD_ID {
        t.row_mut(PAD_ID).fill(0.0);
    }
    t
}

/// Word embedding matrix for `vocab`: vectors found in the file are copied,
/// the rest come from [`random_embeddings`].
pub fn load_glove(path: &Path, vocab: &Vocab, dim: usize, seed: u64) -> Result<Tensor, DataError> {
    let file = File::open(path).map_err(|source| DataError::Io { path: path.into(), source })?;
    read_glove(BufReader::new(file), vocab, dim, seed).map_err(|e| match e {
        DataError::Io { source, .. } => DataError::Io { path: path.into(), source },
        other => other,
    })
}

pub fn read_glove<R: BufRead>(reader: R, vocab: &Vocab, dim: usize, seed: u64) -> Result<Tensor, DataError> {
    let mut matrix = random_embeddings(vocab.words.len(), dim, seed);
    let mut filled = vec![false; vocab.words.len()];
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|source| DataError::Io { path: "<glove>".into(), source })?;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(' ');
        let word = parts.next().unwrap_or_default();
        let values: Vec<&str> = parts.collect();
        // word2vec-style "<count> <dim>" header
        if lineno == 1 && values.len() == 1 && word.parse::<usize>().is_ok() && values[0].parse::<usize>().is_ok() {
            continue;
        }
        if values.len() != dim {
            return Err(DataError::EmbeddingDim { line: lineno, expected: dim, found: values.len() });
        }
        let Some(id) = vocab.words.get(word) else { continue };
        if id == PAD_ID || filled[id] {
            continue;
        }
        let row = matrix.row_mut(id);
        for (slot, text) in row.iter_mut().zip(&values) {
            *slot = text.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| DataError::Embedding {
                line: lineno,
                message: format!("cannot parse {text:?} as a real"),
            })?;
        }
        filled[id] = true;
    }
    Ok(matrix)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::vocab::UNK_ID;

    fn vocab() -> Vocab {
        Vocab::from_parts(
            vec!["<PAD>".into(), "<UNK>".into(), "the".into(), "cat".into()],
            vec![],
            vec![],
            vec!["no_relation".into()],
            "no_relation".into(),
        )
    }

    #[test]
    fn copies_known_rows_and_seeds_the_rest() {
        let text = "the 0.1 0.2 0.3\nzebra 1 1 1\n";
        let m = read_glove(text.as_bytes(), &vocab(), 3, 7).unwrap();
        assert_eq!(m.row(2), &[0.1, 0.2, 0.3]);
        assert_eq!(m.row(PAD_ID), &[0.0, 0.0, 0.0]);
        let bound = 1.0 / 3f64.sqrt();
        assert!(m.row(3).iter().all(|v| v.abs() <= bound));
        let again = read_glove(text.as_bytes(), &vocab(), 3, 7).unwrap();
        assert_eq!(m.row(3), again.row(3));
        assert_eq!(m.row(UNK_ID), again.row(UNK_ID));
        let other = read_glove(text.as_bytes(), &vocab(), 3, 8).unwrap();
        assert_ne!(m.row(3), other.row(3));
    }

    #[test]
    fn dimension_mismatch() {
        let text = "the 0.1 0.2\n";
        assert!(matches!(
            read_glove(text.as_bytes(), &vocab(), 3, 0),
            Err(DataError::EmbeddingDim { line: 1, expected: 3, found: 2 })
        ));
    }

    #[test]
    fn unparseable_real() {
        let text = "2 3\nthe 0.1 zz 0.3\n";
        assert!(matches!(read_glove(text.as_bytes(), &vocab(), 3, 0), Err(DataError::Embedding { line: 2, .. })));
    }
}
