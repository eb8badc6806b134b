use std::collections::{BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::example::{obj_mask_token, subj_mask_token, PAD_TOKEN, UNK_TOKEN};
use super::{DataError, Example};
use crate::tree::Span;

pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;

/// Dense symbol table with `PAD = 0` and `UNK = 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolTable {
    symbols: Vec<String>,
    index: HashMap<String, usize>,
}

impl SymbolTable {
    fn from_symbols(symbols: Vec<String>) -> Self {
        let index = symbols.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        SymbolTable { symbols, index }
    }

    /// Reserved entries, then `fixed` in the given order, then `counted`
    /// ordered by descending count and lexicographically within a count.
    fn build(fixed: Vec<String>, counted: HashMap<&str, usize>) -> Self {
        let mut symbols = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
        let mut seen: HashSet<String> = symbols.iter().cloned().collect();
        for s in fixed {
            if seen.insert(s.clone()) {
                symbols.push(s);
            }
        }
        let mut rest: Vec<(&str, usize)> = counted.into_iter().filter(|(s, _)| !seen.contains(*s)).collect();
        rest.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        symbols.extend(rest.into_iter().map(|(s, _)| s.to_string()));
        Self::from_symbols(symbols)
    }

    pub fn get(&self, symbol: &str) -> Option<usize> {
        self.index.get(symbol).copied()
    }

    /// Index of `symbol`, or `UNK`.
    pub fn id(&self, symbol: &str) -> usize {
        self.get(symbol).unwrap_or(UNK_ID)
    }

    pub fn symbol(&self, id: usize) -> &str {
        &self.symbols[id]
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "VocabRecord", into = "VocabRecord")]
pub struct Vocab {
    pub words: SymbolTable,
    pub pos: SymbolTable,
    pub ner: SymbolTable,
    labels: Vec<String>,
    label_index: HashMap<String, usize>,
    negative_label: String,
}

#[derive(Serialize, Deserialize)]
struct VocabRecord {
    words: Vec<String>,
    pos: Vec<String>,
    ner: Vec<String>,
    labels: Vec<String>,
    negative_label: String,
}

impl From<VocabRecord> for Vocab {
    fn from(r: VocabRecord) -> Self {
        Vocab::from_parts(r.words, r.pos, r.ner, r.labels, r.negative_label)
    }
}

impl From<Vocab> for VocabRecord {
    fn from(v: Vocab) -> Self {
        VocabRecord {
            words: v.words.symbols,
            pos: v.pos.symbols,
            ner: v.ner.symbols,
            labels: v.labels,
            negative_label: v.negative_label,
        }
    }
}

#[derive(Debug, Clone)]
pub struct VocabOptions {
    pub min_freq: usize,
    pub negative_label: String,
    /// Words with a pretrained vector. Any of them seen in any split is kept
    /// regardless of its training frequency.
    pub pretrained: Option<HashSet<String>>,
}

impl Default for VocabOptions {
    fn default() -> Self {
        VocabOptions { min_freq: 1, negative_label: "no_relation".into(), pretrained: None }
    }
}

impl Vocab {
    pub fn from_parts(
        words: Vec<String>,
        pos: Vec<String>,
        ner: Vec<String>,
        labels: Vec<String>,
        negative_label: String,
    ) -> Self {
        let label_index = labels.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        Vocab {
            words: SymbolTable::from_symbols(words),
            pos: SymbolTable::from_symbols(pos),
            ner: SymbolTable::from_symbols(ner),
            labels,
            label_index,
            negative_label,
        }
    }

    /// Builds the vocabulary from (already masked) training examples.
    /// `other_splits` only contribute words found in the pretrained list.
    pub fn build(train: &[Example], other_splits: &[&[Example]], opts: &VocabOptions) -> Result<Self, DataError> {
        if train.is_empty() {
            return Err(DataError::EmptyTrainingSet);
        }
        let mut masks = BTreeSet::new();
        let mut word_counts: HashMap<&str, usize> = HashMap::new();
        let mut pos_counts: HashMap<&str, usize> = HashMap::new();
        let mut ner_counts: HashMap<&str, usize> = HashMap::new();
        let mut labels = BTreeSet::new();
        for ex in train {
            masks.insert(subj_mask_token(&ex.subj_type));
            masks.insert(obj_mask_token(&ex.obj_type));
            for w in &ex.tokens {
                *word_counts.entry(w).or_default() += 1;
            }
            for p in &ex.pos {
                *pos_counts.entry(p).or_default() += 1;
            }
            for t in &ex.ner {
                *ner_counts.entry(t).or_default() += 1;
            }
            labels.insert(ex.relation.clone());
        }

        let mut all_counts = word_counts.clone();
        for split in other_splits {
            for ex in split.iter() {
                for w in &ex.tokens {
                    *all_counts.entry(w).or_default() += 1;
                }
            }
        }
        let counted: HashMap<&str, usize> = all_counts
            .iter()
            .filter(|(w, _)| {
                word_counts.get(*w).copied().unwrap_or(0) >= opts.min_freq
                    || opts.pretrained.as_ref().is_some_and(|p| p.contains(**w))
            })
            .map(|(w, c)| (*w, *c))
            .collect();

        let words = SymbolTable::build(masks.into_iter().collect(), counted);
        let pos = SymbolTable::build(Vec::new(), pos_counts);
        let ner = SymbolTable::build(Vec::new(), ner_counts);

        labels.remove(&opts.negative_label);
        let labels: Vec<String> = std::iter::once(opts.negative_label.clone()).chain(labels).collect();
        Ok(Vocab::from_parts(
            words.symbols,
            pos.symbols,
            ner.symbols,
            labels,
            opts.negative_label.clone(),
        ))
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label_id(&self, label: &str) -> Option<usize> {
        self.label_index.get(label).copied()
    }

    pub fn negative_label(&self) -> &str {
        &self.negative_label
    }

    pub fn negative_id(&self) -> usize {
        self.label_id(&self.negative_label).expect("negative label is always present")
    }
}

/// An example mapped to vocabulary indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexedExample {
    pub id: String,
    pub words: Vec<usize>,
    pub pos: Vec<usize>,
    pub ner: Vec<usize>,
    pub heads: Vec<usize>,
    pub subj: Span,
    pub obj: Span,
    /// `None` only for examples encoded with [`encode_unlabeled`] whose label
    /// is unknown.
    pub label: Option<usize>,
}

impl IndexedExample {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

fn encode_inner(ex: &Example, vocab: &Vocab) -> IndexedExample {
    IndexedExample {
        id: ex.id.clone(),
        words: ex.tokens.iter().map(|w| vocab.words.id(w)).collect(),
        pos: ex.pos.iter().map(|p| vocab.pos.id(p)).collect(),
        ner: ex.ner.iter().map(|t| vocab.ner.id(t)).collect(),
        heads: ex.heads.clone(),
        subj: ex.subj,
        obj: ex.obj,
        label: vocab.label_id(&ex.relation),
    }
}

/// Maps tokens, tags and the label to indices. Unknown words and tags map to
/// their channel's UNK; an unknown label is an error.
pub fn encode(ex: &Example, vocab: &Vocab) -> Result<IndexedExample, DataError> {
    let out = encode_inner(ex, vocab);
    if out.label.is_none() {
        return Err(DataError::UnknownLabel(ex.relation.clone()));
    }
    Ok(out)
}

/// Like [`encode`], but an unknown label is left as `None`.
pub fn encode_unlabeled(ex: &Example, vocab: &Vocab) -> IndexedExample {
    encode_inner(ex, vocab)
}
