use std::collections::BTreeMap;

use serde::Serialize;

use super::PoolTrace;
use crate::tree::{kept_edges, DepTree, PruneResult, Span};

/// Number of `h_sent` dimensions won by each sentence token; pruned tokens
/// get zero.
pub fn token_contributions(trace: &PoolTrace, sentence_len: usize) -> Vec<usize> {
    let mut counts = vec![0; sentence_len];
    for &row in &trace.argmax_rows {
        counts[trace.node_order[row]] += 1;
    }
    counts
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeFilters {
    /// Drop edges touching commas, periods or quotation marks.
    pub punctuation: bool,
    /// Drop edges touching "of", "to" or "by".
    pub prepositions: bool,
    /// Drop edges whose endpoints lie in the same entity.
    pub intra_entity: bool,
}

impl Default for EdgeFilters {
    fn default() -> Self {
        EdgeFilters { punctuation: true, prepositions: true, intra_entity: true }
    }
}

impl EdgeFilters {
    pub fn none() -> Self {
        EdgeFilters { punctuation: false, prepositions: false, intra_entity: false }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EdgeScore {
    pub head: usize,
    pub dependent: usize,
    /// `head -> dependent` with display forms of both tokens.
    pub pattern: String,
    pub score: usize,
}

fn is_punctuation(token: &str) -> bool {
    !token.is_empty() && token.chars().all(|c| matches!(c, ',' | '.' | '"' | '\'' | '`' | '“' | '”' | '‘' | '’'))
}

fn is_common_preposition(token: &str) -> bool {
    matches!(token.to_lowercase().as_str(), "of" | "to" | "by")
}

/// Scores every surviving edge of the pruned tree by the contributions of
/// its two endpoints, applies `filters`, and ranks highest first.
/// `display` holds the token forms used in edge patterns, normally the
/// sentence with typed entity masks.
pub fn edge_scores(
    tree: &DepTree,
    prune: &PruneResult,
    contributions: &[usize],
    display: &[String],
    subj: Span,
    obj: Span,
    filters: EdgeFilters,
) -> Vec<EdgeScore> {
    let mut scored: Vec<EdgeScore> = kept_edges(prune, tree)
        .into_iter()
        .filter(|&(h, d)| {
            let (th, td) = (&display[h], &display[d]);
            !(filters.punctuation && (is_punctuation(th) || is_punctuation(td))
                || filters.prepositions && (is_common_preposition(th) || is_common_preposition(td))
                || filters.intra_entity
                    && ((subj.contains(h) && subj.contains(d)) || (obj.contains(h) && obj.contains(d))))
        })
        .map(|(h, d)| EdgeScore {
            head: h,
            dependent: d,
            pattern: format!("{} -> {}", display[h], display[d]),
            score: contributions[h] + contributions[d],
        })
        .collect();
    scored.sort_by(|a, b| b.score.cmp(&a.score).then_with(|| a.head.cmp(&b.head)).then_with(|| a.dependent.cmp(&b.dependent)));
    scored
}

/// Corpus-level sums of edge-pattern scores per relation.
#[derive(Debug, Clone, Default)]
pub struct EdgeTally {
    per_relation: BTreeMap<String, BTreeMap<String, usize>>,
}

impl EdgeTally {
    pub fn add(&mut self, relation: &str, edges: &[EdgeScore]) {
        let table = self.per_relation.entry(relation.to_string()).or_default();
        for e in edges {
            *table.entry(e.pattern.clone()).or_default() += e.score;
        }
    }

    pub fn relations(&self) -> impl Iterator<Item = &str> {
        self.per_relation.keys().map(String::as_str)
    }

    /// Highest-scoring patterns for `relation`; ties ordered by pattern.
    pub fn top_k(&self, relation: &str, k: usize) -> Vec<(String, usize)> {
        let Some(table) = self.per_relation.get(relation) else { return Vec::new() };
        let mut items: Vec<(String, usize)> = table.iter().map(|(p, s)| (p.clone(), *s)).collect();
        items.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        items.truncate(k);
        items
    }
}
