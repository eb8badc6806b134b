//! Dependency-tree validation, lowest common ancestor, dependency path and
//! path-centric pruning.
//!
//! Node indices are 0-based sentence positions. Head lists use the CoNLL-U
//! convention: `heads[i]` is the 1-based position of token `i`'s head, with
//! `0` marking the root.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tensor::Tensor;

/// Token fields are 0-based; messages print them 1-based like heads.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TreeError {
    #[error("empty head list")]
    Empty,
    #[error("head {head} of token {} is out of range for {n} tokens", .token + 1)]
    HeadOutOfRange { token: usize, head: usize, n: usize },
    #[error("multiple roots at tokens {:?}", .0.iter().map(|t| t + 1).collect::<Vec<_>>())]
    MultipleRoots(Vec<usize>),
    /// A cycle is also what a head list with zero roots degenerates to.
    #[error("cycle through token {}", .0 + 1)]
    Cycle(usize),
    #[error("span ({start}, {end}) invalid for {n} tokens")]
    BadSpan { start: usize, end: usize, n: usize },
    #[error("no nodes kept after pruning")]
    EmptyKept,
}

/// Inclusive 0-based token span.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn contains(&self, i: usize) -> bool {
        self.start <= i && i <= self.end
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn tokens(&self) -> std::ops::RangeInclusive<usize> {
        self.start..=self.end
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start <= other.end && other.start <= self.end
    }
}

/// Pruning distance: a finite bound, the whole LCA subtree, or no pruning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PruneK {
    Dist(usize),
    Inf,
    Full,
}

impl fmt::Display for PruneK {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PruneK::Dist(k) => write!(f, "{k}"),
            PruneK::Inf => f.write_str("inf"),
            PruneK::Full => f.write_str("full"),
        }
    }
}

impl FromStr for PruneK {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "lca" => Ok(PruneK::Inf),
            "full" => Ok(PruneK::Full),
            other => other
                .parse::<usize>()
                .map(PruneK::Dist)
                .map_err(|_| format!("invalid pruning distance {s:?}: expected integer, inf or full")),
        }
    }
}

impl Serialize for PruneK {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for PruneK {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        match v {
            serde_json::Value::Number(n) => n
                .as_u64()
                .map(|k| PruneK::Dist(k as usize))
                .ok_or_else(|| serde::de::Error::custom("pruning distance must be non-negative")),
            serde_json::Value::String(s) => s.parse().map_err(serde::de::Error::custom),
            _ => Err(serde::de::Error::custom("expected integer or string pruning distance")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepTree {
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    depth: Vec<usize>,
    root: usize,
}

impl DepTree {
    /// Validates a 1-based head list and builds the tree.
    pub fn from_heads(heads: &[usize]) -> Result<Self, TreeError> {
        let n = heads.len();
        if n == 0 {
            return Err(TreeError::Empty);
        }
        let mut parent = Vec::with_capacity(n);
        let mut roots = Vec::new();
        for (token, &head) in heads.iter().enumerate() {
            if head > n {
                return Err(TreeError::HeadOutOfRange { token, head, n });
            }
            if head == 0 {
                roots.push(token);
                parent.push(None);
            } else {
                parent.push(Some(head - 1));
            }
        }
        if roots.len() > 1 {
            return Err(TreeError::MultipleRoots(roots));
        }

        // Walk every node upward; a node still on the current walk means a cycle.
        const UNSEEN: usize = usize::MAX;
        let mut depth = vec![UNSEEN; n];
        let mut on_walk = vec![false; n];
        for start in 0..n {
            let mut walk = Vec::new();
            let mut cur = start;
            let base = loop {
                if depth[cur] != UNSEEN {
                    break depth[cur] + 1;
                }
                if on_walk[cur] {
                    return Err(TreeError::Cycle(cur));
                }
                on_walk[cur] = true;
                walk.push(cur);
                match parent[cur] {
                    Some(p) => cur = p,
                    None => break 0,
                }
            };
            // `walk` is ordered leaf-to-top; the last element sits at `base`.
            for (offset, &node) in walk.iter().rev().enumerate() {
                depth[node] = base + offset;
                on_walk[node] = false;
            }
        }
        // Zero roots always leaves a cycle, which the walk above reports.
        let root = roots[0];

        let mut children = vec![Vec::new(); n];
        for (child, p) in parent.iter().enumerate() {
            if let Some(p) = *p {
                children[p].push(child);
            }
        }
        Ok(DepTree { parent, children, depth, root })
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn parent(&self, node: usize) -> Option<usize> {
        self.parent[node]
    }

    pub fn children(&self, node: usize) -> &[usize] {
        &self.children[node]
    }

    pub fn depth(&self, node: usize) -> usize {
        self.depth[node]
    }

    pub fn depths(&self) -> &[usize] {
        &self.depth
    }

    /// Undirected neighbours: parent (if any) followed by children.
    pub fn neighbors(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        self.parent[node].into_iter().chain(self.children[node].iter().copied())
    }

    pub fn lca(&self, mut a: usize, mut b: usize) -> usize {
        while self.depth[a] > self.depth[b] {
            a = self.parent[a].expect("non-root has a parent");
        }
        while self.depth[b] > self.depth[a] {
            b = self.parent[b].expect("non-root has a parent");
        }
        while a != b {
            a = self.parent[a].expect("non-root has a parent");
            b = self.parent[b].expect("non-root has a parent");
        }
        a
    }

    /// Whether `node` lies in the subtree rooted at `top` (inclusive).
    pub fn in_subtree(&self, top: usize, mut node: usize) -> bool {
        while self.depth[node] > self.depth[top] {
            node = self.parent[node].expect("non-root has a parent");
        }
        node == top
    }

    fn check_span(&self, span: Span) -> Result<(), TreeError> {
        if span.start > span.end || span.end >= self.len() {
            return Err(TreeError::BadSpan { start: span.start, end: span.end, n: self.len() });
        }
        Ok(())
    }

    /// Lowest common ancestor of every entity token and the dependency path:
    /// the union of each entity token's ancestor chain up to the LCA.
    pub fn lca_and_path(&self, subj: Span, obj: Span) -> Result<(usize, BTreeSet<usize>), TreeError> {
        self.check_span(subj)?;
        self.check_span(obj)?;
        let tokens: Vec<usize> = subj.tokens().chain(obj.tokens()).collect();
        let lca = tokens[1..].iter().fold(tokens[0], |acc, &t| self.lca(acc, t));

        let mut path = BTreeSet::new();
        for &t in &tokens {
            let mut cur = t;
            loop {
                if !path.insert(cur) || cur == lca {
                    break;
                }
                cur = self.parent[cur].expect("lca is an ancestor");
            }
        }
        path.insert(lca);
        Ok((lca, path))
    }

    /// Path-centric pruning: keep LCA-subtree nodes within `k` tree edges of
    /// the dependency path.
    pub fn prune(&self, subj: Span, obj: Span, k: PruneK) -> Result<PruneResult, TreeError> {
        let (lca, path_nodes) = self.lca_and_path(subj, obj)?;
        let n = self.len();
        let allowed: Vec<bool> = match k {
            PruneK::Full => vec![true; n],
            _ => (0..n).map(|v| self.in_subtree(lca, v)).collect(),
        };

        let mut dist: Vec<Option<usize>> = vec![None; n];
        let mut queue = VecDeque::new();
        for &p in &path_nodes {
            dist[p] = Some(0);
            queue.push_back(p);
        }
        let cap = match k {
            PruneK::Dist(k) => k,
            _ => usize::MAX,
        };
        while let Some(u) = queue.pop_front() {
            let du = dist[u].expect("queued nodes have a distance");
            if du >= cap {
                continue;
            }
            for v in self.neighbors(u) {
                if allowed[v] && dist[v].is_none() {
                    dist[v] = Some(du + 1);
                    queue.push_back(v);
                }
            }
        }
        let kept: BTreeSet<usize> = (0..n).filter(|&v| dist[v].is_some()).collect();
        Ok(PruneResult { k, lca, path_nodes, kept, dist })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PruneResult {
    pub k: PruneK,
    pub lca: usize,
    pub path_nodes: BTreeSet<usize>,
    pub kept: BTreeSet<usize>,
    /// Distance to the nearest path node, for kept nodes only.
    pub dist: Vec<Option<usize>>,
}

impl PruneResult {
    pub fn kept_fraction(&self) -> f64 {
        self.kept.len() as f64 / self.dist.len() as f64
    }
}

/// Adjacency over the kept nodes in compact (sentence-ascending) order.
#[derive(Debug, Clone, PartialEq)]
pub struct Adjacency {
    /// Compact index to sentence position.
    pub node_order: Vec<usize>,
    /// Symmetric 0/1 matrix without self-loops.
    pub adj: Tensor,
    /// `adj` plus the identity.
    pub adj_self: Tensor,
    pub degree: Vec<f64>,
}

impl Adjacency {
    pub fn len(&self) -> usize {
        self.node_order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_order.is_empty()
    }

    /// Identity structure over the same nodes (dependency edges removed).
    pub fn identity(node_order: Vec<usize>) -> Self {
        let m = node_order.len();
        Adjacency {
            node_order,
            adj: Tensor::zeros(&[m, m]),
            adj_self: Tensor::identity(m),
            degree: vec![1.0; m],
        }
    }
}

/// Undirected parent-child adjacency restricted to the kept nodes, with
/// self-loops and degrees.
pub fn build_adjacency(prune: &PruneResult, tree: &DepTree) -> Result<Adjacency, TreeError> {
    if prune.kept.is_empty() {
        return Err(TreeError::EmptyKept);
    }
    let node_order: Vec<usize> = prune.kept.iter().copied().collect();
    let m = node_order.len();
    let mut compact = vec![usize::MAX; tree.len()];
    for (i, &v) in node_order.iter().enumerate() {
        compact[v] = i;
    }
    let mut adj = Tensor::zeros(&[m, m]);
    for (i, &v) in node_order.iter().enumerate() {
        if let Some(p) = tree.parent(v) {
            let j = compact[p];
            if j != usize::MAX {
                adj.set2(i, j, 1.0);
                adj.set2(j, i, 1.0);
            }
        }
    }
    let mut adj_self = adj.clone();
    for i in 0..m {
        adj_self.set2(i, i, adj_self.get2(i, i) + 1.0);
    }
    let degree = (0..m).map(|i| adj_self.row(i).iter().sum()).collect();
    Ok(Adjacency { node_order, adj, adj_self, degree })
}

/// Edges of the pruned tree as (head, dependent) sentence positions.
pub fn kept_edges(prune: &PruneResult, tree: &DepTree) -> Vec<(usize, usize)> {
    prune
        .kept
        .iter()
        .filter_map(|&v| tree.parent(v).filter(|p| prune.kept.contains(p)).map(|p| (p, v)))
        .collect()
}
