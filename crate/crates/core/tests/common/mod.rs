//! Random trees and a brute-force pruning oracle shared by the integration
//! tests. Nothing here calls into the tree module.

#![allow(dead_code)]

use std::collections::{BTreeSet, VecDeque};

use rand::seq::SliceRandom;
use rand::Rng;
use relgcn::{PruneK, Span};

/// 1-based heads of a uniformly shuffled random recursive tree.
pub fn random_heads(n: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut heads = vec![0; n];
    for k in 1..n {
        heads[order[k]] = order[rng.gen_range(0..k)] + 1;
    }
    heads
}

/// Two disjoint non-empty spans in `0..n` (requires `n >= 2`), in random order.
pub fn random_spans(n: usize, rng: &mut impl Rng) -> (Span, Span) {
    let split = rng.gen_range(1..n);
    let a0 = rng.gen_range(0..split);
    let a1 = rng.gen_range(a0..split);
    let b0 = rng.gen_range(split..n);
    let b1 = rng.gen_range(b0..n);
    let (a, b) = (Span::new(a0, a1), Span::new(b0, b1));
    if rng.gen() {
        (a, b)
    } else {
        (b, a)
    }
}

pub struct Oracle {
    pub lca: usize,
    pub path: BTreeSet<usize>,
    pub kept: BTreeSet<usize>,
    /// Whole-tree BFS distance from the path, for every node.
    pub dist: Vec<usize>,
}

fn parent(heads: &[usize], v: usize) -> Option<usize> {
    heads[v].checked_sub(1)
}

fn ancestors(heads: &[usize], v: usize) -> Vec<usize> {
    let mut out = vec![v];
    let mut cur = v;
    while let Some(p) = parent(heads, cur) {
        out.push(p);
        cur = p;
    }
    out
}

pub fn prune_oracle(heads: &[usize], subj: Span, obj: Span, k: PruneK) -> Oracle {
    let n = heads.len();
    let tokens: Vec<usize> = subj.tokens().chain(obj.tokens()).collect();
    let chains: Vec<Vec<usize>> = tokens.iter().map(|&t| ancestors(heads, t)).collect();
    let common: BTreeSet<usize> =
        (0..n).filter(|v| chains.iter().all(|c| c.contains(v))).collect();
    let lca = *common.iter().max_by_key(|&&v| ancestors(heads, v).len()).expect("root is common");

    let mut path = BTreeSet::new();
    for c in &chains {
        for &v in c {
            path.insert(v);
            if v == lca {
                break;
            }
        }
    }

    let mut adj = vec![Vec::new(); n];
    for v in 0..n {
        if let Some(p) = parent(heads, v) {
            adj[v].push(p);
            adj[p].push(v);
        }
    }
    let mut dist = vec![usize::MAX; n];
    let mut queue: VecDeque<usize> = path.iter().copied().collect();
    for &p in &path {
        dist[p] = 0;
    }
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }

    let under_lca = |v: usize| ancestors(heads, v).contains(&lca);
    let kept = (0..n)
        .filter(|&v| match k {
            PruneK::Full => true,
            PruneK::Inf => under_lca(v),
            PruneK::Dist(k) => under_lca(v) && dist[v] <= k,
        })
        .collect();
    Oracle { lca, path, kept, dist }
}
