//! Small generated datasets whose label is decided by the word at the
//! lowest common ancestor of the two entities.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::data::Example;
use crate::rng::seeded;
use crate::tree::{DepTree, Span};

pub const SYNTHETIC_LABELS: [&str; 3] = ["no_relation", "per:spouse", "org:founded_by"];
const TRIGGERS: [&str; 3] = ["met", "married", "founded"];
const FILLERS: [&str; 10] = ["the", "a", "in", "and", "with", "yesterday", "city", "company", "report", "later"];

/// `count` examples with 6 to 12 tokens, labels cycling through
/// [`SYNTHETIC_LABELS`].
pub fn synthetic_dataset(count: usize, seed: u64) -> Vec<Example> {
    let mut rng = seeded(seed);
    (0..count).map(|i| synthetic_example(&format!("syn{i}"), i % TRIGGERS.len(), &mut rng)).collect()
}

fn synthetic_example(id: &str, label: usize, rng: &mut impl Rng) -> Example {
    loop {
        let n = rng.gen_range(6..=12);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        let mut heads = vec![0; n];
        for k in 1..n {
            heads[order[k]] = order[rng.gen_range(0..k)] + 1;
        }
        let tree = DepTree::from_heads(&heads).expect("generated tree is valid");
        let s = rng.gen_range(0..n);
        let o = rng.gen_range(0..n);
        let lca = tree.lca(s, o);
        if s == o || lca == s || lca == o {
            continue;
        }
        let mut tokens: Vec<String> = (0..n).map(|_| FILLERS.choose(rng).unwrap().to_string()).collect();
        tokens[lca] = TRIGGERS[label].to_string();
        tokens[s] = "Alice".into();
        tokens[o] = "Acme".into();
        let pos = (0..n).map(|t| if t == lca { "VBD" } else if t == s || t == o { "NNP" } else { "NN" }.to_string()).collect();
        let ner = (0..n).map(|t| if t == s { "PERSON" } else if t == o { "ORGANIZATION" } else { "O" }.to_string()).collect();
        let deprels = heads.iter().map(|&h| if h == 0 { "root" } else { "dep" }.to_string()).collect();
        return Example {
            id: id.to_string(),
            tokens,
            pos,
            ner,
            heads,
            deprels,
            subj: Span::new(s, s),
            obj: Span::new(o, o),
            subj_type: "PERSON".into(),
            obj_type: "ORGANIZATION".into(),
            relation: SYNTHETIC_LABELS[label].to_string(),
        };
    }
}
