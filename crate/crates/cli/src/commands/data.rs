use std::collections::BTreeMap;

use relgcn::data::DataError;
use relgcn::train::{bucket_name, bucket_of, DISTANCE_BUCKETS};
use relgcn::{DepTree, Example, PruneK, PruneResult};
use serde::Serialize;

use super::{load_input, output, print_json, write_json_line};
use crate::args::{PruneArgs, StatsArgs};
use crate::error::CliResult;

#[derive(Serialize)]
struct PruneRecord<'a> {
    id: &'a str,
    k: PruneK,
    lca: usize,
    path_nodes: Vec<usize>,
    kept: Vec<usize>,
    /// Distance to the path for each entry of `kept`.
    dist: Vec<usize>,
}

#[derive(Serialize)]
struct KeptFraction {
    k: PruneK,
    mean_kept_fraction: f64,
}

fn one_based(nodes: impl IntoIterator<Item = usize>) -> Vec<usize> {
    nodes.into_iter().map(|i| i + 1).collect()
}

fn pruned(ex: &Example, tree: &DepTree, k: PruneK) -> CliResult<PruneResult> {
    Ok(tree.prune(ex.subj, ex.obj, k).map_err(|source| DataError::InvalidTree { id: ex.id.clone(), source })?)
}

fn mean_kept(examples: &[Example], ks: &[PruneK]) -> CliResult<Vec<KeptFraction>> {
    let mut sums = vec![0.0; ks.len()];
    for ex in examples {
        let tree = ex.validate()?;
        for (sum, &k) in sums.iter_mut().zip(ks) {
            *sum += pruned(ex, &tree, k)?.kept_fraction();
        }
    }
    let n = examples.len().max(1) as f64;
    Ok(ks.iter().zip(sums).map(|(&k, s)| KeptFraction { k, mean_kept_fraction: s / n }).collect())
}

pub fn prune(args: &PruneArgs) -> CliResult<()> {
    let examples = load_input(&args.input)?;
    let mut out = output(args.out.as_ref())?;
    for ex in &examples {
        let tree = ex.validate()?;
        for &k in &args.k {
            let r = pruned(ex, &tree, k)?;
            let record = PruneRecord {
                id: &ex.id,
                k,
                lca: r.lca + 1,
                path_nodes: one_based(r.path_nodes.iter().copied()),
                kept: one_based(r.kept.iter().copied()),
                dist: r.kept.iter().map(|&v| r.dist[v].expect("kept nodes have a distance")).collect(),
            };
            write_json_line(&mut out, &record)?;
        }
    }
    #[derive(Serialize)]
    struct Summary {
        examples: usize,
        mean_kept_fraction: Vec<KeptFraction>,
    }
    let summary = Summary { examples: examples.len(), mean_kept_fraction: mean_kept(&examples, &args.k)? };
    write_json_line(&mut out, &serde_json::json!({ "summary": summary }))?;
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct LengthStats {
    min: usize,
    max: usize,
    mean: f64,
}

#[derive(Serialize)]
struct BucketCount {
    bucket: String,
    examples: usize,
}

#[derive(Serialize)]
struct Stats {
    examples: usize,
    tokens: LengthStats,
    labels: BTreeMap<String, usize>,
    entity_types: BTreeMap<String, usize>,
    entity_distance: Vec<BucketCount>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    mean_kept_fraction: Vec<KeptFraction>,
}

pub fn stats(args: &StatsArgs) -> CliResult<()> {
    let examples = load_input(&args.input)?;
    let lens: Vec<usize> = examples.iter().map(Example::len).collect();
    let mut labels = BTreeMap::new();
    let mut entity_types = BTreeMap::new();
    let mut buckets = vec![0; DISTANCE_BUCKETS.len()];
    for ex in &examples {
        *labels.entry(ex.relation.clone()).or_default() += 1;
        *entity_types.entry(format!("SUBJ-{}", ex.subj_type)).or_default() += 1;
        *entity_types.entry(format!("OBJ-{}", ex.obj_type)).or_default() += 1;
        buckets[bucket_of(ex.entity_distance())] += 1;
    }
    let stats = Stats {
        examples: examples.len(),
        tokens: LengthStats {
            min: lens.iter().copied().min().unwrap_or(0),
            max: lens.iter().copied().max().unwrap_or(0),
            mean: lens.iter().sum::<usize>() as f64 / lens.len().max(1) as f64,
        },
        labels,
        entity_types,
        entity_distance: buckets
            .into_iter()
            .enumerate()
            .map(|(i, n)| BucketCount { bucket: bucket_name(i), examples: n })
            .collect(),
        mean_kept_fraction: mean_kept(&examples, &args.k)?,
    };
    print_json(&stats)
}
