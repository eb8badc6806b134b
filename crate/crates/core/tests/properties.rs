mod common;

use proptest::prelude::*;
use rand::Rng;
use relgcn::data::{encode, mask_entities, VocabOptions};
use relgcn::model::{argmax, forward, init_params, random_example, token_contributions};
use relgcn::rng::seeded;
use relgcn::tensor::{grad_check, softmax_rows, GradCheckOptions, ParamStore, Tape, Tensor, TensorError};
use relgcn::train::{build_vocab, evaluate_micro, interpolate, synthetic_dataset, LrSchedule};
use relgcn::tree::build_adjacency;
use relgcn::{
    DepTree, Example, MaskMode, ModelConfig, PredictionSet, PreparedExample, PruneK, Span, TrainConfig, Variant,
};

use common::{prune_oracle, random_heads, random_spans};

/// Heads and a disjoint span pair drawn from a seed, `n` in `2..=max`.
fn tree_case(max: usize) -> impl Strategy<Value = (Vec<usize>, Span, Span)> {
    (2..=max, any::<u64>()).prop_map(|(n, seed)| {
        let mut rng = seeded(seed);
        let heads = random_heads(n, &mut rng);
        let (s, o) = random_spans(n, &mut rng);
        (heads, s, o)
    })
}

fn prune_k() -> impl Strategy<Value = PruneK> {
    prop_oneof![(0usize..5).prop_map(PruneK::Dist), Just(PruneK::Inf), Just(PruneK::Full)]
}

fn example_case() -> impl Strategy<Value = Example> {
    (tree_case(15), any::<u64>()).prop_map(|((heads, subj, obj), seed)| {
        let mut rng = seeded(seed);
        let n = heads.len();
        let words = ["the", "a", "of", "met", "in", "Paris"];
        let pick = |rng: &mut relgcn::rng::RunRng, from: &[&str]| from[rng.gen_range(0..from.len())].to_string();
        Example {
            id: format!("e{seed}"),
            tokens: (0..n).map(|_| pick(&mut rng, &words)).collect(),
            pos: (0..n).map(|_| pick(&mut rng, &["NN", "DT", "IN"])).collect(),
            ner: (0..n).map(|_| pick(&mut rng, &["O", "PERSON", "CITY"])).collect(),
            heads,
            deprels: vec!["dep".into(); n],
            subj,
            obj,
            subj_type: pick(&mut rng, &["PERSON", "ORGANIZATION"]),
            obj_type: pick(&mut rng, &["CITY", "PERSON"]),
            relation: pick(&mut rng, &["no_relation", "per:city"]),
        }
    })
}

proptest! {
    #[test]
    fn prune_matches_oracle((heads, s, o) in tree_case(25), k in prune_k()) {
        let tree = DepTree::from_heads(&heads).unwrap();
        let got = tree.prune(s, o, k).unwrap();
        let want = prune_oracle(&heads, s, o, k);
        prop_assert_eq!(got.lca, want.lca);
        prop_assert_eq!(&got.path_nodes, &want.path);
        prop_assert_eq!(&got.kept, &want.kept);
        for v in 0..heads.len() {
            prop_assert_eq!(got.dist[v], got.kept.contains(&v).then_some(want.dist[v]));
        }
    }

    #[test]
    fn pruning_is_monotone((heads, s, o) in tree_case(25)) {
        let tree = DepTree::from_heads(&heads).unwrap();
        let ks = [PruneK::Dist(0), PruneK::Dist(1), PruneK::Dist(2), PruneK::Dist(5), PruneK::Inf, PruneK::Full];
        let results: Vec<_> = ks.iter().map(|&k| tree.prune(s, o, k).unwrap()).collect();
        prop_assert_eq!(&results[0].kept, &results[0].path_nodes);
        for w in results.windows(2) {
            prop_assert!(w[0].kept.is_subset(&w[1].kept));
        }
        prop_assert_eq!(results[5].kept.len(), heads.len());
        for r in &results[..4] {
            if let PruneK::Dist(k) = r.k {
                prop_assert!(r.kept.iter().all(|&v| r.dist[v].unwrap() <= k));
            }
        }
    }

    #[test]
    fn pruning_ignores_entity_order((heads, s, o) in tree_case(25), k in prune_k()) {
        let tree = DepTree::from_heads(&heads).unwrap();
        let a = tree.prune(s, o, k).unwrap();
        let b = tree.prune(o, s, k).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn adjacency_is_well_formed((heads, s, o) in tree_case(20), k in prune_k()) {
        let tree = DepTree::from_heads(&heads).unwrap();
        let pr = tree.prune(s, o, k).unwrap();
        let adj = build_adjacency(&pr, &tree).unwrap();
        let m = adj.len();
        prop_assert_eq!(adj.node_order.clone(), pr.kept.iter().copied().collect::<Vec<_>>());
        let mut edges = 0;
        for i in 0..m {
            prop_assert_eq!(adj.adj_self.get2(i, i), 1.0);
            prop_assert_eq!(adj.degree[i], adj.adj_self.row(i).iter().sum::<f64>());
            for j in 0..m {
                prop_assert_eq!(adj.adj_self.get2(i, j), adj.adj_self.get2(j, i));
                let linked = tree.parent(adj.node_order[i]) == Some(adj.node_order[j])
                    || tree.parent(adj.node_order[j]) == Some(adj.node_order[i]);
                prop_assert_eq!(adj.adj.get2(i, j), if linked { 1.0 } else { 0.0 });
                if j > i && linked {
                    edges += 1;
                }
            }
        }
        // The kept set is connected, so its induced graph is a tree.
        prop_assert_eq!(edges, m - 1);
    }

    #[test]
    fn masking_preserves_structure(ex in example_case()) {
        for mode in [MaskMode::Typed, MaskMode::Unk, MaskMode::None] {
            let m = mask_entities(&ex, mode);
            prop_assert_eq!(m.tokens.len(), ex.tokens.len());
            prop_assert_eq!(&m.heads, &ex.heads);
            prop_assert_eq!((m.subj, m.obj), (ex.subj, ex.obj));
            prop_assert_eq!(&m.relation, &ex.relation);
            prop_assert_eq!(&m.pos, &ex.pos);
            for i in 0..ex.len() {
                if !ex.subj.contains(i) && !ex.obj.contains(i) {
                    prop_assert_eq!(&m.tokens[i], &ex.tokens[i]);
                }
            }
            prop_assert_eq!(mask_entities(&m, mode), m);
        }
    }

    #[test]
    fn encoding_is_deterministic_and_in_range(batch in prop::collection::vec(example_case(), 1..6)) {
        let vocab = build_vocab(&batch, &[], MaskMode::Typed, &VocabOptions::default()).unwrap();
        let again = build_vocab(&batch, &[], MaskMode::Typed, &VocabOptions::default()).unwrap();
        prop_assert_eq!(&vocab, &again);
        for ex in &batch {
            let masked = mask_entities(ex, MaskMode::Typed);
            let a = encode(&masked, &vocab).unwrap();
            prop_assert_eq!(&a, &encode(&masked, &vocab).unwrap());
            prop_assert!(a.words.iter().all(|&w| w < vocab.words.len()));
            prop_assert!(a.pos.iter().all(|&p| p < vocab.pos.len()));
            prop_assert!(a.ner.iter().all(|&t| t < vocab.ner.len()));
            prop_assert!(a.label.unwrap() < vocab.labels().len());
        }
    }
}

fn random_tensor(rows: usize, cols: usize, rng: &mut impl Rng) -> Tensor {
    Tensor::new(&[rows, cols], (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn smooth_chain_matches_finite_differences(
        rows in 1usize..4, inner in 1usize..4, cols in 2usize..4, seed in any::<u64>()
    ) {
        let mut rng = seeded(seed);
        let mut store = ParamStore::new();
        store.insert("x", random_tensor(rows, inner, &mut rng), true).unwrap();
        store.insert("w", random_tensor(inner, cols, &mut rng), true).unwrap();
        store.insert("b", random_tensor(1, cols, &mut rng), true).unwrap();
        let labels: Vec<usize> = (0..rows).map(|_| rng.gen_range(0..cols)).collect();
        let report = grad_check(&mut store, &GradCheckOptions::default(), |t| {
            let (x, w, b) = (t.param_named("x")?, t.param_named("w")?, t.param_named("b")?);
            let z = t.matmul(x, w)?;
            let z = t.add_bias(z, b)?;
            let s = t.sigmoid(z)?;
            let h = t.tanh(z)?;
            let p = t.hadamard(s, h)?;
            let (ce, _) = t.softmax_cross_entropy(p, &labels)?;
            let reg = t.sum_of_squares(h)?;
            let reg = t.scale(reg, 0.1)?;
            t.add(ce, reg)
        })
        .map_err(|e: TensorError| TestCaseError::fail(e.to_string()))?;
        prop_assert!(report.max_rel_error < 1e-6, "{}", report.max_rel_error);
    }

    #[test]
    fn eval_dropout_is_identity(rows in 1usize..5, cols in 1usize..5, p in 0.0f64..0.9, seed in any::<u64>()) {
        let x = random_tensor(rows, cols, &mut seeded(seed));
        let store = ParamStore::new();
        let mut tape = Tape::new(&store);
        let v = tape.constant(x.clone()).unwrap();
        let out = tape.dropout(v, p, None::<&mut relgcn::rng::RunRng>).unwrap();
        prop_assert_eq!(tape.value(out), &x);
    }

    #[test]
    fn clipping_preserves_direction(scale in 0.01f64..100.0, max_norm in 0.1f64..10.0, seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let mut store = ParamStore::new();
        let id = store.insert("w", random_tensor(3, 3, &mut rng), true).unwrap();
        let before = store.value(id).clone();
        let g = random_tensor(3, 3, &mut rng).map(|v| v * scale);
        store.get_mut(id).grad = g.clone();
        let norm = store.clip_and_step(1.0, max_norm).unwrap();
        let expected_norm = g.sum_of_squares().sqrt();
        prop_assert!((norm - expected_norm).abs() <= 1e-12 * expected_norm);
        let factor = if norm > max_norm { max_norm / norm } else { 1.0 };
        for ((a, b), gi) in before.data().iter().zip(store.value(id).data()).zip(g.data()) {
            let step = a - b;
            prop_assert!((step - factor * gi).abs() <= 1e-12 * (1.0 + gi.abs()));
        }
        prop_assert!(store.get(id).grad.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn schedule_only_decays(
        scores in prop::collection::vec(0.0f64..1.0, 1..30),
        decay in 0.5f64..=1.0,
        anneal_from in 1usize..10,
    ) {
        let config = TrainConfig { lr: 0.7, decay, anneal_from_epoch: anneal_from, ..TrainConfig::default() };
        let mut schedule = LrSchedule::new(&config);
        let mut best: Option<f64> = None;
        let mut decays = 0;
        for (i, &s) in scores.iter().enumerate() {
            let epoch = i + 1;
            let before = schedule.lr();
            let improved = schedule.observe(epoch, s);
            prop_assert_eq!(improved, best.is_none_or(|b| s > b));
            if improved {
                best = Some(s);
            } else if epoch >= anneal_from {
                decays += 1;
            }
            prop_assert!(schedule.lr() <= before);
            let mut want = 0.7;
            for _ in 0..decays {
                want *= decay;
            }
            prop_assert_eq!(schedule.lr(), want);
        }
    }
}

const SIZES: (usize, usize, usize, usize) = (12, 5, 5, 3);

fn model_case() -> impl Strategy<Value = (Variant, PruneK, u64)> {
    (prop_oneof![Just(Variant::Gcn), Just(Variant::Cgcn)], prune_k(), any::<u64>())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn eval_forward_is_pure_and_consistent((variant, k, seed) in model_case(), n in 2usize..10) {
        let config = ModelConfig { prune_k: k, ..ModelConfig::tiny(variant) };
        let mut rng = seeded(seed);
        let store = init_params(&config, SIZES, None, &mut rng).unwrap();
        let prepared = PreparedExample::new(random_example(n, &mut rng), &config).unwrap();
        let run = || {
            let mut tape = Tape::new(&store);
            let out = forward(&mut tape, &config, &[&prepared], None).unwrap();
            let v = |x| tape.value(x).clone();
            (v(out.logits), v(out.h_sent), v(out.h_subj), v(out.h_obj), out.traces)
        };
        let (logits, h_sent, h_subj, h_obj, traces) = run();
        let again = run();
        prop_assert_eq!(&logits, &again.0);
        prop_assert_eq!(&traces, &again.4);

        let probs = softmax_rows(&logits);
        prop_assert!((probs.row(0).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for ((s, e), h) in h_subj.data().iter().zip(h_obj.data()).zip(h_sent.data()) {
            prop_assert!(s <= h && e <= h);
        }
        let counts = token_contributions(&traces[0], n);
        prop_assert_eq!(counts.iter().sum::<usize>(), config.gcn_hidden);
        for (t, &c) in counts.iter().enumerate() {
            if c > 0 {
                prop_assert!(prepared.prune.kept.contains(&t));
            }
        }
    }

    #[test]
    fn micro_f1_ignores_example_order(
        pairs in prop::collection::vec((0usize..4, 0usize..4), 1..40),
        seed in any::<u64>(),
    ) {
        use rand::seq::SliceRandom;
        let labels: Vec<String> = ["no_relation", "a", "b", "c"].map(String::from).to_vec();
        let (pred, gold): (Vec<usize>, Vec<usize>) = pairs.iter().copied().unzip();
        let base = evaluate_micro(&pred, &gold, &labels, 0, None).unwrap();
        let mut shuffled = pairs.clone();
        shuffled.shuffle(&mut seeded(seed));
        let (p2, g2): (Vec<usize>, Vec<usize>) = shuffled.into_iter().unzip();
        let other = evaluate_micro(&p2, &g2, &labels, 0, None).unwrap();
        prop_assert_eq!(base.f1, other.f1);
        prop_assert_eq!(base.precision, other.precision);
        prop_assert_eq!(base.recall, other.recall);
        prop_assert!((0.0..=1.0).contains(&base.f1));
    }

    #[test]
    fn interpolation_stays_normalized(seed in any::<u64>(), alpha in 0.0f64..=1.0) {
        let mut rng = seeded(seed);
        let labels: Vec<String> = ["no_relation", "a", "b"].map(String::from).to_vec();
        let rows = |rng: &mut relgcn::rng::RunRng| -> Vec<(String, Vec<f64>)> {
            (0..10)
                .map(|i| {
                    let logits = random_tensor(1, 3, rng).map(|v| v * 4.0);
                    (format!("x{i}"), softmax_rows(&logits).row(0).to_vec())
                })
                .collect()
        };
        let a = PredictionSet::new(labels.clone(), rows(&mut rng)).unwrap();
        let b = PredictionSet::new(labels, rows(&mut rng)).unwrap();
        let mixed = interpolate(&a, &b, alpha).unwrap();
        for (_, p) in &mixed.rows {
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
        let same = interpolate(&a, &a, alpha).unwrap();
        for ((_, p), (_, q)) in same.rows.iter().zip(&a.rows) {
            prop_assert_eq!(argmax(p), argmax(q));
        }
    }
}

#[test]
fn synthetic_batches_match_single_examples() {
    let data = synthetic_dataset(12, 4);
    let vocab = build_vocab(&data, &[], MaskMode::Typed, &VocabOptions::default()).unwrap();
    let config = ModelConfig::tiny(Variant::Cgcn);
    let model = relgcn::train::init_model(config, vocab, MaskMode::Typed, None, 2).unwrap();
    let prepared = model.prepare_all(&data).unwrap();
    let all = model.predict_proba(&prepared, 5).unwrap();
    for (ex, row) in prepared.iter().zip(&all) {
        let single = model.predict_batch(&[ex]).unwrap();
        for (a, b) in single.row(0).iter().zip(row) {
            assert!((a - b).abs() <= 1e-10);
        }
    }
}
