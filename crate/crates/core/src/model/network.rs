//! Forward pass of the GCN / C-GCN relation classifier.
//!
//! Every forward call works on a batch. Sentences are padded to the longest
//! one in the batch and pruned graphs to the largest kept set; padding rows
//! are excluded from pooling and have no graph edges, so the result for an
//! example does not depend on what else is in its batch.
//!
//! Row layouts:
//! * token rows for the BiLSTM are time-major, `t * B + b`;
//! * graph rows are example-major, `b * N + k` with `k` a compact kept index.

use rand::Rng;

use super::{ModelConfig, ModelError, Variant};
use crate::data::IndexedExample;
use crate::rng::RunRng;
use crate::tensor::{GraphBlock, ParamStore, Tape, Tensor, TensorError, Var};
use crate::tree::{build_adjacency, Adjacency, DepTree, PruneResult};

/// An indexed example together with its pruned graph.
#[derive(Debug, Clone)]
pub struct PreparedExample {
    pub example: IndexedExample,
    pub tree: DepTree,
    pub prune: PruneResult,
    pub graph: Adjacency,
    /// Compact graph rows holding subject / object tokens.
    pub subj_rows: Vec<usize>,
    pub obj_rows: Vec<usize>,
}

impl PreparedExample {
    pub fn new(example: IndexedExample, config: &ModelConfig) -> Result<Self, ModelError> {
        let tree = DepTree::from_heads(&example.heads)?;
        let prune = tree.prune(example.subj, example.obj, config.prune_k)?;
        let graph = if config.use_dependency {
            build_adjacency(&prune, &tree)?
        } else {
            Adjacency::identity(prune.kept.iter().copied().collect())
        };
        let rows_of = |span: crate::tree::Span| -> Vec<usize> {
            graph.node_order.iter().enumerate().filter(|(_, &v)| span.contains(v)).map(|(k, _)| k).collect()
        };
        let subj_rows = rows_of(example.subj);
        let obj_rows = rows_of(example.obj);
        if subj_rows.is_empty() || obj_rows.is_empty() {
            return Err(ModelError::EmptyEntity(example.id.clone()));
        }
        Ok(PreparedExample { example, tree, prune, graph, subj_rows, obj_rows })
    }

    pub fn kept_len(&self) -> usize {
        self.graph.len()
    }
}

/// For each pooled dimension of `h_sent`, the compact row that won the max.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolTrace {
    pub argmax_rows: Vec<usize>,
    pub node_order: Vec<usize>,
}

pub struct Forward {
    pub logits: Var,
    pub h_sent: Var,
    pub h_subj: Var,
    pub h_obj: Var,
    pub traces: Vec<PoolTrace>,
}

fn p(tape: &mut Tape<'_>, name: &str) -> Result<Var, TensorError> {
    tape.param_named(name)
}

/// One graph convolution: `ReLU((adj · H W) / degree + b)`, row-normalized
/// per block.
pub fn gcn_layer(tape: &mut Tape<'_>, h: Var, blocks: &[GraphBlock], w: Var, b: Var) -> Result<Var, TensorError> {
    let hw = tape.matmul(h, w)?;
    let agg = tape.graph_aggregate(hw, blocks.to_vec())?;
    let pre = tape.add_bias(agg, b)?;
    tape.relu(pre)
}

/// Stacks `layers.len()` graph convolutions, with dropout after all but the
/// last when an RNG is supplied.
pub fn encode_gcn(
    tape: &mut Tape<'_>,
    h0: Var,
    blocks: &[GraphBlock],
    layers: &[(Var, Var)],
    dropout: f64,
    mut rng: Option<&mut RunRng>,
) -> Result<Var, TensorError> {
    let mut h = h0;
    for (l, &(w, b)) in layers.iter().enumerate() {
        h = gcn_layer(tape, h, blocks, w, b)?;
        if l + 1 < layers.len() {
            h = tape.dropout(h, dropout, rng.as_deref_mut())?;
        }
    }
    Ok(h)
}

/// Parameter names of one LSTM direction.
pub struct LstmParams {
    pub wx: Var,
    pub wh: Var,
    pub b: Var,
}

impl LstmParams {
    pub fn load(tape: &mut Tape<'_>, prefix: &str) -> Result<Self, TensorError> {
        Ok(LstmParams {
            wx: p(tape, &format!("{prefix}.wx"))?,
            wh: p(tape, &format!("{prefix}.wh"))?,
            b: p(tape, &format!("{prefix}.b"))?,
        })
    }
}

/// Runs one LSTM direction over time-major rows `x` (`steps * batch` rows).
/// `lengths[b]` is the sentence length of batch entry `b`; steps beyond it
/// leave the state untouched, so the reverse direction starts from a zero
/// state at each sentence's last token. Returns time-major hidden states.
pub fn lstm_direction(
    tape: &mut Tape<'_>,
    x: Var,
    lengths: &[usize],
    params: &LstmParams,
    reverse: bool,
) -> Result<Var, TensorError> {
    let batch = lengths.len();
    let steps = lengths.iter().copied().max().unwrap_or(0);
    let hidden = tape.value(params.wh).rows();
    let xw = tape.matmul(x, params.wx)?;
    let zero = Tensor::zeros(&[batch, hidden]);
    let mut h = tape.constant(zero.clone())?;
    let mut c = tape.constant(zero)?;
    let mut outputs = vec![h; steps];
    let order: Vec<usize> = if reverse { (0..steps).rev().collect() } else { (0..steps).collect() };
    for t in order {
        let rows: Vec<Option<usize>> = (0..batch).map(|b| Some(t * batch + b)).collect();
        let mask: Vec<bool> = lengths.iter().map(|&n| t < n).collect();
        let xt = tape.gather_rows(xw, &rows)?;
        let hh = tape.matmul(h, params.wh)?;
        let z = tape.add(xt, hh)?;
        let z = tape.add_bias(z, params.b)?;
        let zi = tape.slice_cols(z, 0, hidden)?;
        let zf = tape.slice_cols(z, hidden, hidden)?;
        let zg = tape.slice_cols(z, 2 * hidden, hidden)?;
        let zo = tape.slice_cols(z, 3 * hidden, hidden)?;
        let i = tape.sigmoid(zi)?;
        let f = tape.sigmoid(zf)?;
        let g = tape.tanh(zg)?;
        let o = tape.sigmoid(zo)?;
        let fc = tape.hadamard(f, c)?;
        let ig = tape.hadamard(i, g)?;
        let c_new = tape.add(fc, ig)?;
        let tc = tape.tanh(c_new)?;
        let h_new = tape.hadamard(o, tc)?;
        c = tape.row_select(&mask, c_new, c)?;
        h = tape.row_select(&mask, h_new, h)?;
        outputs[t] = h;
    }
    tape.concat_rows(&outputs)
}

/// Multi-channel token input `[word; pos; ner]` for the given rows; `None`
/// rows are zero padding.
fn embed_rows(
    tape: &mut Tape<'_>,
    batch: &[&PreparedExample],
    rows: &[Option<(usize, usize)>],
) -> Result<Var, TensorError> {
    let word = p(tape, "emb.word")?;
    let pos = p(tape, "emb.pos")?;
    let ner = p(tape, "emb.ner")?;
    let pick = |f: fn(&IndexedExample) -> &Vec<usize>| -> Vec<Option<usize>> {
        rows.iter().map(|r| r.map(|(b, t)| f(&batch[b].example)[t])).collect()
    };
    let w = tape.gather_rows(word, &pick(|e| &e.words))?;
    let ps = tape.gather_rows(pos, &pick(|e| &e.pos))?;
    let ns = tape.gather_rows(ner, &pick(|e| &e.ner))?;
    tape.concat_cols(&[w, ps, ns])
}

/// Full-sentence BiLSTM states, time-major, `[forward; backward]` per row.
pub fn contextualize(
    tape: &mut Tape<'_>,
    batch: &[&PreparedExample],
    dropout: f64,
    rng: Option<&mut RunRng>,
) -> Result<Var, TensorError> {
    let lengths: Vec<usize> = batch.iter().map(|e| e.example.len()).collect();
    let steps = lengths.iter().copied().max().unwrap_or(0);
    let rows: Vec<Option<(usize, usize)>> = (0..steps)
        .flat_map(|t| (0..batch.len()).map(move |b| (b, t)))
        .map(|(b, t)| (t < lengths[b]).then_some((b, t)))
        .collect();
    let x = embed_rows(tape, batch, &rows)?;
    let fwd = LstmParams::load(tape, "lstm.fwd")?;
    let bwd = LstmParams::load(tape, "lstm.bwd")?;
    let hf = lstm_direction(tape, x, &lengths, &fwd, false)?;
    let hb = lstm_direction(tape, x, &lengths, &bwd, true)?;
    let out = tape.concat_cols(&[hf, hb])?;
    tape.dropout(out, dropout, rng)
}

/// Padded square graph blocks, one per example.
pub fn graph_blocks(batch: &[&PreparedExample]) -> (Vec<GraphBlock>, usize) {
    let n = batch.iter().map(|e| e.kept_len()).max().unwrap_or(0);
    let blocks = batch
        .iter()
        .map(|e| {
            let m = e.kept_len();
            let mut adj = Tensor::zeros(&[n, n]);
            let mut degree = vec![1.0; n];
            for i in 0..m {
                adj.row_mut(i)[..m].copy_from_slice(e.graph.adj_self.row(i));
                degree[i] = e.graph.degree[i];
            }
            GraphBlock { adj, degree }
        })
        .collect();
    (blocks, n)
}

/// Forward pass to logits. Pass an RNG for training mode (dropout active).
pub fn forward(
    tape: &mut Tape<'_>,
    config: &ModelConfig,
    batch: &[&PreparedExample],
    mut rng: Option<&mut RunRng>,
) -> Result<Forward, TensorError> {
    let (blocks, n) = graph_blocks(batch);
    let graph_rows: Vec<Option<(usize, usize)>> = batch
        .iter()
        .enumerate()
        .flat_map(|(b, e)| (0..n).map(move |k| e.graph.node_order.get(k).map(|&t| (b, t))))
        .collect();

    let h0 = match config.variant {
        Variant::Cgcn => {
            let states = contextualize(tape, batch, config.dropout, rng.as_deref_mut())?;
            let bsz = batch.len();
            let ids: Vec<Option<usize>> = graph_rows.iter().map(|r| r.map(|(b, t)| t * bsz + b)).collect();
            tape.gather_rows(states, &ids)?
        }
        Variant::Gcn => {
            let x = embed_rows(tape, batch, &graph_rows)?;
            let w = p(tape, "input.w")?;
            let b = p(tape, "input.b")?;
            let xw = tape.matmul(x, w)?;
            tape.add_bias(xw, b)?
        }
    };

    let mut layers = Vec::with_capacity(config.gcn_layers);
    for l in 0..config.gcn_layers {
        layers.push((p(tape, &format!("gcn.{l}.w"))?, p(tape, &format!("gcn.{l}.b"))?));
    }
    let h = encode_gcn(tape, h0, &blocks, &layers, config.dropout, rng)?;
    pool_and_classify(tape, config, batch, h, n)
}

/// Max-pools sentence, subject and object vectors from graph outputs `h`
/// and applies the feed-forward head and the output layer.
pub fn pool_and_classify(
    tape: &mut Tape<'_>,
    config: &ModelConfig,
    batch: &[&PreparedExample],
    h: Var,
    block_rows: usize,
) -> Result<Forward, TensorError> {
    let offset = |b: usize, rows: &[usize]| -> Vec<usize> { rows.iter().map(|k| b * block_rows + k).collect() };
    let sent_groups: Vec<Vec<usize>> =
        batch.iter().enumerate().map(|(b, e)| (0..e.kept_len()).map(|k| b * block_rows + k).collect()).collect();
    let subj_groups: Vec<Vec<usize>> = batch.iter().enumerate().map(|(b, e)| offset(b, &e.subj_rows)).collect();
    let obj_groups: Vec<Vec<usize>> = batch.iter().enumerate().map(|(b, e)| offset(b, &e.obj_rows)).collect();

    let (h_sent, winners) = tape.masked_colmax(h, &sent_groups)?;
    let (h_subj, _) = tape.masked_colmax(h, &subj_groups)?;
    let (h_obj, _) = tape.masked_colmax(h, &obj_groups)?;
    let traces = winners
        .into_iter()
        .zip(batch)
        .enumerate()
        .map(|(b, (rows, e))| PoolTrace {
            argmax_rows: rows.into_iter().map(|r| r - b * block_rows).collect(),
            node_order: e.graph.node_order.clone(),
        })
        .collect();

    let mut x = if config.use_entity_pool { tape.concat_cols(&[h_sent, h_subj, h_obj])? } else { h_sent };
    for k in 0..config.ffnn_layers {
        let w = p(tape, &format!("ffnn.{k}.w"))?;
        let b = p(tape, &format!("ffnn.{k}.b"))?;
        let z = tape.matmul(x, w)?;
        let z = tape.add_bias(z, b)?;
        x = tape.relu(z)?;
    }
    let w = p(tape, "out.w")?;
    let b = p(tape, "out.b")?;
    let z = tape.matmul(x, w)?;
    let logits = tape.add_bias(z, b)?;
    Ok(Forward { logits, h_sent, h_subj, h_obj, traces })
}

/// Mean cross-entropy plus `beta` times the mean squared norm of `h_sent`.
pub fn loss(tape: &mut Tape<'_>, logits: Var, labels: &[usize], h_sent: Var, beta: f64) -> Result<Var, TensorError> {
    let (ce, _) = tape.softmax_cross_entropy(logits, labels)?;
    if beta == 0.0 {
        return Ok(ce);
    }
    let sq = tape.sum_of_squares(h_sent)?;
    let reg = tape.scale(sq, beta / labels.len() as f64)?;
    tape.add(ce, reg)
}

/// Parameter shapes implied by a configuration and vocabulary sizes, in
/// checkpoint order.
pub fn param_shapes(config: &ModelConfig, words: usize, pos: usize, ner: usize, labels: usize) -> Vec<(String, Vec<usize>)> {
    let mut shapes = vec![
        ("emb.word".to_string(), vec![words, config.word_dim]),
        ("emb.pos".to_string(), vec![pos, config.pos_dim]),
        ("emb.ner".to_string(), vec![ner, config.ner_dim]),
    ];
    match config.variant {
        Variant::Cgcn => {
            let hd = config.lstm_per_direction();
            for dir in ["fwd", "bwd"] {
                shapes.push((format!("lstm.{dir}.wx"), vec![config.input_dim(), 4 * hd]));
                shapes.push((format!("lstm.{dir}.wh"), vec![hd, 4 * hd]));
                shapes.push((format!("lstm.{dir}.b"), vec![1, 4 * hd]));
            }
        }
        Variant::Gcn => {
            shapes.push(("input.w".into(), vec![config.input_dim(), config.gcn_hidden]));
            shapes.push(("input.b".into(), vec![1, config.gcn_hidden]));
        }
    }
    let mut width = config.gcn_input_dim();
    for l in 0..config.gcn_layers {
        shapes.push((format!("gcn.{l}.w"), vec![width, config.gcn_hidden]));
        shapes.push((format!("gcn.{l}.b"), vec![1, config.gcn_hidden]));
        width = config.gcn_hidden;
    }
    width = if config.use_entity_pool { 3 * config.gcn_hidden } else { config.gcn_hidden };
    for k in 0..config.ffnn_layers {
        shapes.push((format!("ffnn.{k}.w"), vec![width, config.ffnn_hidden]));
        shapes.push((format!("ffnn.{k}.b"), vec![1, config.ffnn_hidden]));
        width = config.ffnn_hidden;
    }
    shapes.push(("out.w".into(), vec![width, labels]));
    shapes.push(("out.b".into(), vec![1, labels]));
    shapes
}

/// Fresh parameters: embeddings uniform on `±1/sqrt(dim)` with a zero PAD
/// row (word vectors may be supplied instead), matrices Glorot-uniform and
/// biases zero.
pub fn init_params(
    config: &ModelConfig,
    sizes: (usize, usize, usize, usize),
    word_vectors: Option<Tensor>,
    rng: &mut RunRng,
) -> Result<ParamStore, ModelError> {
    config.validate()?;
    let (words, pos, ner, labels) = sizes;
    let mut store = ParamStore::new();
    for (name, shape) in param_shapes(config, words, pos, ner, labels) {
        let value = if name.starts_with("emb.") {
            match (name.as_str(), &word_vectors) {
                ("emb.word", Some(v)) => {
                    if v.shape() != shape.as_slice() {
                        return Err(ModelError::Config(format!(
                            "word vectors have shape {:?}, expected {shape:?}",
                            v.shape()
                        )));
                    }
                    v.clone()
                }
                _ => crate::data::random_embeddings(shape[0], shape[1], rng.gen()),
            }
        } else if name.ends_with(".b") {
            Tensor::zeros(&shape)
        } else {
            crate::tensor::glorot_uniform(shape[0], shape[1], rng)
        };
        let trainable = name != "emb.word" || config.trainable_embeddings;
        store.insert(&name, value, trainable)?;
    }
    Ok(store)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use crate::tensor::{grad_check, GradCheckOptions};
    use crate::tree::{PruneK, Span};

    fn block(n: usize, edges: &[(usize, usize)]) -> GraphBlock {
        let mut adj = Tensor::identity(n);
        for &(a, b) in edges {
            adj.set2(a, b, 1.0);
            adj.set2(b, a, 1.0);
        }
        let degree = (0..n).map(|i| adj.row(i).iter().sum()).collect();
        GraphBlock { adj, degree }
    }

    fn run_layer(h: Tensor, blocks: &[GraphBlock], w: Tensor, b: Tensor) -> Tensor {
        let store = ParamStore::new();
        let mut tape = Tape::new(&store);
        let h = tape.constant(h).unwrap();
        let w = tape.constant(w).unwrap();
        let b = tape.constant(b).unwrap();
        let out = gcn_layer(&mut tape, h, blocks, w, b).unwrap();
        tape.value(out).clone()
    }

    #[test]
    fn two_connected_nodes_average() {
        let out = run_layer(Tensor::identity(2), &[block(2, &[(0, 1)])], Tensor::identity(2), Tensor::zeros(&[1, 2]));
        assert_eq!(out.data(), &[0.5, 0.5, 0.5, 0.5]);
    }

    #[test]
    fn constant_rows_are_a_fixed_point() {
        let h = Tensor::from_rows(&vec![vec![0.3, 1.2, 0.0]; 4]).unwrap();
        let out = run_layer(h.clone(), &[block(4, &[(0, 1), (1, 2), (1, 3)])], Tensor::identity(3), Tensor::zeros(&[1, 3]));
        for (a, b) in out.data().iter().zip(h.data()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn isolated_node_is_a_dense_layer() {
        let h = Tensor::from_rows(&[vec![1.0, -2.0]]).unwrap();
        let w = Tensor::from_rows(&[vec![1.0, 0.5], vec![0.25, 1.0]]).unwrap();
        let b = Tensor::row_vector(vec![0.1, 0.0]);
        let out = run_layer(h, &[block(1, &[])], w, b);
        assert_eq!(out.data(), &[0.6, 0.0]);
    }

    #[test]
    fn receptive_field_grows_one_hop_per_layer() {
        let chain = [block(5, &[(0, 1), (1, 2), (2, 3), (3, 4)])];
        let run = |first: f64| {
            let mut rows = vec![vec![1.0, 1.0]; 5];
            rows[0][0] = first;
            let store = ParamStore::new();
            let mut tape = Tape::new(&store);
            let h = tape.constant(Tensor::from_rows(&rows).unwrap()).unwrap();
            let layers: Vec<(Var, Var)> = (0..2)
                .map(|_| (tape.constant(Tensor::identity(2)).unwrap(), tape.constant(Tensor::zeros(&[1, 2])).unwrap()))
                .collect();
            let out = encode_gcn(&mut tape, h, &chain, &layers, 0.0, None).unwrap();
            tape.value(out).clone()
        };
        let (a, b) = (run(1.0), run(7.0));
        let changed: Vec<bool> = (0..5).map(|i| a.row(i) != b.row(i)).collect();
        assert_eq!(changed, vec![true, true, true, false, false]);
    }

    #[test]
    fn node_permutation_permutes_outputs() {
        let mut rng = seeded(11);
        let h = crate::tensor::glorot_uniform(4, 3, &mut rng);
        let w = crate::tensor::glorot_uniform(3, 3, &mut rng);
        let b = Tensor::row_vector(vec![0.1, 0.2, -0.1]);
        let edges = [(0, 1), (1, 2), (1, 3)];
        let perm = [2, 0, 3, 1];
        let out = run_layer(h.clone(), &[block(4, &edges)], w.clone(), b.clone());
        let ph = Tensor::from_rows(&(0..4).map(|i| h.row(perm[i]).to_vec()).collect::<Vec<_>>()).unwrap();
        let inv = |x: usize| perm.iter().position(|&p| p == x).unwrap();
        let pedges: Vec<(usize, usize)> = edges.iter().map(|&(a, c)| (inv(a), inv(c))).collect();
        let pout = run_layer(ph, &[block(4, &pedges)], w, b);
        for i in 0..4 {
            for (x, y) in pout.row(i).iter().zip(out.row(perm[i])) {
                assert!((x - y).abs() < 1e-14);
            }
        }
    }

    fn lstm_store(hidden: usize, input: usize, seed: u64, zero: bool) -> ParamStore {
        let mut rng = seeded(seed);
        let mut store = ParamStore::new();
        let mk = |r, c, rng: &mut RunRng| if zero { Tensor::zeros(&[r, c]) } else { crate::tensor::glorot_uniform(r, c, rng) };
        let wx = mk(input, 4 * hidden, &mut rng);
        let wh = mk(hidden, 4 * hidden, &mut rng);
        let b = mk(1, 4 * hidden, &mut rng);
        store.insert("l.wx", wx, true).unwrap();
        store.insert("l.wh", wh, true).unwrap();
        store.insert("l.b", b, true).unwrap();
        store
    }

    #[test]
    fn zero_weight_lstm_outputs_zero() {
        let store = lstm_store(3, 2, 0, true);
        let mut tape = Tape::new(&store);
        let x = tape.constant(Tensor::from_rows(&[vec![1.0, 2.0], vec![-1.0, 0.5]]).unwrap()).unwrap();
        let params = LstmParams::load(&mut tape, "l").unwrap();
        let h = lstm_direction(&mut tape, x, &[2], &params, false).unwrap();
        assert!(tape.value(h).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn reverse_direction_equals_forward_on_reversed_input() {
        let store = lstm_store(3, 2, 5, false);
        let rows = vec![vec![1.0, 2.0], vec![-1.0, 0.5], vec![0.3, -0.7]];
        let reversed: Vec<Vec<f64>> = rows.iter().rev().cloned().collect();
        let mut tape = Tape::new(&store);
        let params = LstmParams::load(&mut tape, "l").unwrap();
        let x = tape.constant(Tensor::from_rows(&rows).unwrap()).unwrap();
        let xr = tape.constant(Tensor::from_rows(&reversed).unwrap()).unwrap();
        let back = lstm_direction(&mut tape, x, &[3], &params, true).unwrap();
        let fwd = lstm_direction(&mut tape, xr, &[3], &params, false).unwrap();
        let (b, f) = (tape.value(back), tape.value(fwd));
        for t in 0..3 {
            assert_eq!(b.row(t), f.row(2 - t));
        }
    }

    #[test]
    fn padded_steps_do_not_touch_shorter_sequences() {
        let store = lstm_store(2, 2, 9, false);
        let seq = [vec![0.5, -1.0], vec![1.5, 0.2]];
        let mut tape = Tape::new(&store);
        let params = LstmParams::load(&mut tape, "l").unwrap();
        let alone = tape.constant(Tensor::from_rows(&seq).unwrap()).unwrap();
        let single = lstm_direction(&mut tape, alone, &[2], &params, true).unwrap();
        // time-major batch of a length-2 and a length-3 sequence
        let batched = vec![seq[0].clone(), vec![9.0, 9.0], seq[1].clone(), vec![-3.0, 1.0], vec![0.0; 2], vec![4.0, 4.0]];
        let xb = tape.constant(Tensor::from_rows(&batched).unwrap()).unwrap();
        let both = lstm_direction(&mut tape, xb, &[2, 3], &params, true).unwrap();
        let (s, b) = (tape.value(single), tape.value(both));
        assert_eq!(s.row(0), b.row(0));
        assert_eq!(s.row(1), b.row(2));
    }

    #[test]
    fn loss_adds_scaled_sentence_norm() {
        let store = ParamStore::new();
        let mut tape = Tape::new(&store);
        let logits = tape.constant(Tensor::zeros(&[1, 2])).unwrap();
        let h = tape.constant(Tensor::row_vector(vec![1.0, 2.0])).unwrap();
        let l = loss(&mut tape, logits, &[0], h, 0.003).unwrap();
        assert!((tape.value(l).item() - (2f64.ln() + 0.015)).abs() < 1e-12);
        assert!((tape.value(l).item() - 0.708147).abs() < 1e-6);
    }

    pub(crate) fn sample(id: &str, heads: &[usize], subj: (usize, usize), obj: (usize, usize), seed: usize) -> IndexedExample {
        let n = heads.len();
        IndexedExample {
            id: id.into(),
            words: (0..n).map(|i| 2 + (i * 7 + seed) % 6).collect(),
            pos: (0..n).map(|i| (i + seed) % 4).collect(),
            ner: (0..n).map(|i| 2 + (i + seed) % 2).collect(),
            heads: heads.to_vec(),
            subj: Span::new(subj.0, subj.1),
            obj: Span::new(obj.0, obj.1),
            label: Some(seed % 3),
        }
    }

    fn batch_examples(config: &ModelConfig) -> Vec<PreparedExample> {
        [
            sample("a", &[5, 5, 5, 5, 0, 8, 8, 5], (0, 0), (6, 7), 0),
            sample("b", &[2, 0, 2], (0, 0), (2, 2), 1),
            sample("c", &[0, 1, 2, 3, 4, 5], (0, 1), (5, 5), 2),
            sample("d", &[2, 0, 1], (1, 1), (0, 0), 3),
        ]
        .into_iter()
        .map(|e| PreparedExample::new(e, config).unwrap())
        .collect()
    }

    fn store_for(config: &ModelConfig, seed: u64) -> ParamStore {
        init_params(config, (8, 4, 4, 3), None, &mut seeded(seed)).unwrap()
    }

    #[test]
    fn batching_does_not_change_logits() {
        for variant in [Variant::Gcn, Variant::Cgcn] {
            let config = ModelConfig { prune_k: PruneK::Full, ..ModelConfig::tiny(variant) };
            let store = store_for(&config, 4);
            let exs = batch_examples(&config);
            let refs: Vec<&PreparedExample> = exs.iter().collect();
            let mut tape = Tape::new(&store);
            let all = forward(&mut tape, &config, &refs, None).unwrap();
            let all = tape.value(all.logits).clone();
            for (i, e) in exs.iter().enumerate() {
                let mut tape = Tape::new(&store);
                let one = forward(&mut tape, &config, &[e], None).unwrap();
                assert_eq!(tape.value(one.logits).row(0), all.row(i), "{variant} example {i}");
            }
        }
    }

    #[test]
    fn without_dependencies_tokens_are_independent() {
        let config = ModelConfig { use_dependency: false, gcn_layers: 1, ..ModelConfig::tiny(Variant::Gcn) };
        let store = store_for(&config, 2);
        let exs = batch_examples(&config);
        assert_eq!(exs[0].graph.degree, vec![1.0; exs[0].kept_len()]);
        let mut tape = Tape::new(&store);
        let (blocks, n) = graph_blocks(&[&exs[0]]);
        let rows: Vec<Option<(usize, usize)>> = (0..n).map(|k| Some((0, exs[0].graph.node_order[k]))).collect();
        let x = embed_rows(&mut tape, &[&exs[0]], &rows).unwrap();
        let w = p(&mut tape, "input.w").unwrap();
        let b = p(&mut tape, "input.b").unwrap();
        let xw = tape.matmul(x, w).unwrap();
        let h0 = tape.add_bias(xw, b).unwrap();
        let (gw, gb) = (p(&mut tape, "gcn.0.w").unwrap(), p(&mut tape, "gcn.0.b").unwrap());
        let out = gcn_layer(&mut tape, h0, &blocks, gw, gb).unwrap();
        let hw = tape.matmul(h0, gw).unwrap();
        let dense = tape.add_bias(hw, gb).unwrap();
        let dense = tape.relu(dense).unwrap();
        assert_eq!(tape.value(out), tape.value(dense));
    }

    #[test]
    fn pool_traces_cover_every_dimension() {
        let config = ModelConfig::tiny(Variant::Cgcn);
        let store = store_for(&config, 8);
        let exs = batch_examples(&config);
        let mut tape = Tape::new(&store);
        let out = forward(&mut tape, &config, &[&exs[0]], None).unwrap();
        let trace = &out.traces[0];
        assert_eq!(trace.argmax_rows.len(), config.gcn_hidden);
        let counts = crate::model::token_contributions(trace, exs[0].example.len());
        assert_eq!(counts.iter().sum::<usize>(), config.gcn_hidden);
        for (t, &c) in counts.iter().enumerate() {
            if !exs[0].prune.kept.contains(&t) {
                assert_eq!(c, 0);
            }
        }
    }

    fn jitter_biases(store: &mut ParamStore, seed: u64) {
        let mut rng = seeded(seed + 1000);
        let ids: Vec<_> = store.iter().filter(|(_, p)| p.name.ends_with(".b")).map(|(id, _)| id).collect();
        for id in ids {
            for v in store.get_mut(id).value.data_mut() {
                *v = rng.gen_range(-0.1..0.1);
            }
        }
    }

    fn check_full_model(config: &ModelConfig, exs: &[PreparedExample], tolerance: f64) {
        let refs: Vec<&PreparedExample> = exs.iter().collect();
        let labels: Vec<usize> = exs.iter().map(|e| e.example.label.unwrap()).collect();
        for seed in 0..20 {
            let mut store = store_for(config, seed);
            jitter_biases(&mut store, seed);
            let margin = {
                let mut tape = Tape::new(&store);
                forward(&mut tape, config, &refs, None).unwrap();
                tape.kink_margin()
            };
            if margin < 1e-4 {
                continue;
            }
            let report = grad_check(&mut store, &GradCheckOptions::default(), |tape| -> Result<Var, TensorError> {
                let out = forward(tape, config, &refs, None)?;
                loss(tape, out.logits, &labels, out.h_sent, config.beta)
            })
            .unwrap();
            assert!(report.max_rel_error < tolerance, "{}: {:?}", config.variant, report.groups);
            return;
        }
        panic!("{}: no seed far enough from a kink", config.variant);
    }

    #[test]
    fn gcn_gradients_match_finite_differences() {
        let config = ModelConfig { dropout: 0.0, ..ModelConfig::tiny(Variant::Gcn) };
        check_full_model(&config, &batch_examples(&config), 1e-6);
    }

    #[test]
    fn cgcn_gradients_match_finite_differences() {
        let config = ModelConfig { dropout: 0.0, ..ModelConfig::tiny(Variant::Cgcn) };
        let ex = sample("g", &[2, 0, 2, 5, 3, 5, 2], (0, 0), (5, 6), 1);
        check_full_model(&config, &[PreparedExample::new(ex, &config).unwrap()], 1e-4);
    }
}
