//! Reverse-mode differentiation over dense matrices.
//!
//! A [`Tape`] records every operation of a forward pass together with the
//! activations its backward rule needs. Parameters are read in place from a
//! borrowed [`ParamStore`]; [`Tape::backward`] returns their gradients as a
//! [`Gradients`] set which the caller folds back into the store.

use rand::Rng;

use super::{Gradients, ParamId, ParamStore, Tensor, TensorError};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// One graph block for [`Tape::graph_aggregate`]: a square adjacency (with
/// self-loops already added) and the per-row degree it is normalized by.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphBlock {
    pub adj: Tensor,
    pub degree: Vec<f64>,
}

#[derive(Debug)]
enum Op {
    Const,
    Param(ParamId),
    MatMul(Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    Sigmoid(Var),
    Tanh(Var),
    Hadamard(Var, Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceCols { x: Var, start: usize },
    GatherRows { src: Var, ids: Vec<Option<usize>> },
    RowSelect { mask: Vec<bool>, on: Var, off: Var },
    GraphAggregate { x: Var, blocks: Vec<GraphBlock>, block_rows: usize },
    MaskedColMax { x: Var, argmax: Vec<usize> },
    Dropout { x: Var, scale: Vec<f64> },
    SoftmaxXent { logits: Var, labels: Vec<usize>, probs: Tensor },
    SumSquares(Var),
    Sum(Var),
}

#[derive(Debug)]
struct Node {
    op: Op,
    // Empty for parameter nodes, whose value lives in the store.
    value: Tensor,
}

pub struct Tape<'a> {
    store: &'a ParamStore,
    nodes: Vec<Node>,
    relu_margin: f64,
    pool_margin: f64,
}

fn shape_err(what: &str, a: &Tensor, b: &Tensor) -> TensorError {
    TensorError::Shape(format!("{what}: {:?} vs {:?}", a.shape(), b.shape()))
}

impl<'a> Tape<'a> {
    pub fn new(store: &'a ParamStore) -> Self {
        Tape { store, nodes: Vec::new(), relu_margin: f64::INFINITY, pool_margin: f64::INFINITY }
    }

    pub fn store(&self) -> &'a ParamStore {
        self.store
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        match self.nodes[v.0].op {
            Op::Param(id) => self.store.value(id),
            _ => &self.nodes[v.0].value,
        }
    }

    /// Smallest distance of any ReLU input, or of any max-pooling runner-up,
    /// to the point where the forward function is not differentiable.
    pub fn kink_margin(&self) -> f64 {
        self.relu_margin.min(self.pool_margin)
    }

    fn push(&mut self, op: Op, value: Tensor, name: &str) -> Result<Var, TensorError> {
        if !value.is_finite() {
            return Err(TensorError::NonFinite(name.to_string()));
        }
        self.nodes.push(Node { op, value });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn constant(&mut self, value: Tensor) -> Result<Var, TensorError> {
        self.push(Op::Const, value, "constant")
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        self.nodes.push(Node { op: Op::Param(id), value: Tensor::zeros(&[0]) });
        Var(self.nodes.len() - 1)
    }

    pub fn param_named(&mut self, name: &str) -> Result<Var, TensorError> {
        let id = self.store.id(name)?;
        Ok(self.param(id))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let out = self.value(a).matmul(self.value(b))?;
        self.push(Op::MatMul(a, b), out, "matmul")
    }

    /// Adds a `1 x c` row to every row of an `r x c` matrix.
    pub fn add_bias(&mut self, m: Var, b: Var) -> Result<Var, TensorError> {
        let (mv, bv) = (self.value(m), self.value(b));
        if bv.rows() != 1 || bv.cols() != mv.cols() || !mv.is_matrix() {
            return Err(shape_err("add_bias", mv, bv));
        }
        let mut out = mv.clone();
        let c = mv.cols();
        for (i, x) in out.data_mut().iter_mut().enumerate() {
            *x += bv.data()[i % c];
        }
        self.push(Op::AddBias(m, b), out, "add_bias")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(shape_err("add", av, bv));
        }
        let mut out = av.clone();
        out.add_assign(bv);
        self.push(Op::Add(a, b), out, "add")
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var, TensorError> {
        let out = self.value(a).map(|x| x * c);
        self.push(Op::Scale(a, c), out, "scale")
    }

    pub fn relu(&mut self, a: Var) -> Result<Var, TensorError> {
        let av = self.value(a);
        let margin = av.data().iter().fold(f64::INFINITY, |m, x| m.min(x.abs()));
        let out = av.map(|x| if x > 0.0 { x } else { 0.0 });
        self.relu_margin = self.relu_margin.min(margin);
        self.push(Op::Relu(a), out, "relu")
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var, TensorError> {
        let out = self.value(a).map(|x| 1.0 / (1.0 + (-x).exp()));
        self.push(Op::Sigmoid(a), out, "sigmoid")
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var, TensorError> {
        let out = self.value(a).map(f64::tanh);
        self.push(Op::Tanh(a), out, "tanh")
    }

    pub fn hadamard(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(shape_err("hadamard", av, bv));
        }
        let data = av.data().iter().zip(bv.data()).map(|(x, y)| x * y).collect();
        let out = Tensor::new(av.shape(), data)?;
        self.push(Op::Hadamard(a, b), out, "hadamard")
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, TensorError> {
        let first = parts.first().ok_or_else(|| TensorError::Shape("concat of nothing".into()))?;
        let rows = self.value(*first).rows();
        let mut total = 0;
        for &p in parts {
            let pv = self.value(p);
            if pv.rows() != rows || !pv.is_matrix() {
                return Err(shape_err("concat_cols", self.value(*first), pv));
            }
            total += pv.cols();
        }
        let mut data = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.value(p).row(r));
            }
        }
        let out = Tensor::new(&[rows, total], data)?;
        self.push(Op::ConcatCols(parts.to_vec()), out, "concat_cols")
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var, TensorError> {
        let first = parts.first().ok_or_else(|| TensorError::Shape("concat of nothing".into()))?;
        let cols = self.value(*first).cols();
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let pv = self.value(p);
            if pv.cols() != cols || !pv.is_matrix() {
                return Err(shape_err("concat_rows", self.value(*first), pv));
            }
            rows += pv.rows();
            data.extend_from_slice(pv.data());
        }
        let out = Tensor::new(&[rows, cols], data)?;
        self.push(Op::ConcatRows(parts.to_vec()), out, "concat_rows")
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var, TensorError> {
        let xv = self.value(x);
        if start + len > xv.cols() || !xv.is_matrix() {
            return Err(TensorError::Shape(format!(
                "slice_cols {start}+{len} of {:?}",
                xv.shape()
            )));
        }
        let mut data = Vec::with_capacity(xv.rows() * len);
        for r in 0..xv.rows() {
            data.extend_from_slice(&xv.row(r)[start..start + len]);
        }
        let out = Tensor::new(&[xv.rows(), len], data)?;
        self.push(Op::SliceCols { x, start }, out, "slice_cols")
    }

    /// Row lookup; `None` yields a zero row (padding).
    pub fn gather_rows(&mut self, src: Var, ids: &[Option<usize>]) -> Result<Var, TensorError> {
        let sv = self.value(src);
        let cols = sv.cols();
        let mut data = Vec::with_capacity(ids.len() * cols);
        for id in ids {
            match *id {
                Some(i) if i < sv.rows() => data.extend_from_slice(sv.row(i)),
                Some(i) => {
                    return Err(TensorError::Shape(format!(
                        "gather row {i} of {} rows",
                        sv.rows()
                    )))
                }
                None => data.extend(std::iter::repeat_n(0.0, cols)),
            }
        }
        let out = Tensor::new(&[ids.len(), cols], data)?;
        self.push(Op::GatherRows { src, ids: ids.to_vec() }, out, "gather_rows")
    }

    /// Row-wise choice: row `r` comes from `on` where `mask[r]`, else from `off`.
    pub fn row_select(&mut self, mask: &[bool], on: Var, off: Var) -> Result<Var, TensorError> {
        let (a, b) = (self.value(on), self.value(off));
        if a.shape() != b.shape() || a.rows() != mask.len() {
            return Err(shape_err("row_select", a, b));
        }
        let mut out = b.clone();
        for (r, &m) in mask.iter().enumerate() {
            if m {
                out.row_mut(r).copy_from_slice(a.row(r));
            }
        }
        self.push(Op::RowSelect { mask: mask.to_vec(), on, off }, out, "row_select")
    }

    /// Degree-normalized neighbourhood sum, block-diagonal over a batch:
    /// row `i` of block `b` becomes `(sum_j adj_b[i][j] * x[j]) / degree_b[i]`.
    pub fn graph_aggregate(&mut self, x: Var, blocks: Vec<GraphBlock>) -> Result<Var, TensorError> {
        let xv = self.value(x);
        let n = blocks.first().map_or(0, |b| b.degree.len());
        for blk in &blocks {
            if blk.adj.rows() != n || blk.adj.cols() != n || blk.degree.len() != n {
                return Err(TensorError::Shape("graph blocks must share one square size".into()));
            }
        }
        if xv.rows() != n * blocks.len() {
            return Err(TensorError::Shape(format!(
                "graph_aggregate: {} rows for {} blocks of {n}",
                xv.rows(),
                blocks.len()
            )));
        }
        let c = xv.cols();
        let mut out = Tensor::zeros(&[xv.rows(), c]);
        for (b, blk) in blocks.iter().enumerate() {
            for i in 0..n {
                let mut acc = vec![0.0; c];
                for j in 0..n {
                    let a = blk.adj.get2(i, j);
                    if a != 0.0 {
                        for (o, v) in acc.iter_mut().zip(xv.row(b * n + j)) {
                            *o += a * v;
                        }
                    }
                }
                let d = blk.degree[i];
                for (o, v) in out.row_mut(b * n + i).iter_mut().zip(acc) {
                    *o = v / d;
                }
            }
        }
        self.push(Op::GraphAggregate { x, blocks, block_rows: n }, out, "graph_aggregate")
    }

    /// Column-wise max over each group of rows; one output row per group.
    /// Ties resolve to the earliest row listed in the group. Returns the
    /// winning row index for every (group, column).
    pub fn masked_colmax(&mut self, x: Var, groups: &[Vec<usize>]) -> Result<(Var, Vec<Vec<usize>>), TensorError> {
        let xv = self.value(x);
        let c = xv.cols();
        let mut out = Tensor::zeros(&[groups.len(), c]);
        let mut argmax = Vec::with_capacity(groups.len() * c);
        let mut per_group = Vec::with_capacity(groups.len());
        let mut margin = f64::INFINITY;
        for (g, rows) in groups.iter().enumerate() {
            if rows.is_empty() {
                return Err(TensorError::EmptyPool);
            }
            if let Some(&bad) = rows.iter().find(|&&r| r >= xv.rows()) {
                return Err(TensorError::Shape(format!("pool row {bad} of {}", xv.rows())));
            }
            let mut winners = Vec::with_capacity(c);
            for col in 0..c {
                let mut best = rows[0];
                let mut best_v = xv.get2(best, col);
                let mut second = f64::NEG_INFINITY;
                for &r in &rows[1..] {
                    let v = xv.get2(r, col);
                    if v > best_v {
                        second = best_v;
                        best = r;
                        best_v = v;
                    } else if v > second {
                        second = v;
                    }
                }
                // exact zero ties come from ReLU and are covered by its margin
                if !(best_v == 0.0 && second == 0.0) {
                    margin = margin.min(best_v - second);
                }
                out.set2(g, col, best_v);
                argmax.push(best);
                winners.push(best);
            }
            per_group.push(winners);
        }
        self.pool_margin = self.pool_margin.min(margin);
        let v = self.push(Op::MaskedColMax { x, argmax }, out, "masked_colmax")?;
        Ok((v, per_group))
    }

    /// Inverted dropout. Without an RNG (evaluation) this is the identity and
    /// records nothing.
    pub fn dropout<R: Rng>(&mut self, x: Var, p: f64, rng: Option<&mut R>) -> Result<Var, TensorError> {
        if !(0.0..1.0).contains(&p) {
            return Err(TensorError::Shape(format!("dropout probability {p} outside [0, 1)")));
        }
        let Some(rng) = rng else { return Ok(x) };
        if p == 0.0 {
            return Ok(x);
        }
        let keep = 1.0 / (1.0 - p);
        let xv = self.value(x);
        let scale: Vec<f64> =
            (0..xv.len()).map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep }).collect();
        let data = xv.data().iter().zip(&scale).map(|(v, s)| v * s).collect();
        let out = Tensor::new(xv.shape(), data)?;
        self.push(Op::Dropout { x, scale }, out, "dropout")
    }

    /// Mean softmax cross-entropy over rows of `logits`; also returns the
    /// per-row probabilities.
    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<(Var, Tensor), TensorError> {
        let lv = self.value(logits);
        if lv.rows() != labels.len() || !lv.is_matrix() {
            return Err(TensorError::Shape(format!(
                "{} labels for logits {:?}",
                labels.len(),
                lv.shape()
            )));
        }
        let probs = softmax_rows(lv);
        let mut total = 0.0;
        for (r, &y) in labels.iter().enumerate() {
            if y >= lv.cols() {
                return Err(TensorError::LabelOutOfRange { label: y, classes: lv.cols() });
            }
            total += log_sum_exp(lv.row(r)) - lv.get2(r, y);
        }
        let loss = Tensor::scalar(total / labels.len() as f64);
        let v = self.push(
            Op::SoftmaxXent { logits, labels: labels.to_vec(), probs: probs.clone() },
            loss,
            "softmax_cross_entropy",
        )?;
        Ok((v, probs))
    }

    pub fn sum_of_squares(&mut self, x: Var) -> Result<Var, TensorError> {
        let out = Tensor::scalar(self.value(x).sum_of_squares());
        self.push(Op::SumSquares(x), out, "sum_of_squares")
    }

    pub fn sum(&mut self, x: Var) -> Result<Var, TensorError> {
        let out = Tensor::scalar(self.value(x).data().iter().sum());
        self.push(Op::Sum(x), out, "sum")
    }

    /// Gradients of the scalar `loss` with respect to every parameter it
    /// depends on.
    pub fn backward(&self, loss: Var) -> Result<Gradients, TensorError> {
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(TensorError::NotScalar(lv.shape().to_vec()));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Tensor::new(lv.shape(), vec![1.0])?);
        let mut params = Gradients::default();

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Const => {}
                Op::Param(id) => params.slot(*id, g.shape()).add_assign(&g),
                Op::MatMul(a, b) => {
                    let ga = g.matmul(&self.value(*b).transpose())?;
                    let gb = self.value(*a).transpose().matmul(&g)?;
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::AddBias(m, b) => {
                    let c = g.cols();
                    let mut gb = vec![0.0; c];
                    for (k, v) in g.data().iter().enumerate() {
                        gb[k % c] += v;
                    }
                    let gb = Tensor::new(self.value(*b).shape(), gb)?;
                    accumulate(&mut grads, *b, gb);
                    accumulate(&mut grads, *m, g);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, g);
                }
                Op::Scale(a, c) => accumulate(&mut grads, *a, g.map(|v| v * c)),
                Op::Relu(a) => {
                    let x = self.value(*a);
                    let data = g.data().iter().zip(x.data()).map(|(g, x)| if *x > 0.0 { *g } else { 0.0 });
                    accumulate(&mut grads, *a, Tensor::new(g.shape(), data.collect())?);
                }
                Op::Sigmoid(a) => {
                    let y = &node.value;
                    let data = g.data().iter().zip(y.data()).map(|(g, y)| g * y * (1.0 - y));
                    accumulate(&mut grads, *a, Tensor::new(g.shape(), data.collect())?);
                }
                Op::Tanh(a) => {
                    let y = &node.value;
                    let data = g.data().iter().zip(y.data()).map(|(g, y)| g * (1.0 - y * y));
                    accumulate(&mut grads, *a, Tensor::new(g.shape(), data.collect())?);
                }
                Op::Hadamard(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let ga = g.data().iter().zip(bv.data()).map(|(g, b)| g * b).collect();
                    let gb = g.data().iter().zip(av.data()).map(|(g, a)| g * a).collect();
                    accumulate(&mut grads, *a, Tensor::new(g.shape(), ga)?);
                    accumulate(&mut grads, *b, Tensor::new(g.shape(), gb)?);
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let w = self.value(p).cols();
                        let mut gp = Vec::with_capacity(g.rows() * w);
                        for r in 0..g.rows() {
                            gp.extend_from_slice(&g.row(r)[offset..offset + w]);
                        }
                        accumulate(&mut grads, p, Tensor::new(&[g.rows(), w], gp)?);
                        offset += w;
                    }
                }
                Op::ConcatRows(parts) => {
                    let c = g.cols();
                    let mut offset = 0;
                    for &p in parts {
                        let h = self.value(p).rows();
                        let gp = g.data()[offset * c..(offset + h) * c].to_vec();
                        accumulate(&mut grads, p, Tensor::new(&[h, c], gp)?);
                        offset += h;
                    }
                }
                Op::SliceCols { x, start } => {
                    let mut gx = Tensor::zeros(self.value(*x).shape());
                    for r in 0..g.rows() {
                        gx.row_mut(r)[*start..*start + g.cols()].copy_from_slice(g.row(r));
                    }
                    accumulate(&mut grads, *x, gx);
                }
                Op::GatherRows { src, ids } => {
                    let mut gs = Tensor::zeros(self.value(*src).shape());
                    for (r, id) in ids.iter().enumerate() {
                        if let Some(i) = *id {
                            for (o, v) in gs.row_mut(i).iter_mut().zip(g.row(r)) {
                                *o += v;
                            }
                        }
                    }
                    accumulate(&mut grads, *src, gs);
                }
                Op::RowSelect { mask, on, off } => {
                    let mut g_on = Tensor::zeros(g.shape());
                    let mut g_off = Tensor::zeros(g.shape());
                    for (r, &m) in mask.iter().enumerate() {
                        let dst = if m { &mut g_on } else { &mut g_off };
                        dst.row_mut(r).copy_from_slice(g.row(r));
                    }
                    accumulate(&mut grads, *on, g_on);
                    accumulate(&mut grads, *off, g_off);
                }
                Op::GraphAggregate { x, blocks, block_rows } => {
                    let n = *block_rows;
                    let mut gx = Tensor::zeros(self.value(*x).shape());
                    for (b, blk) in blocks.iter().enumerate() {
                        for i in 0..n {
                            let d = blk.degree[i];
                            for j in 0..n {
                                let a = blk.adj.get2(i, j);
                                if a != 0.0 {
                                    let w = a / d;
                                    let gi = g.row(b * n + i).to_vec();
                                    for (o, v) in gx.row_mut(b * n + j).iter_mut().zip(gi) {
                                        *o += w * v;
                                    }
                                }
                            }
                        }
                    }
                    accumulate(&mut grads, *x, gx);
                }
                Op::MaskedColMax { x, argmax } => {
                    let mut gx = Tensor::zeros(self.value(*x).shape());
                    let c = g.cols();
                    for (k, &row) in argmax.iter().enumerate() {
                        let col = k % c;
                        let cur = gx.get2(row, col);
                        gx.set2(row, col, cur + g.data()[k]);
                    }
                    accumulate(&mut grads, *x, gx);
                }
                Op::Dropout { x, scale } => {
                    let data = g.data().iter().zip(scale).map(|(g, s)| g * s).collect();
                    accumulate(&mut grads, *x, Tensor::new(g.shape(), data)?);
                }
                Op::SoftmaxXent { logits, labels, probs } => {
                    let upstream = g.item() / labels.len() as f64;
                    let mut gl = probs.clone();
                    for (r, &y) in labels.iter().enumerate() {
                        let v = gl.get2(r, y);
                        gl.set2(r, y, v - 1.0);
                    }
                    gl.data_mut().iter_mut().for_each(|v| *v *= upstream);
                    accumulate(&mut grads, *logits, gl);
                }
                Op::SumSquares(x) => {
                    let s = g.item();
                    accumulate(&mut grads, *x, self.value(*x).map(|v| 2.0 * v * s));
                }
                Op::Sum(x) => {
                    let s = g.item();
                    accumulate(&mut grads, *x, self.value(*x).map(|_| s));
                }
            }
        }
        Ok(params)
    }
}

fn accumulate(grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
    match &mut grads[v.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

fn log_sum_exp(row: &[f64]) -> f64 {
    let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Numerically stable row-wise softmax.
pub fn softmax_rows(logits: &Tensor) -> Tensor {
    let mut out = logits.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for v in row.iter_mut() {
            *v = (*v - m).exp();
            z += *v;
        }
        for v in row.iter_mut() {
            *v /= z;
        }
    }
    out
}
