//! Reverse-mode automatic differentiation over small dense matrices.

use std::collections::HashMap;

use half::f16;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(rows * cols, data.len(), "shape mismatch");
        Tensor { rows, cols, data }
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    fn add_assign(&mut self, other: &Tensor) {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }
}

pub fn round_f16(x: f64) -> f64 {
    f16::from_f64(x).to_f64()
}

/// Named trainable matrices.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Tensor>,
    index: HashMap<String, usize>,
}

impl ParamStore {
    pub fn add(&mut self, name: impl Into<String>, t: Tensor) -> usize {
        let name = name.into();
        assert!(!self.index.contains_key(&name), "duplicate parameter {name}");
        let id = self.tensors.len();
        self.index.insert(name.clone(), id);
        self.names.push(name);
        self.tensors.push(t);
        id
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn get(&self, id: usize) -> &Tensor {
        &self.tensors[id]
    }

    pub fn get_mut(&mut self, id: usize) -> &mut Tensor {
        &mut self.tensors[id]
    }

    pub fn name(&self, id: usize) -> &str {
        &self.names[id]
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    pub fn scalar_count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Zero tensors shaped like every parameter.
    pub fn zeros_like(&self) -> Vec<Tensor> {
        self.tensors.iter().map(|t| Tensor::zeros(t.rows, t.cols)).collect()
    }
}

pub type NodeId = usize;

#[derive(Debug)]
enum Op {
    Input,
    Param(usize),
    EmbedBag { param: usize, bags: Vec<Vec<usize>> },
    GatherRows(NodeId, Vec<usize>),
    MatMul(NodeId, NodeId),
    Add(NodeId, NodeId),
    AddRow(NodeId, NodeId),
    Mul(NodeId, NodeId),
    OneMinus(NodeId),
    Tanh(NodeId),
    Sigmoid(NodeId),
    Relu(NodeId),
    Scale(NodeId, f64),
    ConcatCols(Vec<NodeId>),
    ConcatRows(Vec<NodeId>),
    SliceRows(NodeId, usize),
    SliceCols(NodeId, usize),
    Transpose(NodeId),
    SoftmaxRows(NodeId),
    LayerNorm { x: NodeId, gain: NodeId, bias: NodeId, xhat: Vec<f64>, inv_std: Vec<f64> },
    MeanRows(NodeId),
    MaskedXent { logits: NodeId, targets: Vec<usize>, probs: Vec<f64> },
}

struct Node {
    /// `None` for parameter nodes, whose value lives in the store.
    value: Option<Tensor>,
    op: Op,
}

const LN_EPS: f64 = 1e-5;

/// Records operations for one forward pass.
pub struct Tape<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node>,
    param_nodes: HashMap<usize, NodeId>,
    half: bool,
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Tape {
            params,
            nodes: Vec::new(),
            param_nodes: HashMap::new(),
            half: false,
        }
    }

    /// Rounds every matrix product to half precision.
    pub fn half_precision(mut self, on: bool) -> Self {
        self.half = on;
        self
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        match (&self.nodes[id].value, &self.nodes[id].op) {
            (Some(v), _) => v,
            (None, Op::Param(p)) => self.params.get(*p),
            _ => unreachable!("only parameter nodes lack a value"),
        }
    }

    fn push(&mut self, value: Tensor, op: Op) -> NodeId {
        self.nodes.push(Node { value: Some(value), op });
        self.nodes.len() - 1
    }

    pub fn input(&mut self, t: Tensor) -> NodeId {
        self.push(t, Op::Input)
    }

    pub fn param(&mut self, id: usize) -> NodeId {
        if let Some(&n) = self.param_nodes.get(&id) {
            return n;
        }
        self.nodes.push(Node {
            value: None,
            op: Op::Param(id),
        });
        let n = self.nodes.len() - 1;
        self.param_nodes.insert(id, n);
        n
    }

    /// Row `i` of the output is the mean of the parameter rows in `bags[i]`
    /// (zero when the bag is empty).
    pub fn embed_bag(&mut self, param: usize, bags: Vec<Vec<usize>>) -> NodeId {
        let table = self.params.get(param);
        let mut out = Tensor::zeros(bags.len(), table.cols);
        for (i, bag) in bags.iter().enumerate() {
            if bag.is_empty() {
                continue;
            }
            let w = 1.0 / bag.len() as f64;
            let row = out.row_mut(i);
            for &b in bag {
                for (o, v) in row.iter_mut().zip(table.row(b)) {
                    *o += w * v;
                }
            }
        }
        self.push(out, Op::EmbedBag { param, bags })
    }

    pub fn gather_rows(&mut self, a: NodeId, idx: Vec<usize>) -> NodeId {
        let av = self.value(a);
        let mut out = Tensor::zeros(idx.len(), av.cols);
        for (i, &r) in idx.iter().enumerate() {
            out.row_mut(i).copy_from_slice(av.row(r));
        }
        self.push(out, Op::GatherRows(a, idx))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (av, bv) = (self.value(a), self.value(b));
        assert_eq!(av.cols, bv.rows, "matmul shape");
        let mut out = Tensor::zeros(av.rows, bv.cols);
        matmul_into(av, bv, &mut out);
        if self.half {
            out.data.iter_mut().for_each(|x| *x = round_f16(*x));
        }
        self.push(out, Op::MatMul(a, b))
    }

    fn zip_map(&mut self, a: NodeId, b: NodeId, f: impl Fn(f64, f64) -> f64, op: Op) -> NodeId {
        let (av, bv) = (self.value(a), self.value(b));
        assert_eq!((av.rows, av.cols), (bv.rows, bv.cols), "elementwise shape");
        let data = av.data.iter().zip(&bv.data).map(|(x, y)| f(*x, *y)).collect();
        let out = Tensor::from_vec(av.rows, av.cols, data);
        self.push(out, op)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.zip_map(a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.zip_map(a, b, |x, y| x * y, Op::Mul(a, b))
    }

    /// Adds a `1 x cols` row to every row of `a`.
    pub fn add_row(&mut self, a: NodeId, row: NodeId) -> NodeId {
        let (av, rv) = (self.value(a), self.value(row));
        assert_eq!((rv.rows, rv.cols), (1, av.cols), "broadcast shape");
        let mut out = av.clone();
        for r in 0..out.rows {
            for (o, b) in out.row_mut(r).iter_mut().zip(&rv.data) {
                *o += b;
            }
        }
        self.push(out, Op::AddRow(a, row))
    }

    fn map(&mut self, a: NodeId, f: impl Fn(f64) -> f64, op: Op) -> NodeId {
        let av = self.value(a);
        let out = Tensor::from_vec(av.rows, av.cols, av.data.iter().map(|x| f(*x)).collect());
        self.push(out, op)
    }

    pub fn one_minus(&mut self, a: NodeId) -> NodeId {
        self.map(a, |x| 1.0 - x, Op::OneMinus(a))
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        self.map(a, f64::tanh, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        self.map(a, |x| 1.0 / (1.0 + (-x).exp()), Op::Sigmoid(a))
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        self.map(a, |x| x.max(0.0), Op::Relu(a))
    }

    pub fn scale(&mut self, a: NodeId, k: f64) -> NodeId {
        self.map(a, |x| k * x, Op::Scale(a, k))
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> NodeId {
        let rows = self.value(parts[0]).rows;
        let cols: usize = parts.iter().map(|p| self.value(*p).cols).sum();
        let mut out = Tensor::zeros(rows, cols);
        let mut off = 0;
        for &p in parts {
            let pv = self.value(p);
            assert_eq!(pv.rows, rows, "concat_cols rows");
            for r in 0..rows {
                out.row_mut(r)[off..off + pv.cols].copy_from_slice(pv.row(r));
            }
            off += pv.cols;
        }
        self.push(out, Op::ConcatCols(parts.to_vec()))
    }

    pub fn concat_rows(&mut self, parts: &[NodeId]) -> NodeId {
        let cols = self.value(parts[0]).cols;
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let pv = self.value(p);
            assert_eq!(pv.cols, cols, "concat_rows cols");
            data.extend_from_slice(&pv.data);
            rows += pv.rows;
        }
        self.push(Tensor::from_vec(rows, cols, data), Op::ConcatRows(parts.to_vec()))
    }

    pub fn slice_rows(&mut self, a: NodeId, start: usize, len: usize) -> NodeId {
        let av = self.value(a);
        let out = Tensor::from_vec(len, av.cols, av.data[start * av.cols..(start + len) * av.cols].to_vec());
        self.push(out, Op::SliceRows(a, start))
    }

    pub fn slice_cols(&mut self, a: NodeId, start: usize, len: usize) -> NodeId {
        let av = self.value(a);
        let mut out = Tensor::zeros(av.rows, len);
        for r in 0..av.rows {
            out.row_mut(r).copy_from_slice(&av.row(r)[start..start + len]);
        }
        self.push(out, Op::SliceCols(a, start))
    }

    pub fn transpose(&mut self, a: NodeId) -> NodeId {
        let av = self.value(a);
        let mut out = Tensor::zeros(av.cols, av.rows);
        for r in 0..av.rows {
            for c in 0..av.cols {
                out.data[c * av.rows + r] = av.data[r * av.cols + c];
            }
        }
        self.push(out, Op::Transpose(a))
    }

    pub fn softmax_rows(&mut self, a: NodeId) -> NodeId {
        let mut out = self.value(a).clone();
        for r in 0..out.rows {
            softmax_in_place(out.row_mut(r), None);
        }
        self.push(out, Op::SoftmaxRows(a))
    }

    pub fn layer_norm(&mut self, x: NodeId, gain: NodeId, bias: NodeId) -> NodeId {
        let xv = self.value(x);
        let (g, b) = (self.value(gain), self.value(bias));
        let d = xv.cols;
        let mut out = Tensor::zeros(xv.rows, d);
        let mut xhat = vec![0.0; xv.len()];
        let mut inv_std = vec![0.0; xv.rows];
        for r in 0..xv.rows {
            let row = xv.row(r);
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d as f64;
            let is = 1.0 / (var + LN_EPS).sqrt();
            inv_std[r] = is;
            for c in 0..d {
                let h = (row[c] - mean) * is;
                xhat[r * d + c] = h;
                out.data[r * d + c] = h * g.data[c] + b.data[c];
            }
        }
        self.push(
            out,
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            },
        )
    }

    pub fn mean_rows(&mut self, a: NodeId) -> NodeId {
        let av = self.value(a);
        let mut out = Tensor::zeros(1, av.cols);
        for r in 0..av.rows {
            for (o, v) in out.data.iter_mut().zip(av.row(r)) {
                *o += v / av.rows as f64;
            }
        }
        self.push(out, Op::MeanRows(a))
    }

    /// Mean over rows of `-log softmax(logits)[target]`, with the softmax
    /// restricted to entries where `mask` is true.
    pub fn masked_cross_entropy(&mut self, logits: NodeId, targets: Vec<usize>, mask: &[bool]) -> NodeId {
        let lv = self.value(logits);
        assert_eq!(targets.len(), lv.rows);
        assert_eq!(mask.len(), lv.len());
        let mut probs = lv.data.clone();
        let mut loss = 0.0;
        for r in 0..lv.rows {
            let cols = lv.cols;
            let row = &mut probs[r * cols..(r + 1) * cols];
            softmax_in_place(row, Some(&mask[r * cols..(r + 1) * cols]));
            loss -= row[targets[r]].max(1e-300).ln();
        }
        let n = lv.rows.max(1) as f64;
        let out = Tensor::from_vec(1, 1, vec![loss / n]);
        self.push(out, Op::MaskedXent { logits, targets, probs })
    }

    /// Accumulates d(node)/d(param) into `grads` (indexed like the store).
    pub fn backward(&self, root: NodeId, grads: &mut [Tensor]) {
        let mut g: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        let rv = self.value(root);
        g[root] = Some(Tensor::from_vec(rv.rows, rv.cols, vec![1.0; rv.len()]));
        for id in (0..=root).rev() {
            let Some(gout) = g[id].take() else { continue };
            self.backprop(id, &gout, &mut g, grads);
        }
    }

    fn backprop(&self, id: NodeId, gout: &Tensor, g: &mut [Option<Tensor>], grads: &mut [Tensor]) {
        fn acc(g: &mut [Option<Tensor>], id: NodeId, t: Tensor) {
            match &mut g[id] {
                Some(e) => e.add_assign(&t),
                slot => *slot = Some(t),
            }
        }
        let out = self.value(id);
        match &self.nodes[id].op {
            Op::Input => {}
            Op::Param(p) => grads[*p].add_assign(gout),
            Op::EmbedBag { param, bags } => {
                let gp = &mut grads[*param];
                for (i, bag) in bags.iter().enumerate() {
                    if bag.is_empty() {
                        continue;
                    }
                    let w = 1.0 / bag.len() as f64;
                    for &b in bag {
                        for (t, v) in gp.row_mut(b).iter_mut().zip(gout.row(i)) {
                            *t += w * v;
                        }
                    }
                }
            }
            Op::GatherRows(a, idx) => {
                let av = self.value(*a);
                let mut ga = Tensor::zeros(av.rows, av.cols);
                for (i, &r) in idx.iter().enumerate() {
                    for (t, v) in ga.row_mut(r).iter_mut().zip(gout.row(i)) {
                        *t += v;
                    }
                }
                acc(g, *a, ga);
            }
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let mut ga = Tensor::zeros(av.rows, av.cols);
                for i in 0..av.rows {
                    let gr = gout.row(i);
                    for k in 0..av.cols {
                        ga.data[i * av.cols + k] = dot(gr, bv.row(k));
                    }
                }
                let mut gb = Tensor::zeros(bv.rows, bv.cols);
                for i in 0..av.rows {
                    let gr = gout.row(i);
                    for k in 0..av.cols {
                        let x = av.data[i * av.cols + k];
                        if x != 0.0 {
                            for (t, v) in gb.row_mut(k).iter_mut().zip(gr) {
                                *t += x * v;
                            }
                        }
                    }
                }
                acc(g, *a, ga);
                acc(g, *b, gb);
            }
            Op::Add(a, b) => {
                acc(g, *a, gout.clone());
                acc(g, *b, gout.clone());
            }
            Op::AddRow(a, row) => {
                acc(g, *a, gout.clone());
                let mut gr = Tensor::zeros(1, gout.cols);
                for r in 0..gout.rows {
                    for (t, v) in gr.data.iter_mut().zip(gout.row(r)) {
                        *t += v;
                    }
                }
                acc(g, *row, gr);
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let ga = zip(gout, bv, |x, y| x * y);
                let gb = zip(gout, av, |x, y| x * y);
                acc(g, *a, ga);
                acc(g, *b, gb);
            }
            Op::OneMinus(a) => acc(g, *a, map(gout, |x| -x)),
            Op::Tanh(a) => acc(g, *a, zip(gout, out, |d, y| d * (1.0 - y * y))),
            Op::Sigmoid(a) => acc(g, *a, zip(gout, out, |d, y| d * y * (1.0 - y))),
            Op::Relu(a) => acc(g, *a, zip(gout, out, |d, y| if y > 0.0 { d } else { 0.0 })),
            Op::Scale(a, k) => acc(g, *a, map(gout, |x| k * x)),
            Op::ConcatCols(parts) => {
                let mut off = 0;
                for &p in parts {
                    let cols = self.value(p).cols;
                    let mut gp = Tensor::zeros(gout.rows, cols);
                    for r in 0..gout.rows {
                        gp.row_mut(r).copy_from_slice(&gout.row(r)[off..off + cols]);
                    }
                    off += cols;
                    acc(g, p, gp);
                }
            }
            Op::ConcatRows(parts) => {
                let mut off = 0;
                for &p in parts {
                    let rows = self.value(p).rows;
                    let data = gout.data[off * gout.cols..(off + rows) * gout.cols].to_vec();
                    off += rows;
                    acc(g, p, Tensor::from_vec(rows, gout.cols, data));
                }
            }
            Op::SliceRows(a, start) => {
                let av = self.value(*a);
                let mut ga = Tensor::zeros(av.rows, av.cols);
                ga.data[start * av.cols..start * av.cols + gout.len()].copy_from_slice(&gout.data);
                acc(g, *a, ga);
            }
            Op::SliceCols(a, start) => {
                let av = self.value(*a);
                let mut ga = Tensor::zeros(av.rows, av.cols);
                for r in 0..av.rows {
                    ga.row_mut(r)[*start..start + gout.cols].copy_from_slice(gout.row(r));
                }
                acc(g, *a, ga);
            }
            Op::Transpose(a) => {
                let mut ga = Tensor::zeros(gout.cols, gout.rows);
                for r in 0..gout.rows {
                    for c in 0..gout.cols {
                        ga.data[c * gout.rows + r] = gout.data[r * gout.cols + c];
                    }
                }
                acc(g, *a, ga);
            }
            Op::SoftmaxRows(a) => {
                let mut ga = Tensor::zeros(out.rows, out.cols);
                for r in 0..out.rows {
                    let (s, d) = (out.row(r), gout.row(r));
                    let inner = dot(s, d);
                    for (c, t) in ga.row_mut(r).iter_mut().enumerate() {
                        *t = s[c] * (d[c] - inner);
                    }
                }
                acc(g, *a, ga);
            }
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            } => {
                let gv = self.value(*gain);
                let d = gout.cols;
                let mut gx = Tensor::zeros(gout.rows, d);
                let mut gg = Tensor::zeros(1, d);
                let mut gb = Tensor::zeros(1, d);
                for r in 0..gout.rows {
                    let dy = gout.row(r);
                    let xh = &xhat[r * d..(r + 1) * d];
                    let dxh: Vec<f64> = (0..d).map(|c| dy[c] * gv.data[c]).collect();
                    let m1 = dxh.iter().sum::<f64>() / d as f64;
                    let m2 = dxh.iter().zip(xh).map(|(a, b)| a * b).sum::<f64>() / d as f64;
                    for c in 0..d {
                        gx.data[r * d + c] = inv_std[r] * (dxh[c] - m1 - xh[c] * m2);
                        gg.data[c] += dy[c] * xh[c];
                        gb.data[c] += dy[c];
                    }
                }
                acc(g, *x, gx);
                acc(g, *gain, gg);
                acc(g, *bias, gb);
            }
            Op::MeanRows(a) => {
                let av = self.value(*a);
                let mut ga = Tensor::zeros(av.rows, av.cols);
                for r in 0..av.rows {
                    for (t, v) in ga.row_mut(r).iter_mut().zip(&gout.data) {
                        *t = v / av.rows as f64;
                    }
                }
                acc(g, *a, ga);
            }
            Op::MaskedXent { logits, targets, probs } => {
                let lv = self.value(*logits);
                let scale = gout.data[0] / lv.rows.max(1) as f64;
                let mut gl = Tensor::from_vec(lv.rows, lv.cols, probs.clone());
                for (r, &t) in targets.iter().enumerate() {
                    gl.data[r * lv.cols + t] -= 1.0;
                }
                gl.data.iter_mut().for_each(|x| *x *= scale);
                acc(g, *logits, gl);
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn map(a: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    Tensor::from_vec(a.rows, a.cols, a.data.iter().map(|x| f(*x)).collect())
}

fn zip(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    Tensor::from_vec(a.rows, a.cols, a.data.iter().zip(&b.data).map(|(x, y)| f(*x, *y)).collect())
}

fn matmul_into(a: &Tensor, b: &Tensor, out: &mut Tensor) {
    for i in 0..a.rows {
        let orow = &mut out.data[i * b.cols..(i + 1) * b.cols];
        for k in 0..a.cols {
            let x = a.data[i * a.cols + k];
            if x == 0.0 {
                continue;
            }
            for (o, v) in orow.iter_mut().zip(b.row(k)) {
                *o += x * v;
            }
        }
    }
}

/// Softmax over the entries where `mask` is true; masked entries become 0.
pub fn softmax_in_place(row: &mut [f64], mask: Option<&[bool]>) {
    let on = |i: usize| mask.map_or(true, |m| m[i]);
    let max = (0..row.len())
        .filter(|&i| on(i))
        .map(|i| row[i])
        .fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for i in 0..row.len() {
        if on(i) {
            row[i] = (row[i] - max).exp();
            sum += row[i];
        } else {
            row[i] = 0.0;
        }
    }
    if sum > 0.0 {
        row.iter_mut().for_each(|x| *x /= sum);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Tensor {
        Tensor::from_vec(r, c, (0..r * c).map(|_| rng.gen_range(-1.0..1.0)).collect())
    }

    /// Central differences over every parameter coordinate of a scalar function.
    fn check(store: &mut ParamStore, f: impl Fn(&mut Tape) -> NodeId) {
        let mut grads = store.zeros_like();
        {
            let mut tape = Tape::new(store);
            let root = f(&mut tape);
            tape.backward(root, &mut grads);
        }
        let eps = 1e-6;
        for p in 0..store.len() {
            for i in 0..store.get(p).len() {
                let orig = store.get(p).data[i];
                store.get_mut(p).data[i] = orig + eps;
                let up = {
                    let mut t = Tape::new(store);
                    let r = f(&mut t);
                    t.value(r).data[0]
                };
                store.get_mut(p).data[i] = orig - eps;
                let down = {
                    let mut t = Tape::new(store);
                    let r = f(&mut t);
                    t.value(r).data[0]
                };
                store.get_mut(p).data[i] = orig;
                let num = (up - down) / (2.0 * eps);
                let ana = grads[p].data[i];
                let err = (num - ana).abs() / num.abs().max(ana.abs()).max(1e-6);
                assert!(err < 1e-4, "{} [{i}]: numeric {num} analytic {ana}", store.name(p));
            }
        }
    }

    #[test]
    fn every_op_has_correct_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut s = ParamStore::default();
        let emb = s.add("emb", random(&mut rng, 6, 4));
        let w = s.add("w", random(&mut rng, 4, 4));
        let g = s.add("g", random(&mut rng, 1, 4));
        let b = s.add("b", random(&mut rng, 1, 4));
        let out = s.add("out", random(&mut rng, 8, 5));
        check(&mut s, |t| {
            let x = t.embed_bag(emb, vec![vec![0, 1], vec![2], vec![], vec![3, 4, 5]]);
            let wn = t.param(w);
            let h = t.matmul(x, wn);
            let (gn, bn) = (t.param(g), t.param(b));
            let h = t.layer_norm(h, gn, bn);
            let q = t.tanh(h);
            let k = t.sigmoid(h);
            let kt = t.transpose(k);
            let att = t.matmul(q, kt);
            let att = t.scale(att, 0.5);
            let att = t.softmax_rows(att);
            let mixed = t.matmul(att, h);
            let r = t.relu(mixed);
            let one = t.one_minus(k);
            let m = t.mul(r, one);
            let sum = t.add(m, q);
            let gb = t.param(b);
            let sum = t.add_row(sum, gb);
            let picked = t.gather_rows(sum, vec![3, 0, 3]);
            let left = t.slice_cols(picked, 0, 2);
            let right = t.slice_cols(picked, 2, 2);
            let both = t.concat_cols(&[right, left, right, left]);
            let mean = t.mean_rows(sum);
            let mean = t.concat_cols(&[mean, mean]);
            let stacked = t.concat_rows(&[both, mean]);
            let top = t.slice_rows(stacked, 1, 3);
            let on = t.param(out);
            let logits = t.matmul(top, on);
            let mask: Vec<bool> = (0..15).map(|i| i % 5 != 1).collect();
            t.masked_cross_entropy(logits, vec![0, 4, 2], &mask)
        });
    }

    #[test]
    fn masked_softmax_ignores_masked_entries() {
        let mut row = vec![1.0, 100.0, 2.0];
        softmax_in_place(&mut row, Some(&[true, false, true]));
        assert_eq!(row[1], 0.0);
        assert!((row[0] + row[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn half_precision_rounds_products() {
        let mut s = ParamStore::default();
        let a = s.add("a", Tensor::from_vec(1, 1, vec![1.0 / 3.0]));
        let mut t = Tape::new(&s).half_precision(true);
        let n = t.param(a);
        let p = t.matmul(n, n);
        let v = t.value(p).data[0];
        assert_eq!(v, round_f16(1.0 / 9.0));
        assert_ne!(v, 1.0 / 9.0);
    }
}
