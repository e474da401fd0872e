//! Reverse-mode autodiff on an append-only tape of f64 matrices.
//!
//! Every value is a dense 2-D array: scalars are 1×1, row vectors 1×d,
//! batches B×d, parameter tables T×d. Nodes are appended in evaluation order,
//! so the tape is already topologically sorted and the backward sweep is a
//! single reverse pass. Values are computed eagerly at op construction;
//! `backward` seeds the loss with 1 and accumulates gradients into every node
//! that (transitively) depends on a parameter.

use ndarray::{Array2, Axis};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    MulElem(Var, Var),
    /// m[n,d] + row[1,d]
    AddRow(Var, Var),
    /// m[n,d] * row[1,d]
    MulRow(Var, Var),
    Scale(Var, f64),
    /// x * s with s a 1×1 scalar variable
    ScaleByScalar(Var, Var),
    MatMul { a: Var, b: Var, ta: bool, tb: bool },
    Relu(Var),
    Tanh(Var),
    Softplus(Var),
    SoftmaxRows(Var),
    LogSoftmaxRows(Var),
    SumAll(Var),
    MeanAll(Var),
    SumAxis0(Var),
    MeanAxis0(Var),
    GatherRows { src: Var, idx: Vec<usize> },
    SegmentSum { src: Var, seg: Vec<usize> },
    GatherEntries { src: Var, rows: Vec<usize>, cols: Vec<usize> },
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    L2NormalizeRows(Var),
    LayerNormRows { x: Var, eps: f64 },
    AddConst(Var),
    MaxElem(Var, Var),
}

struct Node {
    value: Array2<f64>,
    grad: Option<Array2<f64>>,
    op: Op,
    needs_grad: bool,
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

impl Graph {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Array2<f64>, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node { value, grad: None, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// Input that gradients are not tracked through.
    pub fn constant(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// Trainable leaf; gradients accumulate here.
    pub fn param(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.nodes[v.0].value
    }

    pub fn grad(&self, v: Var) -> Option<&Array2<f64>> {
        self.nodes[v.0].grad.as_ref()
    }

    pub fn scalar_value(&self, v: Var) -> f64 {
        let a = self.value(v);
        assert_eq!(a.dim(), (1, 1), "expected scalar node");
        a[[0, 0]]
    }

    // ---- ops ----

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.value(a).dim(), self.value(b).dim(), "add shape mismatch");
        let v = self.value(a) + self.value(b);
        let ng = self.needs(a) || self.needs(b);
        self.push(v, Op::Add(a, b), ng)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.value(a).dim(), self.value(b).dim(), "sub shape mismatch");
        let v = self.value(a) - self.value(b);
        let ng = self.needs(a) || self.needs(b);
        self.push(v, Op::Sub(a, b), ng)
    }

    pub fn mul_elem(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.value(a).dim(), self.value(b).dim(), "mul shape mismatch");
        let v = self.value(a) * self.value(b);
        let ng = self.needs(a) || self.needs(b);
        self.push(v, Op::MulElem(a, b), ng)
    }

    pub fn add_row(&mut self, m: Var, row: Var) -> Var {
        assert_eq!(self.value(row).nrows(), 1, "add_row wants a 1×d row");
        assert_eq!(self.value(m).ncols(), self.value(row).ncols(), "add_row width mismatch");
        let v = self.value(m) + &self.value(row).row(0);
        let ng = self.needs(m) || self.needs(row);
        self.push(v, Op::AddRow(m, row), ng)
    }

    pub fn mul_row(&mut self, m: Var, row: Var) -> Var {
        assert_eq!(self.value(row).nrows(), 1, "mul_row wants a 1×d row");
        assert_eq!(self.value(m).ncols(), self.value(row).ncols(), "mul_row width mismatch");
        let v = self.value(m) * &self.value(row).row(0);
        let ng = self.needs(m) || self.needs(row);
        self.push(v, Op::MulRow(m, row), ng)
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        let v = self.value(x) * c;
        let ng = self.needs(x);
        self.push(v, Op::Scale(x, c), ng)
    }

    pub fn scale_by_scalar(&mut self, x: Var, s: Var) -> Var {
        assert_eq!(self.value(s).dim(), (1, 1), "scale_by_scalar wants a 1×1 factor");
        let sv = self.value(s)[[0, 0]];
        let v = self.value(x) * sv;
        let ng = self.needs(x) || self.needs(s);
        self.push(v, Op::ScaleByScalar(x, s), ng)
    }

    pub fn matmul(&mut self, a: Var, b: Var, ta: bool, tb: bool) -> Var {
        let av = self.value(a);
        let bv = self.value(b);
        let v = match (ta, tb) {
            (false, false) => av.dot(bv),
            (true, false) => av.t().dot(bv),
            (false, true) => av.dot(&bv.t()),
            (true, true) => av.t().dot(&bv.t()),
        };
        let ng = self.needs(a) || self.needs(b);
        self.push(v, Op::MatMul { a, b, ta, tb }, ng)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let v = self.value(x).mapv(|t| t.max(0.0));
        let ng = self.needs(x);
        self.push(v, Op::Relu(x), ng)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let v = self.value(x).mapv(f64::tanh);
        let ng = self.needs(x);
        self.push(v, Op::Tanh(x), ng)
    }

    /// ln(1 + e^x), computed stably.
    pub fn softplus(&mut self, x: Var) -> Var {
        let v = self.value(x).mapv(|t| t.max(0.0) + (-t.abs()).exp().ln_1p());
        let ng = self.needs(x);
        self.push(v, Op::Softplus(x), ng)
    }

    pub fn softmax_rows(&mut self, x: Var) -> Var {
        let v = softmax(self.value(x));
        let ng = self.needs(x);
        self.push(v, Op::SoftmaxRows(x), ng)
    }

    pub fn log_softmax_rows(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let mut v = xv.clone();
        for mut row in v.rows_mut() {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = row.iter().map(|&t| (t - max).exp()).sum::<f64>().ln() + max;
            row.mapv_inplace(|t| t - lse);
        }
        let ng = self.needs(x);
        self.push(v, Op::LogSoftmaxRows(x), ng)
    }

    pub fn sum_all(&mut self, x: Var) -> Var {
        let v = Array2::from_elem((1, 1), self.value(x).sum());
        let ng = self.needs(x);
        self.push(v, Op::SumAll(x), ng)
    }

    pub fn mean_all(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let v = Array2::from_elem((1, 1), xv.sum() / xv.len() as f64);
        let ng = self.needs(x);
        self.push(v, Op::MeanAll(x), ng)
    }

    /// Column sums: [n,d] → [1,d].
    pub fn sum_axis0(&mut self, x: Var) -> Var {
        let v = self.value(x).sum_axis(Axis(0)).insert_axis(Axis(0));
        let ng = self.needs(x);
        self.push(v, Op::SumAxis0(x), ng)
    }

    /// Column means: [n,d] → [1,d].
    pub fn mean_axis0(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let n = xv.nrows() as f64;
        let v = (xv.sum_axis(Axis(0)) / n).insert_axis(Axis(0));
        let ng = self.needs(x);
        self.push(v, Op::MeanAxis0(x), ng)
    }

    /// out[k] = src[idx[k]]; duplicate indices allowed (embedding lookup).
    pub fn gather_rows(&mut self, src: Var, idx: Vec<usize>) -> Var {
        let sv = self.value(src);
        let mut v = Array2::zeros((idx.len(), sv.ncols()));
        for (k, &i) in idx.iter().enumerate() {
            v.row_mut(k).assign(&sv.row(i));
        }
        let ng = self.needs(src);
        self.push(v, Op::GatherRows { src, idx }, ng)
    }

    /// out[seg[k]] += src[k]; output has `n_out` rows.
    pub fn segment_sum(&mut self, src: Var, seg: Vec<usize>, n_out: usize) -> Var {
        let sv = self.value(src);
        assert_eq!(sv.nrows(), seg.len(), "segment_sum length mismatch");
        let mut v = Array2::zeros((n_out, sv.ncols()));
        for (k, &s) in seg.iter().enumerate() {
            assert!(s < n_out, "segment id out of range");
            let mut row = v.row_mut(s);
            row += &sv.row(k);
        }
        let ng = self.needs(src);
        self.push(v, Op::SegmentSum { src, seg }, ng)
    }

    /// out[k,0] = src[rows[k], cols[k]].
    pub fn gather_entries(&mut self, src: Var, rows: Vec<usize>, cols: Vec<usize>) -> Var {
        assert_eq!(rows.len(), cols.len());
        let sv = self.value(src);
        let mut v = Array2::zeros((rows.len(), 1));
        for k in 0..rows.len() {
            v[[k, 0]] = sv[[rows[k], cols[k]]];
        }
        let ng = self.needs(src);
        self.push(v, Op::GatherEntries { src, rows, cols }, ng)
    }

    pub fn concat_cols(&mut self, parts: Vec<Var>) -> Var {
        assert!(!parts.is_empty());
        let n = self.value(parts[0]).nrows();
        let total: usize = parts.iter().map(|&p| self.value(p).ncols()).sum();
        let mut v = Array2::zeros((n, total));
        let mut at = 0;
        for &p in &parts {
            let pv = self.value(p);
            assert_eq!(pv.nrows(), n, "concat_cols row mismatch");
            v.slice_mut(ndarray::s![.., at..at + pv.ncols()]).assign(pv);
            at += pv.ncols();
        }
        let ng = parts.iter().any(|&p| self.needs(p));
        self.push(v, Op::ConcatCols(parts), ng)
    }

    pub fn concat_rows(&mut self, parts: Vec<Var>) -> Var {
        assert!(!parts.is_empty());
        let d = self.value(parts[0]).ncols();
        let total: usize = parts.iter().map(|&p| self.value(p).nrows()).sum();
        let mut v = Array2::zeros((total, d));
        let mut at = 0;
        for &p in &parts {
            let pv = self.value(p);
            assert_eq!(pv.ncols(), d, "concat_rows col mismatch");
            v.slice_mut(ndarray::s![at..at + pv.nrows(), ..]).assign(pv);
            at += pv.nrows();
        }
        let ng = parts.iter().any(|&p| self.needs(p));
        self.push(v, Op::ConcatRows(parts), ng)
    }

    /// Row-wise x/‖x‖₂; all-zero rows stay zero.
    pub fn l2_normalize_rows(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let mut v = xv.clone();
        for mut row in v.rows_mut() {
            let n = row.iter().map(|t| t * t).sum::<f64>().sqrt();
            if n > 0.0 {
                row.mapv_inplace(|t| t / n);
            }
        }
        let ng = self.needs(x);
        self.push(v, Op::L2NormalizeRows(x), ng)
    }

    /// Row-wise (x − μ)/σ with σ = sqrt(var + eps); no affine part.
    pub fn layer_norm_rows(&mut self, x: Var, eps: f64) -> Var {
        let xv = self.value(x);
        let mut v = xv.clone();
        for mut row in v.rows_mut() {
            let d = row.len() as f64;
            let mean = row.sum() / d;
            let var = row.iter().map(|&t| (t - mean) * (t - mean)).sum::<f64>() / d;
            let sd = (var + eps).sqrt();
            row.mapv_inplace(|t| (t - mean) / sd);
        }
        let ng = self.needs(x);
        self.push(v, Op::LayerNormRows { x, eps }, ng)
    }

    /// x + c with a non-differentiable constant (masks, positional tables).
    pub fn add_const(&mut self, x: Var, c: &Array2<f64>) -> Var {
        assert_eq!(self.value(x).dim(), c.dim(), "add_const shape mismatch");
        let v = self.value(x) + c;
        let ng = self.needs(x);
        self.push(v, Op::AddConst(x), ng)
    }

    /// Elementwise max; ties send the gradient to the first argument.
    pub fn max_elem(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.value(a).dim(), self.value(b).dim(), "max shape mismatch");
        let v = ndarray::Zip::from(self.value(a))
            .and(self.value(b))
            .map_collect(|&x, &y| x.max(y));
        let ng = self.needs(a) || self.needs(b);
        self.push(v, Op::MaxElem(a, b), ng)
    }

    // ---- backward ----

    /// Reverse sweep from a 1×1 loss node.
    pub fn backward(&mut self, loss: Var) {
        assert_eq!(self.value(loss).dim(), (1, 1), "loss must be scalar");
        self.nodes[loss.0].grad = Some(Array2::ones((1, 1)));
        for i in (0..=loss.0).rev() {
            if !self.nodes[i].needs_grad || self.nodes[i].grad.is_none() {
                continue;
            }
            let gy = self.nodes[i].grad.clone().unwrap();
            // temporarily move the op out to appease the borrow checker
            let op = std::mem::replace(&mut self.nodes[i].op, Op::Leaf);
            self.propagate(&op, i, &gy);
            self.nodes[i].op = op;
        }
    }

    fn accum(&mut self, v: Var, delta: &Array2<f64>) {
        if !self.nodes[v.0].needs_grad {
            return;
        }
        let dim = self.nodes[v.0].value.dim();
        let slot = self.nodes[v.0].grad.get_or_insert_with(|| Array2::zeros(dim));
        *slot += delta;
    }

    fn propagate(&mut self, op: &Op, node: usize, gy: &Array2<f64>) {
        match op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                self.accum(*a, gy);
                self.accum(*b, gy);
            }
            Op::Sub(a, b) => {
                self.accum(*a, gy);
                let neg = gy * -1.0;
                self.accum(*b, &neg);
            }
            Op::MulElem(a, b) => {
                let da = gy * self.value(*b);
                let db = gy * self.value(*a);
                self.accum(*a, &da);
                self.accum(*b, &db);
            }
            Op::AddRow(m, row) => {
                self.accum(*m, gy);
                let dr = gy.sum_axis(Axis(0)).insert_axis(Axis(0));
                self.accum(*row, &dr);
            }
            Op::MulRow(m, row) => {
                let dm = gy * &self.value(*row).row(0);
                let dr = (gy * self.value(*m)).sum_axis(Axis(0)).insert_axis(Axis(0));
                self.accum(*m, &dm);
                self.accum(*row, &dr);
            }
            Op::Scale(x, c) => {
                let dx = gy * *c;
                self.accum(*x, &dx);
            }
            Op::ScaleByScalar(x, s) => {
                let sv = self.value(*s)[[0, 0]];
                let dx = gy * sv;
                let ds = Array2::from_elem((1, 1), (gy * self.value(*x)).sum());
                self.accum(*x, &dx);
                self.accum(*s, &ds);
            }
            Op::MatMul { a, b, ta, tb } => {
                let av = self.value(*a).clone();
                let bv = self.value(*b).clone();
                // dA' = gy · B'ᵀ, dB' = A'ᵀ · gy for C = A'·B'
                let (da, db) = match (ta, tb) {
                    (false, false) => (gy.dot(&bv.t()), av.t().dot(gy)),
                    (false, true) => (gy.dot(&bv), gy.t().dot(&av)),
                    (true, false) => (bv.dot(&gy.t()), av.dot(gy)),
                    (true, true) => (bv.t().dot(&gy.t()), gy.t().dot(&av.t())),
                };
                self.accum(*a, &da);
                self.accum(*b, &db);
            }
            Op::Relu(x) => {
                let dx = ndarray::Zip::from(gy)
                    .and(self.value(*x))
                    .map_collect(|&g, &t| if t > 0.0 { g } else { 0.0 });
                self.accum(*x, &dx);
            }
            Op::Tanh(x) => {
                let y = self.nodes[node].value.clone();
                let dx = ndarray::Zip::from(gy).and(&y).map_collect(|&g, &t| g * (1.0 - t * t));
                self.accum(*x, &dx);
            }
            Op::Softplus(x) => {
                let dx = ndarray::Zip::from(gy)
                    .and(self.value(*x))
                    .map_collect(|&g, &t| g / (1.0 + (-t).exp()));
                self.accum(*x, &dx);
            }
            Op::SoftmaxRows(x) => {
                let y = self.nodes[node].value.clone();
                let mut dx = gy * &y;
                for (mut drow, yrow) in dx.rows_mut().into_iter().zip(y.rows()) {
                    let dot: f64 = drow.sum();
                    ndarray::Zip::from(&mut drow).and(&yrow).for_each(|d, &yv| *d -= dot * yv);
                }
                self.accum(*x, &dx);
            }
            Op::LogSoftmaxRows(x) => {
                let y = self.nodes[node].value.clone();
                let mut dx = gy.clone();
                for (mut drow, yrow) in dx.rows_mut().into_iter().zip(y.rows()) {
                    let gsum: f64 = drow.sum();
                    ndarray::Zip::from(&mut drow)
                        .and(&yrow)
                        .for_each(|d, &lv| *d -= gsum * lv.exp());
                }
                self.accum(*x, &dx);
            }
            Op::SumAll(x) => {
                let g = gy[[0, 0]];
                let dx = Array2::from_elem(self.value(*x).dim(), g);
                self.accum(*x, &dx);
            }
            Op::MeanAll(x) => {
                let dim = self.value(*x).dim();
                let g = gy[[0, 0]] / (dim.0 * dim.1) as f64;
                let dx = Array2::from_elem(dim, g);
                self.accum(*x, &dx);
            }
            Op::SumAxis0(x) => {
                let n = self.value(*x).nrows();
                let dx = gy.broadcast((n, gy.ncols())).unwrap().to_owned();
                self.accum(*x, &dx);
            }
            Op::MeanAxis0(x) => {
                let n = self.value(*x).nrows();
                let scaled = gy / n as f64;
                let dx = scaled.broadcast((n, gy.ncols())).unwrap().to_owned();
                self.accum(*x, &dx);
            }
            Op::GatherRows { src, idx } => {
                let mut dsrc = Array2::zeros(self.value(*src).dim());
                for (k, &i) in idx.iter().enumerate() {
                    let mut row = dsrc.row_mut(i);
                    row += &gy.row(k);
                }
                self.accum(*src, &dsrc);
            }
            Op::SegmentSum { src, seg } => {
                let mut dsrc = Array2::zeros(self.value(*src).dim());
                for (k, &s) in seg.iter().enumerate() {
                    dsrc.row_mut(k).assign(&gy.row(s));
                }
                self.accum(*src, &dsrc);
            }
            Op::GatherEntries { src, rows, cols } => {
                let mut dsrc = Array2::zeros(self.value(*src).dim());
                for k in 0..rows.len() {
                    dsrc[[rows[k], cols[k]]] += gy[[k, 0]];
                }
                self.accum(*src, &dsrc);
            }
            Op::ConcatCols(parts) => {
                let mut at = 0;
                for &p in parts {
                    let w = self.value(p).ncols();
                    let dp = gy.slice(ndarray::s![.., at..at + w]).to_owned();
                    self.accum(p, &dp);
                    at += w;
                }
            }
            Op::ConcatRows(parts) => {
                let mut at = 0;
                for &p in parts {
                    let h = self.value(p).nrows();
                    let dp = gy.slice(ndarray::s![at..at + h, ..]).to_owned();
                    self.accum(p, &dp);
                    at += h;
                }
            }
            Op::L2NormalizeRows(x) => {
                let xv = self.value(*x).clone();
                let y = self.nodes[node].value.clone();
                let mut dx = Array2::zeros(xv.dim());
                for ((mut drow, grow), (yrow, xrow)) in dx
                    .rows_mut()
                    .into_iter()
                    .zip(gy.rows())
                    .zip(y.rows().into_iter().zip(xv.rows()))
                {
                    let n = xrow.iter().map(|t| t * t).sum::<f64>().sqrt();
                    if n == 0.0 {
                        continue;
                    }
                    let dot: f64 = grow.iter().zip(yrow.iter()).map(|(g, yv)| g * yv).sum();
                    ndarray::Zip::from(&mut drow)
                        .and(&grow)
                        .and(&yrow)
                        .for_each(|d, &g, &yv| *d = (g - yv * dot) / n);
                }
                self.accum(*x, &dx);
            }
            Op::LayerNormRows { x, eps } => {
                let xv = self.value(*x).clone();
                let y = self.nodes[node].value.clone();
                let mut dx = Array2::zeros(xv.dim());
                let d = xv.ncols() as f64;
                for ((mut drow, grow), (yrow, xrow)) in dx
                    .rows_mut()
                    .into_iter()
                    .zip(gy.rows())
                    .zip(y.rows().into_iter().zip(xv.rows()))
                {
                    let mean = xrow.sum() / d;
                    let var = xrow.iter().map(|&t| (t - mean) * (t - mean)).sum::<f64>() / d;
                    let sd = (var + eps).sqrt();
                    let gmean: f64 = grow.sum() / d;
                    let gydot: f64 =
                        grow.iter().zip(yrow.iter()).map(|(g, yv)| g * yv).sum::<f64>() / d;
                    ndarray::Zip::from(&mut drow)
                        .and(&grow)
                        .and(&yrow)
                        .for_each(|dv, &g, &yv| *dv = (g - gmean - yv * gydot) / sd);
                }
                self.accum(*x, &dx);
            }
            Op::AddConst(x) => {
                self.accum(*x, gy);
            }
            Op::MaxElem(a, b) => {
                let da = ndarray::Zip::from(gy)
                    .and(self.value(*a))
                    .and(self.value(*b))
                    .map_collect(|&g, &x, &y| if x >= y { g } else { 0.0 });
                let db = ndarray::Zip::from(gy)
                    .and(self.value(*a))
                    .and(self.value(*b))
                    .map_collect(|&g, &x, &y| if x < y { g } else { 0.0 });
                self.accum(*a, &da);
                self.accum(*b, &db);
            }
        }
    }
}

/// Row-wise stable softmax of a plain array.
pub fn softmax(x: &Array2<f64>) -> Array2<f64> {
    let mut v = x.clone();
    for mut row in v.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|t| (t - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|t| t / sum);
    }
    v
}
