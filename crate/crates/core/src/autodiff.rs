//! Reverse-mode automatic differentiation over dense matrices.
//!
//! A [`Tape`] records operations in creation order, which is a topological
//! order of the computation graph, so the backward pass is a single reverse
//! sweep that visits each node once. Parameters are read from a borrowed
//! [`ParamStore`] without copying and their gradients land in a
//! [`Gradients`] buffer indexed by [`ParamId`].

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::{gemm_nt, gemm_tn, Matrix};
use crate::nn::params::{Gradients, ParamId, ParamStore};

/// Handle to a node on a tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Constant,
    Param(ParamId),
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddCol(Var, Var),
    Scale(Var, f64),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    SoftmaxRows(Var),
    SoftmaxCols(Var),
    SliceRows(Var, usize),
    Col(Var, usize),
    ConcatRows(Vec<Var>),
    ConcatCols(Vec<Var>),
    Sum(Var),
    SumSq(Var),
    Pick(Var, Vec<usize>),
    Gather(Var, Vec<usize>),
    SqDist(Var, Var),
    CrossEntropy(Var, Vec<usize>),
    RowNormalize(Var),
    Laplacian(Var),
}

struct Node {
    /// `None` for parameter leaves, whose value lives in the store.
    value: Option<Matrix>,
    /// Cached intermediate for backward (softmax probabilities, row norms).
    aux: Option<Matrix>,
    op: Op,
    requires_grad: bool,
}

static EMPTY_STORE: ParamStore = ParamStore::new();

pub struct Tape<'s> {
    store: &'s ParamStore,
    nodes: Vec<Node>,
    param_nodes: Vec<Option<Var>>,
}

impl Tape<'static> {
    /// A tape with no parameters; everything on it is a constant.
    pub fn detached() -> Self {
        Tape::new(&EMPTY_STORE)
    }
}

impl<'s> Tape<'s> {
    pub fn new(store: &'s ParamStore) -> Self {
        Tape { store, nodes: Vec::with_capacity(256), param_nodes: vec![None; store.len()] }
    }

    pub fn store(&self) -> &'s ParamStore {
        self.store
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Matrix {
        let node = &self.nodes[v.0];
        match (&node.value, &node.op) {
            (Some(m), _) => m,
            (None, Op::Param(id)) => self.store.get(*id),
            _ => unreachable!("node without value"),
        }
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.value(v).shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, value: Matrix, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node { value: Some(value), aux: None, op, requires_grad });
        Var(self.nodes.len() - 1)
    }

    fn push_aux(&mut self, value: Matrix, aux: Matrix, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node { value: Some(value), aux: Some(aux), op, requires_grad });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Constant, false)
    }

    /// Leaf for a stored parameter; repeated calls return the same node.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_nodes[id.0] {
            return v;
        }
        self.nodes.push(Node { value: None, aux: None, op: Op::Param(id), requires_grad: true });
        let v = Var(self.nodes.len() - 1);
        self.param_nodes[id.0] = Some(v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let out = self.value(a).matmul(self.value(b));
        let rg = self.rg(a) || self.rg(b);
        self.push(out, Op::MatMul(a, b), rg)
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let out = self.value(a).transpose();
        let rg = self.rg(a);
        self.push(out, Op::Transpose(a), rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let out = self.value(a).add(self.value(b));
        let rg = self.rg(a) || self.rg(b);
        self.push(out, Op::Add(a, b), rg)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let out = self.value(a).sub(self.value(b));
        let rg = self.rg(a) || self.rg(b);
        self.push(out, Op::Sub(a, b), rg)
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let out = self.value(a).hadamard(self.value(b));
        let rg = self.rg(a) || self.rg(b);
        self.push(out, Op::Mul(a, b), rg)
    }

    /// `a + b·1ᵀ`: adds the column vector `b` to every column of `a`.
    pub fn add_col(&mut self, a: Var, b: Var) -> Var {
        let (av, bv) = (self.value(a), self.value(b));
        assert_eq!(bv.shape(), (av.rows(), 1), "add_col expects a matching column vector");
        let mut out = av.clone();
        for i in 0..out.rows() {
            let bi = bv.get(i, 0);
            for x in out.row_mut(i) {
                *x += bi;
            }
        }
        let rg = self.rg(a) || self.rg(b);
        self.push(out, Op::AddCol(a, b), rg)
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let out = self.value(a).scale(s);
        let rg = self.rg(a);
        self.push(out, Op::Scale(a, s), rg)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).map(sigmoid);
        let rg = self.rg(a);
        self.push(out, Op::Sigmoid(a), rg)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.value(a).map(libm::tanh);
        let rg = self.rg(a);
        self.push(out, Op::Tanh(a), rg)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| if x > 0.0 { x } else { 0.0 });
        let rg = self.rg(a);
        self.push(out, Op::Relu(a), rg)
    }

    /// Softmax along each row.
    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let mut out = self.value(a).clone();
        for i in 0..out.rows() {
            softmax_in_place(out.row_mut(i));
        }
        let rg = self.rg(a);
        self.push(out, Op::SoftmaxRows(a), rg)
    }

    /// Softmax down each column.
    pub fn softmax_cols(&mut self, a: Var) -> Var {
        let out = softmax_columns(self.value(a));
        let rg = self.rg(a);
        self.push(out, Op::SoftmaxCols(a), rg)
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Var {
        let out = self.value(a).slice_rows(start, len);
        let rg = self.rg(a);
        self.push(out, Op::SliceRows(a, start), rg)
    }

    /// Column `j` as a `rows×1` matrix.
    pub fn col(&mut self, a: Var, j: usize) -> Var {
        let out = Matrix::column(self.value(a).col(j));
        let rg = self.rg(a);
        self.push(out, Op::Col(a, j), rg)
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        let mats: Vec<&Matrix> = parts.iter().map(|&p| self.value(p)).collect();
        let out = Matrix::vstack(&mats);
        let rg = parts.iter().any(|&p| self.rg(p));
        self.push(out, Op::ConcatRows(parts.to_vec()), rg)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let mats: Vec<&Matrix> = parts.iter().map(|&p| self.value(p)).collect();
        let out = Matrix::hstack(&mats);
        let rg = parts.iter().any(|&p| self.rg(p));
        self.push(out, Op::ConcatCols(parts.to_vec()), rg)
    }

    /// Sum of all entries, as `1×1`.
    pub fn sum(&mut self, a: Var) -> Var {
        let out = Matrix::scalar(self.value(a).sum());
        let rg = self.rg(a);
        self.push(out, Op::Sum(a), rg)
    }

    /// Squared Frobenius norm, as `1×1`.
    pub fn sum_sq(&mut self, a: Var) -> Var {
        let out = Matrix::scalar(self.value(a).frobenius_sq());
        let rg = self.rg(a);
        self.push(out, Op::SumSq(a), rg)
    }

    /// Mean of all entries, as `1×1`.
    pub fn mean(&mut self, a: Var) -> Var {
        let n = self.value(a).len() as f64;
        let s = self.sum(a);
        self.scale(s, 1.0 / n)
    }

    /// `1×n` row holding `a[rows[i], i]`.
    pub fn pick(&mut self, a: Var, rows: &[usize]) -> Var {
        let av = self.value(a);
        assert_eq!(rows.len(), av.cols(), "pick needs one row index per column");
        let out = Matrix::from_fn(1, av.cols(), |_, i| av.get(rows[i], i));
        let rg = self.rg(a);
        self.push(out, Op::Pick(a, rows.to_vec()), rg)
    }

    /// `1×n` row holding `v[idx[i]]` for a column vector `v`.
    pub fn gather(&mut self, v: Var, idx: &[usize]) -> Var {
        let vv = self.value(v);
        assert_eq!(vv.cols(), 1, "gather expects a column vector");
        let out = Matrix::from_fn(1, idx.len(), |_, i| vv.get(idx[i], 0));
        let rg = self.rg(v);
        self.push(out, Op::Gather(v, idx.to_vec()), rg)
    }

    /// Squared Euclidean distances `D[k,i] = ‖points[:,i] − centers[k,:]‖²`
    /// for `points: d×n`, `centers: C×d`; result is `C×n`.
    pub fn sq_dist(&mut self, points: Var, centers: Var) -> Var {
        let (p, m) = (self.value(points), self.value(centers));
        assert_eq!(p.rows(), m.cols(), "sq_dist dimension mismatch");
        let (d, n, c) = (p.rows(), p.cols(), m.rows());
        let mut out = Matrix::zeros(c, n);
        for k in 0..c {
            let mk = m.row(k);
            for i in 0..n {
                let mut s = 0.0;
                for (j, mkj) in mk.iter().enumerate().take(d) {
                    let diff = p.get(j, i) - mkj;
                    s += diff * diff;
                }
                out.set(k, i, s);
            }
        }
        let rg = self.rg(points) || self.rg(centers);
        self.push(out, Op::SqDist(points, centers), rg)
    }

    /// Mean softmax cross-entropy of `logits: C×n` against `labels`,
    /// max-shift stabilized. Panics on out-of-range labels; validate first.
    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Var {
        let z = self.value(logits);
        assert_eq!(labels.len(), z.cols(), "one label per column");
        let probs = softmax_columns(z);
        let n = z.cols() as f64;
        let mut loss = 0.0;
        for (i, &y) in labels.iter().enumerate() {
            let top = (0..z.rows()).fold(0, |b, k| if z.get(k, i) > z.get(b, i) { k } else { b });
            let col_max = z.get(top, i);
            // log-sum-exp as max + log1p(rest) keeps tiny losses representable
            let rest: f64 = (0..z.rows()).filter(|&k| k != top).map(|k| libm::exp(z.get(k, i) - col_max)).sum();
            loss += (col_max - z.get(y, i)) + libm::log1p(rest);
        }
        let rg = self.rg(logits);
        self.push_aux(Matrix::scalar(loss / n), probs, Op::CrossEntropy(logits, labels.to_vec()), rg)
    }

    /// Scales each row to unit Euclidean norm; zero rows stay zero.
    pub fn row_normalize(&mut self, a: Var) -> Var {
        let av = self.value(a);
        let mut out = av.clone();
        let mut norms = Matrix::zeros(av.rows(), 1);
        for i in 0..av.rows() {
            let nrm = libm::sqrt(crate::matrix::dot(av.row(i), av.row(i)));
            norms.set(i, 0, nrm);
            let inv = if nrm > 0.0 { 1.0 / nrm } else { 0.0 };
            for x in out.row_mut(i) {
                *x *= inv;
            }
        }
        let rg = self.rg(a);
        self.push_aux(out, norms, Op::RowNormalize(a), rg)
    }

    /// Graph Laplacian `diag(W·1) − W` of a square weight matrix.
    pub fn laplacian(&mut self, w: Var) -> Var {
        let out = crate::graph::laplacian(self.value(w));
        let rg = self.rg(w);
        self.push(out, Op::Laplacian(w), rg)
    }

    /// Backward pass from a scalar loss into a fresh gradient buffer.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let mut grads = Gradients::for_store(self.store);
        self.backward_into(loss, 1.0, &mut grads)?;
        Ok(grads)
    }

    /// Accumulates `scale · ∂loss/∂p` into `grads` for every reachable
    /// parameter `p`.
    pub fn backward_into(&self, loss: Var, scale: f64, grads: &mut Gradients) -> Result<()> {
        let (r, c) = self.shape(loss);
        if (r, c) != (1, 1) {
            return Err(Error::NonScalarLoss { rows: r, cols: c });
        }
        let mut adj: Vec<Option<Matrix>> = (0..=loss.0).map(|_| None).collect();
        adj[loss.0] = Some(Matrix::scalar(scale));

        for idx in (0..=loss.0).rev() {
            let Some(g) = adj[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            self.propagate(node, &g, &mut adj, grads);
        }
        Ok(())
    }

    fn propagate(
        &self,
        node: &Node,
        g: &Matrix,
        adj: &mut [Option<Matrix>],
        grads: &mut Gradients,
    ) {
        let out = || node.value.as_ref().expect("op node value");
        match &node.op {
            Op::Constant => {}
            Op::Param(id) => grads.accumulate(*id, 1.0, g),
            Op::MatMul(a, b) => {
                if self.rg(*a) {
                    let slot = slot(adj, *a, self.shape(*a));
                    gemm_nt(g, self.value(*b), slot);
                }
                if self.rg(*b) {
                    let slot = slot(adj, *b, self.shape(*b));
                    gemm_tn(self.value(*a), g, slot);
                }
            }
            Op::Transpose(a) => acc(adj, *a, &g.transpose()),
            Op::Add(a, b) => {
                self.acc_if(adj, *a, g);
                self.acc_if(adj, *b, g);
            }
            Op::Sub(a, b) => {
                self.acc_if(adj, *a, g);
                if self.rg(*b) {
                    slot(adj, *b, g.shape()).axpy(-1.0, g);
                }
            }
            Op::Mul(a, b) => {
                if self.rg(*a) {
                    acc(adj, *a, &g.hadamard(self.value(*b)));
                }
                if self.rg(*b) {
                    acc(adj, *b, &g.hadamard(self.value(*a)));
                }
            }
            Op::AddCol(a, b) => {
                self.acc_if(adj, *a, g);
                if self.rg(*b) {
                    let sums = Matrix::from_fn(g.rows(), 1, |i, _| g.row(i).iter().sum());
                    acc(adj, *b, &sums);
                }
            }
            Op::Scale(a, s) => slot(adj, *a, g.shape()).axpy(*s, g),
            Op::Sigmoid(a) => acc(adj, *a, &g.zip_map(out(), |gi, y| gi * y * (1.0 - y))),
            Op::Tanh(a) => acc(adj, *a, &g.zip_map(out(), |gi, y| gi * (1.0 - y * y))),
            Op::Relu(a) => acc(adj, *a, &g.zip_map(out(), |gi, y| if y > 0.0 { gi } else { 0.0 })),
            Op::SoftmaxRows(a) => {
                let y = out();
                let mut gin = Matrix::zeros(y.rows(), y.cols());
                for i in 0..y.rows() {
                    let (yr, gr) = (y.row(i), g.row(i));
                    let s = crate::matrix::dot(yr, gr);
                    for (j, o) in gin.row_mut(i).iter_mut().enumerate() {
                        *o = yr[j] * (gr[j] - s);
                    }
                }
                acc(adj, *a, &gin);
            }
            Op::SoftmaxCols(a) => {
                let y = out();
                let mut gin = Matrix::zeros(y.rows(), y.cols());
                for j in 0..y.cols() {
                    let s: f64 = (0..y.rows()).map(|i| y.get(i, j) * g.get(i, j)).sum();
                    for i in 0..y.rows() {
                        gin.set(i, j, y.get(i, j) * (g.get(i, j) - s));
                    }
                }
                acc(adj, *a, &gin);
            }
            Op::SliceRows(a, start) => {
                let dst = slot(adj, *a, self.shape(*a));
                let cols = g.cols();
                for i in 0..g.rows() {
                    for (d, s) in dst.row_mut(start + i).iter_mut().zip(g.row(i)) {
                        *d += s;
                    }
                }
                debug_assert_eq!(cols, dst.cols());
            }
            Op::Col(a, j) => {
                let dst = slot(adj, *a, self.shape(*a));
                for i in 0..g.rows() {
                    dst[(i, *j)] += g.get(i, 0);
                }
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let rows = self.shape(p).0;
                    if self.rg(p) {
                        acc(adj, p, &g.slice_rows(offset, rows));
                    }
                    offset += rows;
                }
            }
            Op::ConcatCols(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let cols = self.shape(p).1;
                    if self.rg(p) {
                        acc(adj, p, &g.slice_cols(offset, cols));
                    }
                    offset += cols;
                }
            }
            Op::Sum(a) => {
                let s = g.item();
                for x in slot(adj, *a, self.shape(*a)).as_mut_slice() {
                    *x += s;
                }
            }
            Op::SumSq(a) => {
                let s = 2.0 * g.item();
                slot(adj, *a, self.shape(*a)).axpy(s, self.value(*a));
            }
            Op::Pick(a, rows) => {
                let dst = slot(adj, *a, self.shape(*a));
                for (i, &r) in rows.iter().enumerate() {
                    dst[(r, i)] += g.get(0, i);
                }
            }
            Op::Gather(v, gidx) => {
                let dst = slot(adj, *v, self.shape(*v));
                for (i, &r) in gidx.iter().enumerate() {
                    dst[(r, 0)] += g.get(0, i);
                }
            }
            Op::SqDist(points, centers) => {
                let (p, m) = (self.value(*points), self.value(*centers));
                let (d, n, c) = (p.rows(), p.cols(), m.rows());
                // ∂D[k,i]/∂p[j,i] = 2(p[j,i] − m[k,j]) = −∂D[k,i]/∂m[k,j]
                if self.rg(*points) {
                    let mut gp = Matrix::zeros(d, n);
                    for k in 0..c {
                        for i in 0..n {
                            let gki = 2.0 * g.get(k, i);
                            if gki == 0.0 {
                                continue;
                            }
                            for j in 0..d {
                                gp[(j, i)] += gki * (p.get(j, i) - m.get(k, j));
                            }
                        }
                    }
                    acc(adj, *points, &gp);
                }
                if self.rg(*centers) {
                    let mut gm = Matrix::zeros(c, d);
                    for k in 0..c {
                        for i in 0..n {
                            let gki = 2.0 * g.get(k, i);
                            if gki == 0.0 {
                                continue;
                            }
                            for j in 0..d {
                                gm[(k, j)] -= gki * (p.get(j, i) - m.get(k, j));
                            }
                        }
                    }
                    acc(adj, *centers, &gm);
                }
            }
            Op::CrossEntropy(logits, labels) => {
                let probs = node.aux.as_ref().expect("cached probabilities");
                let n = labels.len() as f64;
                let s = g.item() / n;
                let mut gz = probs.scale(s);
                for (i, &y) in labels.iter().enumerate() {
                    gz[(y, i)] -= s;
                }
                acc(adj, *logits, &gz);
            }
            Op::RowNormalize(a) => {
                let y = out();
                let norms = node.aux.as_ref().expect("cached norms");
                let mut gin = Matrix::zeros(y.rows(), y.cols());
                for i in 0..y.rows() {
                    let nrm = norms.get(i, 0);
                    if nrm == 0.0 {
                        continue;
                    }
                    let (yr, gr) = (y.row(i), g.row(i));
                    let proj = crate::matrix::dot(yr, gr);
                    for (j, o) in gin.row_mut(i).iter_mut().enumerate() {
                        *o = (gr[j] - yr[j] * proj) / nrm;
                    }
                }
                acc(adj, *a, &gin);
            }
            Op::Laplacian(w) => {
                let n = g.rows();
                let gw = Matrix::from_fn(n, n, |k, l| g.get(k, k) - g.get(k, l));
                acc(adj, *w, &gw);
            }
        }
    }

    fn acc_if(&self, adj: &mut [Option<Matrix>], v: Var, g: &Matrix) {
        if self.rg(v) {
            acc(adj, v, g);
        }
    }
}

fn slot(adj: &mut [Option<Matrix>], v: Var, shape: (usize, usize)) -> &mut Matrix {
    adj[v.0].get_or_insert_with(|| Matrix::zeros(shape.0, shape.1))
}

fn acc(adj: &mut [Option<Matrix>], v: Var, g: &Matrix) {
    match &mut adj[v.0] {
        Some(m) => m.add_assign(g),
        s @ None => *s = Some(g.clone()),
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// Max-shifted softmax of a slice, in place.
pub fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for x in v.iter_mut() {
        *x = libm::exp(*x - max);
        s += *x;
    }
    for x in v.iter_mut() {
        *x /= s;
    }
}

fn softmax_columns(a: &Matrix) -> Matrix {
    let t = a.transpose();
    let mut out = t;
    for i in 0..out.rows() {
        softmax_in_place(out.row_mut(i));
    }
    out.transpose()
}
