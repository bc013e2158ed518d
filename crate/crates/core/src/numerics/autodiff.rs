//! A small reverse-mode differentiation tape over dense matrices.
//!
//! Every trainable loss in the crate is written against [`Graph`]; the same
//! node-building functions back both the plain `f64` loss evaluators and the
//! optimiser, so `grad_check` exercises exactly the code that trains.

use std::sync::Arc;

use super::expm::acyclicity_with_grad;
use super::sparse::CsrMatrix;
use super::DenseMatrix;

/// Handle to a node on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    /// a * bᵀ
    MatMulTransB(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    Sub(Var, Var),
    AddRow(Var, Var),
    AddScalar(Var),
    Scale(Var, f64),
    Hadamard(Var, Var),
    /// (m x k) scaled row-wise by an (m x 1) column
    MulCol(Var, Var),
    Relu(Var),
    Tanh(Var),
    Sigmoid(Var),
    Log(Var),
    Clamp(Var, f64, f64),
    SoftmaxRows(Var),
    HConcat(Vec<Var>),
    VConcat(Vec<Var>),
    SliceCols(Var, usize, usize),
    SliceRows(Var, usize, usize),
    GatherRows(Var, Arc<Vec<usize>>),
    Sparse(Arc<CsrMatrix>, Var),
    Sum(Var),
    Mean(Var),
    /// row sums, (m x k) -> (m x 1)
    RowSum(Var),
    AbsSum(Var),
    /// column L1 norms, (m x k) -> (1 x k)
    ColAbsSum(Var),
    /// identity forward, gradient scaled by −λ
    Reverse(Var, f64),
    /// sqrt of the sum of squares of every entry of every input
    GlobalNorm(Vec<Var>),
    /// gradient computed at forward time (acyclicity)
    CachedGrad(Var, usize),
}

struct Node {
    value: DenseMatrix,
    op: Op,
    needs_grad: bool,
}

/// Reverse-mode tape. Nodes are appended in topological order.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
    cached: Vec<DenseMatrix>,
}

/// Gradients of a scalar output with respect to every node that needed one.
pub struct Gradients {
    grads: Vec<Option<DenseMatrix>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&DenseMatrix> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient, or zeros of the given shape when the node did not influence the output.
    pub fn get_or_zeros(&self, v: Var, rows: usize, cols: usize) -> DenseMatrix {
        self.get(v).cloned().unwrap_or_else(|| DenseMatrix::zeros(rows, cols))
    }

    pub fn take(&mut self, v: Var) -> Option<DenseMatrix> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: DenseMatrix, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn ng(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    pub fn value(&self, v: Var) -> &DenseMatrix {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value.item()
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: DenseMatrix) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Non-trainable leaf.
    pub fn constant(&mut self, value: DenseMatrix) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).matmul(self.value(b)).expect("graph matmul shape");
        let ng = self.ng(a) || self.ng(b);
        self.push(v, Op::MatMul(a, b), ng)
    }

    pub fn matmul_transb(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).matmul_transb(self.value(b));
        let ng = self.ng(a) || self.ng(b);
        self.push(v, Op::MatMulTransB(a, b), ng)
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let v = self.value(a).transpose();
        let ng = self.ng(a);
        self.push(v, Op::Transpose(a), ng)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).add(self.value(b));
        let ng = self.ng(a) || self.ng(b);
        self.push(v, Op::Add(a, b), ng)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).sub(self.value(b));
        let ng = self.ng(a) || self.ng(b);
        self.push(v, Op::Sub(a, b), ng)
    }

    /// Adds a 1 x k bias row to every row of `a`.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Var {
        let v = self.value(a).add_row_broadcast(self.value(bias));
        let ng = self.ng(a) || self.ng(bias);
        self.push(v, Op::AddRow(a, bias), ng)
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a).map(|x| x + c);
        let ng = self.ng(a);
        self.push(v, Op::AddScalar(a), ng)
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let v = self.value(a).scale(s);
        let ng = self.ng(a);
        self.push(v, Op::Scale(a, s), ng)
    }

    pub fn hadamard(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).hadamard(self.value(b));
        let ng = self.ng(a) || self.ng(b);
        self.push(v, Op::Hadamard(a, b), ng)
    }

    /// Scales row i of `a` (m x k) by `w[i]` where `w` is m x 1.
    pub fn mul_col(&mut self, a: Var, w: Var) -> Var {
        let av = self.value(a);
        let wv = self.value(w);
        assert_eq!(wv.shape(), (av.rows(), 1), "mul_col weight shape");
        let mut v = av.clone();
        for i in 0..av.rows() {
            let s = wv[(i, 0)];
            v.row_mut(i).iter_mut().for_each(|x| *x *= s);
        }
        let ng = self.ng(a) || self.ng(w);
        self.push(v, Op::MulCol(a, w), ng)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| if x > 0.0 { x } else { 0.0 });
        let ng = self.ng(a);
        self.push(v, Op::Relu(a), ng)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).map(f64::tanh);
        let ng = self.ng(a);
        self.push(v, Op::Tanh(a), ng)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a).map(sigmoid);
        let ng = self.ng(a);
        self.push(v, Op::Sigmoid(a), ng)
    }

    pub fn log(&mut self, a: Var) -> Var {
        let v = self.value(a).map(f64::ln);
        let ng = self.ng(a);
        self.push(v, Op::Log(a), ng)
    }

    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        let v = self.value(a).map(|x| x.clamp(lo, hi));
        let ng = self.ng(a);
        self.push(v, Op::Clamp(a, lo, hi), ng)
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let av = self.value(a);
        let mut v = av.clone();
        for i in 0..av.rows() {
            softmax_in_place(v.row_mut(i));
        }
        let ng = self.ng(a);
        self.push(v, Op::SoftmaxRows(a), ng)
    }

    pub fn hconcat(&mut self, parts: &[Var]) -> Var {
        let vals: Vec<&DenseMatrix> = parts.iter().map(|&p| self.value(p)).collect();
        let v = DenseMatrix::hconcat(&vals);
        let ng = parts.iter().any(|&p| self.ng(p));
        self.push(v, Op::HConcat(parts.to_vec()), ng)
    }

    pub fn vconcat(&mut self, parts: &[Var]) -> Var {
        let vals: Vec<&DenseMatrix> = parts.iter().map(|&p| self.value(p)).collect();
        let v = DenseMatrix::vconcat(&vals);
        let ng = parts.iter().any(|&p| self.ng(p));
        self.push(v, Op::VConcat(parts.to_vec()), ng)
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Var {
        let v = self.value(a).slice_cols(start, end);
        let ng = self.ng(a);
        self.push(v, Op::SliceCols(a, start, end), ng)
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, end: usize) -> Var {
        let v = self.value(a).slice_rows(start, end);
        let ng = self.ng(a);
        self.push(v, Op::SliceRows(a, start, end), ng)
    }

    pub fn gather_rows(&mut self, a: Var, idx: Arc<Vec<usize>>) -> Var {
        let v = self.value(a).gather_rows(&idx);
        let ng = self.ng(a);
        self.push(v, Op::GatherRows(a, idx), ng)
    }

    /// `s * a` for a fixed sparse operator `s`.
    pub fn sparse_matmul(&mut self, s: Arc<CsrMatrix>, a: Var) -> Var {
        let v = s.matmul(self.value(a));
        let ng = self.ng(a);
        self.push(v, Op::Sparse(s, a), ng)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let v = DenseMatrix::scalar(self.value(a).sum());
        let ng = self.ng(a);
        self.push(v, Op::Sum(a), ng)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let av = self.value(a);
        let v = DenseMatrix::scalar(av.sum() / av.len() as f64);
        let ng = self.ng(a);
        self.push(v, Op::Mean(a), ng)
    }

    pub fn row_sum(&mut self, a: Var) -> Var {
        let av = self.value(a);
        let v = DenseMatrix::from_fn(av.rows(), 1, |i, _| av.row(i).iter().sum());
        let ng = self.ng(a);
        self.push(v, Op::RowSum(a), ng)
    }

    pub fn abs_sum(&mut self, a: Var) -> Var {
        let v = DenseMatrix::scalar(self.value(a).abs_sum());
        let ng = self.ng(a);
        self.push(v, Op::AbsSum(a), ng)
    }

    pub fn col_abs_sum(&mut self, a: Var) -> Var {
        let av = self.value(a);
        let v = DenseMatrix::from_fn(1, av.cols(), |_, j| (0..av.rows()).map(|i| av[(i, j)].abs()).sum());
        let ng = self.ng(a);
        self.push(v, Op::ColAbsSum(a), ng)
    }

    /// h(A) = Tr(e^{A∘A}) − d as a 1x1 node.
    pub fn acyclicity(&mut self, a: Var) -> Var {
        let (h, grad) = acyclicity_with_grad(self.value(a)).expect("acyclicity of a square finite matrix");
        let ng = self.ng(a);
        self.cached.push(grad);
        let slot = self.cached.len() - 1;
        self.push(DenseMatrix::scalar(h), Op::CachedGrad(a, slot), ng)
    }

    /// Gradient reversal: forward identity, backward scaled by −λ.
    pub fn reverse_grad(&mut self, a: Var, lambda: f64) -> Var {
        let v = self.value(a).clone();
        let ng = self.ng(a);
        self.push(v, Op::Reverse(a, lambda), ng)
    }

    /// L2 norm over all entries of all inputs, as one global norm.
    pub fn global_norm(&mut self, parts: &[Var]) -> Var {
        let sq: f64 = parts.iter().map(|&p| self.value(p).as_slice().iter().map(|x| x * x).sum::<f64>()).sum();
        let ng = parts.iter().any(|&p| self.ng(p));
        self.push(DenseMatrix::scalar(sq.sqrt()), Op::GlobalNorm(parts.to_vec()), ng)
    }

    /// Backpropagates from a 1x1 output.
    pub fn backward(&self, out: Var) -> Gradients {
        assert_eq!(self.value(out).shape(), (1, 1), "backward from a non-scalar node");
        let mut grads: Vec<Option<DenseMatrix>> = vec![None; self.nodes.len()];
        grads[out.0] = Some(DenseMatrix::scalar(1.0));

        for idx in (0..=out.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            self.propagate(&node.op, idx, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Gradients { grads }
    }

    fn propagate(&self, op: &Op, idx: usize, g: &DenseMatrix, grads: &mut [Option<DenseMatrix>]) {
        let mut acc = |v: Var, delta: DenseMatrix| {
            if !self.nodes[v.0].needs_grad {
                return;
            }
            match &mut grads[v.0] {
                Some(existing) => existing.add_assign(&delta),
                slot @ None => *slot = Some(delta),
            }
        };
        match op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if self.ng(*a) {
                    acc(*a, g.matmul_transb(self.value(*b)));
                }
                if self.ng(*b) {
                    acc(*b, self.value(*a).transa_matmul(g));
                }
            }
            Op::MatMulTransB(a, b) => {
                // out = a bᵀ: da = g b, db = gᵀ a
                if self.ng(*a) {
                    acc(*a, g.matmul_unchecked(self.value(*b)));
                }
                if self.ng(*b) {
                    acc(*b, g.transa_matmul(self.value(*a)));
                }
            }
            Op::Transpose(a) => acc(*a, g.transpose()),
            Op::Add(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.clone());
            }
            Op::Sub(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.scale(-1.0));
            }
            Op::AddRow(a, bias) => {
                acc(*a, g.clone());
                if self.ng(*bias) {
                    let mut s = DenseMatrix::zeros(1, g.cols());
                    for i in 0..g.rows() {
                        for (o, v) in s.as_mut_slice().iter_mut().zip(g.row(i)) {
                            *o += v;
                        }
                    }
                    acc(*bias, s);
                }
            }
            Op::AddScalar(a) => acc(*a, g.clone()),
            Op::Scale(a, s) => acc(*a, g.scale(*s)),
            Op::Hadamard(a, b) => {
                if self.ng(*a) {
                    acc(*a, g.hadamard(self.value(*b)));
                }
                if self.ng(*b) {
                    acc(*b, g.hadamard(self.value(*a)));
                }
            }
            Op::MulCol(a, w) => {
                let av = self.value(*a);
                let wv = self.value(*w);
                if self.ng(*a) {
                    let mut d = g.clone();
                    for i in 0..d.rows() {
                        let s = wv[(i, 0)];
                        d.row_mut(i).iter_mut().for_each(|x| *x *= s);
                    }
                    acc(*a, d);
                }
                if self.ng(*w) {
                    let d = DenseMatrix::from_fn(av.rows(), 1, |i, _| {
                        av.row(i).iter().zip(g.row(i)).map(|(x, y)| x * y).sum()
                    });
                    acc(*w, d);
                }
            }
            Op::Relu(a) => {
                let d = self.value(*a).zip_map(g, |x, gv| if x > 0.0 { gv } else { 0.0 });
                acc(*a, d);
            }
            Op::Tanh(a) => {
                let y = &self.nodes[idx].value;
                acc(*a, y.zip_map(g, |t, gv| (1.0 - t * t) * gv));
            }
            Op::Sigmoid(a) => {
                let y = &self.nodes[idx].value;
                acc(*a, y.zip_map(g, |s, gv| s * (1.0 - s) * gv));
            }
            Op::Log(a) => acc(*a, self.value(*a).zip_map(g, |x, gv| gv / x)),
            Op::Clamp(a, lo, hi) => {
                let d = self
                    .value(*a)
                    .zip_map(g, |x, gv| if x >= *lo && x <= *hi { gv } else { 0.0 });
                acc(*a, d);
            }
            Op::SoftmaxRows(a) => {
                let y = &self.nodes[idx].value;
                let mut d = DenseMatrix::zeros(y.rows(), y.cols());
                for i in 0..y.rows() {
                    let yr = y.row(i);
                    let gr = g.row(i);
                    let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                    for (o, (yv, gv)) in d.row_mut(i).iter_mut().zip(yr.iter().zip(gr)) {
                        *o = yv * (gv - dot);
                    }
                }
                acc(*a, d);
            }
            Op::HConcat(parts) => {
                let mut off = 0;
                for &p in parts {
                    let w = self.value(p).cols();
                    if self.ng(p) {
                        acc(p, g.slice_cols(off, off + w));
                    }
                    off += w;
                }
            }
            Op::VConcat(parts) => {
                let mut off = 0;
                for &p in parts {
                    let h = self.value(p).rows();
                    if self.ng(p) {
                        acc(p, g.slice_rows(off, off + h));
                    }
                    off += h;
                }
            }
            Op::SliceCols(a, start, _end) => {
                let av = self.value(*a);
                let mut d = DenseMatrix::zeros(av.rows(), av.cols());
                for i in 0..g.rows() {
                    d.row_mut(i)[*start..*start + g.cols()].copy_from_slice(g.row(i));
                }
                acc(*a, d);
            }
            Op::SliceRows(a, start, _end) => {
                let av = self.value(*a);
                let mut d = DenseMatrix::zeros(av.rows(), av.cols());
                for i in 0..g.rows() {
                    d.row_mut(start + i).copy_from_slice(g.row(i));
                }
                acc(*a, d);
            }
            Op::GatherRows(a, ids) => {
                let av = self.value(*a);
                let mut d = DenseMatrix::zeros(av.rows(), av.cols());
                for (o, &i) in ids.iter().enumerate() {
                    for (x, y) in d.row_mut(i).iter_mut().zip(g.row(o)) {
                        *x += y;
                    }
                }
                acc(*a, d);
            }
            Op::Sparse(s, a) => acc(*a, s.transpose_matmul(g)),
            Op::Sum(a) => {
                let av = self.value(*a);
                acc(*a, DenseMatrix::filled(av.rows(), av.cols(), g.item()));
            }
            Op::Mean(a) => {
                let av = self.value(*a);
                acc(*a, DenseMatrix::filled(av.rows(), av.cols(), g.item() / av.len() as f64));
            }
            Op::RowSum(a) => {
                let av = self.value(*a);
                acc(*a, DenseMatrix::from_fn(av.rows(), av.cols(), |i, _| g[(i, 0)]));
            }
            Op::AbsSum(a) => {
                let gv = g.item();
                acc(*a, self.value(*a).map(|x| sign(x) * gv));
            }
            Op::ColAbsSum(a) => {
                let av = self.value(*a);
                acc(*a, DenseMatrix::from_fn(av.rows(), av.cols(), |i, j| sign(av[(i, j)]) * g[(0, j)]));
            }
            Op::CachedGrad(a, slot) => acc(*a, self.cached[*slot].scale(g.item())),
            Op::Reverse(a, lambda) => acc(*a, g.scale(-lambda)),
            Op::GlobalNorm(parts) => {
                let norm = self.nodes[idx].value.item();
                if norm > 0.0 {
                    let s = g.item() / norm;
                    for &p in parts {
                        if self.ng(p) {
                            acc(p, self.value(p).scale(s));
                        }
                    }
                }
            }
        }
    }
}

#[inline]
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable in-place softmax.
pub fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        total += *x;
    }
    for x in v.iter_mut() {
        *x /= total;
    }
}
