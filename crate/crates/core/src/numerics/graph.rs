//! Recording graph for reverse-mode differentiation.
//!
//! Every op appends one node holding its forward value. `backward` walks the
//! nodes in reverse insertion order, which is a valid reverse topological order
//! because inputs always precede their consumers.

use super::tensor::{Mask, Tensor};
use super::NumericsError;

/// Handle to a node inside a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Transpose(Var),
    Scale(Var, f64),
    Add(Var, Var),
    MaskedSoftmax(Var),
    AvgPoolRows { input: Var, kernel: usize, stride: usize },
    SelectRows { input: Var, rows: Vec<usize> },
    ScatterRows { parts: Vec<(Var, Vec<usize>)> },
    Sum(Var),
    WeightedSum(Var, Vec<f64>),
}

#[derive(Clone, Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Append-only computation graph. Values are immutable once recorded.
#[derive(Clone, Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    macs: u64,
}

/// Gradients produced by one backward pass, indexed by [`Var`].
#[derive(Clone, Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    pub fn get(&self, var: Var) -> Option<&[f64]> {
        self.grads.get(var.0).and_then(|g| g.as_deref())
    }

    /// Copy of the node's value with its gradient slot filled (zeros if the
    /// node did not receive any gradient).
    pub fn tensor(&self, graph: &Graph, var: Var) -> Tensor {
        let mut t = graph.value(var).clone();
        let g = self.get(var).map(|g| g.to_vec()).unwrap_or_else(|| vec![0.0; t.len()]);
        t.set_grad(g).expect("gradient shape matches value");
        t
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

    /// Multiply-accumulate operations performed by all matmuls so far.
    pub fn macs(&self) -> u64 {
        self.macs
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    /// Leaf that receives gradients.
    pub fn param(&mut self, mut t: Tensor) -> Var {
        t.clear_grad();
        self.push(t, Op::Leaf, true)
    }

    /// Leaf that never receives gradients.
    pub fn constant(&mut self, mut t: Tensor) -> Var {
        t.clear_grad();
        self.push(t, Op::Leaf, false)
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    fn matrix_dims(&self, v: Var) -> Result<(usize, usize), NumericsError> {
        self.value(v).require_matrix()
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        let (m, k) = self.matrix_dims(a)?;
        let (k2, n) = self.matrix_dims(b)?;
        if k != k2 {
            return Err(NumericsError::ShapeMismatch {
                op: "matmul",
                left: vec![m, k],
                right: vec![k2, n],
            });
        }
        let out = matmul_raw(self.value(a).data(), self.value(b).data(), m, k, n);
        self.macs += (m * k * n) as u64;
        let rg = self.needs(&[a, b]);
        Ok(self.push(Tensor::from_parts(vec![m, n], out), Op::MatMul(a, b), rg))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var, NumericsError> {
        let (m, n) = self.matrix_dims(a)?;
        let out = transpose_raw(self.value(a).data(), m, n);
        let rg = self.needs(&[a]);
        Ok(self.push(Tensor::from_parts(vec![n, m], out), Op::Transpose(a), rg))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let t = self.value(a);
        let out = t.data().iter().map(|x| x * factor).collect();
        let shape = t.shape().to_vec();
        let rg = self.needs(&[a]);
        self.push(Tensor::from_parts(shape, out), Op::Scale(a, factor), rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(NumericsError::ShapeMismatch {
                op: "add",
                left: ta.shape().to_vec(),
                right: tb.shape().to_vec(),
            });
        }
        let out = ta.data().iter().zip(tb.data()).map(|(x, y)| x + y).collect();
        let shape = ta.shape().to_vec();
        let rg = self.needs(&[a, b]);
        Ok(self.push(Tensor::from_parts(shape, out), Op::Add(a, b), rg))
    }

    /// Row-wise softmax restricted to allowed positions. Masked entries are
    /// exactly zero; the row max is taken over allowed entries only.
    pub fn masked_softmax(&mut self, scores: Var, mask: &Mask) -> Result<Var, NumericsError> {
        let (m, n) = self.matrix_dims(scores)?;
        if mask.rows() != m || mask.cols() != n {
            return Err(NumericsError::ShapeMismatch {
                op: "masked_softmax",
                left: vec![m, n],
                right: vec![mask.rows(), mask.cols()],
            });
        }
        let out = masked_softmax_raw(self.value(scores).data(), m, n, |i, j| mask.get(i, j))?;
        let rg = self.needs(&[scores]);
        Ok(self.push(Tensor::from_parts(vec![m, n], out), Op::MaskedSoftmax(scores), rg))
    }

    /// Unmasked row-wise softmax.
    pub fn softmax(&mut self, scores: Var) -> Result<Var, NumericsError> {
        let (m, n) = self.matrix_dims(scores)?;
        let out = masked_softmax_raw(self.value(scores).data(), m, n, |_, _| true)?;
        let rg = self.needs(&[scores]);
        Ok(self.push(Tensor::from_parts(vec![m, n], out), Op::MaskedSoftmax(scores), rg))
    }

    /// Average pooling along the row axis. Output has `ceil(L / stride)` rows;
    /// window `i` covers rows `[i*stride, min(i*stride + kernel, L))`.
    pub fn avg_pool_rows(&mut self, x: Var, kernel: usize, stride: usize) -> Result<Var, NumericsError> {
        if kernel == 0 || stride == 0 {
            return Err(NumericsError::InvalidPooling { kernel, stride });
        }
        let (l, h) = self.matrix_dims(x)?;
        let out_rows = pooled_len(l, stride);
        let src = self.value(x).data();
        let mut out = vec![0.0; out_rows * h];
        for (w, dst) in out.chunks_mut(h).enumerate() {
            let (lo, hi) = pool_window(w, l, kernel, stride);
            dst.copy_from_slice(&src[lo * h..(lo + 1) * h]);
            for r in lo + 1..hi {
                for (d, s) in dst.iter_mut().zip(&src[r * h..(r + 1) * h]) {
                    *d += s;
                }
            }
            let count = (hi - lo) as f64;
            if hi - lo > 1 {
                dst.iter_mut().for_each(|d| *d /= count);
            }
        }
        let rg = self.needs(&[x]);
        Ok(self.push(
            Tensor::from_parts(vec![out_rows, h], out),
            Op::AvgPoolRows {
                input: x,
                kernel,
                stride,
            },
            rg,
        ))
    }

    /// Gathers rows (duplicates allowed) into a new matrix.
    pub fn select_rows(&mut self, x: Var, rows: &[usize]) -> Result<Var, NumericsError> {
        let (l, h) = self.matrix_dims(x)?;
        if rows.is_empty() {
            return Err(NumericsError::InvalidShape(vec![0, h]));
        }
        if let Some(&bad) = rows.iter().find(|&&r| r >= l) {
            return Err(NumericsError::RowOutOfRange { row: bad, rows: l });
        }
        let src = self.value(x).data();
        let mut out = Vec::with_capacity(rows.len() * h);
        for &r in rows {
            out.extend_from_slice(&src[r * h..(r + 1) * h]);
        }
        let rg = self.needs(&[x]);
        Ok(self.push(
            Tensor::from_parts(vec![rows.len(), h], out),
            Op::SelectRows {
                input: x,
                rows: rows.to_vec(),
            },
            rg,
        ))
    }

    /// Assembles an `n_rows × h` matrix by writing row `k` of each part to
    /// `dest[k]`. Every output row must be written exactly once.
    pub fn scatter_rows(&mut self, n_rows: usize, parts: Vec<(Var, Vec<usize>)>) -> Result<Var, NumericsError> {
        let h = match parts.first() {
            Some(&(v, _)) => self.matrix_dims(v)?.1,
            None => return Err(NumericsError::InvalidShape(vec![n_rows, 0])),
        };
        let mut out = vec![0.0; n_rows * h];
        let mut written = vec![false; n_rows];
        for (v, dest) in &parts {
            let (r, c) = self.matrix_dims(*v)?;
            if c != h || r != dest.len() {
                return Err(NumericsError::ShapeMismatch {
                    op: "scatter_rows",
                    left: vec![dest.len(), h],
                    right: vec![r, c],
                });
            }
            let src = self.value(*v).data();
            for (k, &d) in dest.iter().enumerate() {
                if d >= n_rows {
                    return Err(NumericsError::RowOutOfRange { row: d, rows: n_rows });
                }
                if written[d] {
                    return Err(NumericsError::RowCoverage { row: d });
                }
                written[d] = true;
                out[d * h..(d + 1) * h].copy_from_slice(&src[k * h..(k + 1) * h]);
            }
        }
        if let Some(row) = written.iter().position(|w| !w) {
            return Err(NumericsError::RowCoverage { row });
        }
        let inputs: Vec<Var> = parts.iter().map(|(v, _)| *v).collect();
        let rg = self.needs(&inputs);
        Ok(self.push(Tensor::from_parts(vec![n_rows, h], out), Op::ScatterRows { parts }, rg))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().sum();
        let rg = self.needs(&[x]);
        self.push(Tensor::scalar(s), Op::Sum(x), rg)
    }

    /// `Σ weights ∘ x` with constant weights.
    pub fn weighted_sum(&mut self, x: Var, weights: &[f64]) -> Result<Var, NumericsError> {
        let t = self.value(x);
        if t.len() != weights.len() {
            return Err(NumericsError::ShapeMismatch {
                op: "weighted_sum",
                left: t.shape().to_vec(),
                right: vec![weights.len()],
            });
        }
        let s = t.data().iter().zip(weights).map(|(a, w)| a * w).sum();
        let rg = self.needs(&[x]);
        Ok(self.push(Tensor::scalar(s), Op::WeightedSum(x, weights.to_vec()), rg))
    }

    /// Gradient of `sum(out)` with respect to every node that requires one.
    pub fn backward(&self, out: Var) -> Gradients {
        let seed = vec![1.0; self.value(out).len()];
        self.backward_with(out, seed)
    }

    /// Backward pass seeded with an explicit upstream gradient for `out`.
    pub fn backward_with(&self, out: Var, seed: Vec<f64>) -> Gradients {
        assert_eq!(seed.len(), self.value(out).len(), "seed gradient shape");
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; out.0 + 1];
        grads[out.0] = Some(seed);
        for idx in (0..=out.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else {
                continue;
            };
            self.propagate(node, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Gradients { grads }
    }

    fn accumulate(&self, grads: &mut [Option<Vec<f64>>], v: Var, delta: Vec<f64>) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        match &mut grads[v.0] {
            Some(acc) => acc.iter_mut().zip(delta).for_each(|(a, d)| *a += d),
            slot @ None => *slot = Some(delta),
        }
    }

    fn propagate(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (m, k) = (self.value(*a).rows(), self.value(*a).cols());
                let n = self.value(*b).cols();
                if self.nodes[a.0].requires_grad {
                    // dA = dOut · Bᵀ
                    let bt = transpose_raw(self.value(*b).data(), k, n);
                    self.accumulate(grads, *a, matmul_raw(g, &bt, m, n, k));
                }
                if self.nodes[b.0].requires_grad {
                    // dB = Aᵀ · dOut
                    let at = transpose_raw(self.value(*a).data(), m, k);
                    self.accumulate(grads, *b, matmul_raw(&at, g, k, m, n));
                }
            }
            Op::Transpose(a) => {
                let (m, n) = (self.value(*a).rows(), self.value(*a).cols());
                self.accumulate(grads, *a, transpose_raw(g, n, m));
            }
            Op::Scale(a, f) => {
                self.accumulate(grads, *a, g.iter().map(|x| x * f).collect());
            }
            Op::Add(a, b) => {
                self.accumulate(grads, *a, g.to_vec());
                self.accumulate(grads, *b, g.to_vec());
            }
            Op::MaskedSoftmax(s) => {
                let p = node.value.data();
                let n = node.value.cols();
                let mut ds = vec![0.0; p.len()];
                for ((pr, gr), dr) in p.chunks(n).zip(g.chunks(n)).zip(ds.chunks_mut(n)) {
                    let dot: f64 = pr.iter().zip(gr).map(|(p, g)| p * g).sum();
                    for ((d, p), g) in dr.iter_mut().zip(pr).zip(gr) {
                        *d = p * (g - dot);
                    }
                }
                self.accumulate(grads, *s, ds);
            }
            Op::AvgPoolRows { input, kernel, stride } => {
                let (l, h) = (self.value(*input).rows(), self.value(*input).cols());
                let mut dx = vec![0.0; l * h];
                for (w, gw) in g.chunks(h).enumerate() {
                    let (lo, hi) = pool_window(w, l, *kernel, *stride);
                    let inv = 1.0 / (hi - lo) as f64;
                    for r in lo..hi {
                        for (d, gv) in dx[r * h..(r + 1) * h].iter_mut().zip(gw) {
                            *d += gv * inv;
                        }
                    }
                }
                self.accumulate(grads, *input, dx);
            }
            Op::SelectRows { input, rows } => {
                let t = self.value(*input);
                let h = t.cols();
                let mut dx = vec![0.0; t.len()];
                for (k, &r) in rows.iter().enumerate() {
                    for (d, gv) in dx[r * h..(r + 1) * h].iter_mut().zip(&g[k * h..(k + 1) * h]) {
                        *d += gv;
                    }
                }
                self.accumulate(grads, *input, dx);
            }
            Op::ScatterRows { parts } => {
                let h = node.value.cols();
                for (v, dest) in parts {
                    let mut dp = Vec::with_capacity(dest.len() * h);
                    for &d in dest {
                        dp.extend_from_slice(&g[d * h..(d + 1) * h]);
                    }
                    self.accumulate(grads, *v, dp);
                }
            }
            Op::Sum(x) => {
                let n = self.value(*x).len();
                self.accumulate(grads, *x, vec![g[0]; n]);
            }
            Op::WeightedSum(x, w) => {
                self.accumulate(grads, *x, w.iter().map(|wi| wi * g[0]).collect());
            }
        }
    }
}

/// Number of pooled rows for sequence length `l`.
pub fn pooled_len(l: usize, stride: usize) -> usize {
    l.div_ceil(stride)
}

fn pool_window(w: usize, l: usize, kernel: usize, stride: usize) -> (usize, usize) {
    let lo = w * stride;
    (lo, (lo + kernel).min(l))
}

fn matmul_raw(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            for (o, bv) in row.iter_mut().zip(&b[p * n..(p + 1) * n]) {
                *o += av * bv;
            }
        }
    }
    out
}

fn transpose_raw(a: &[f64], m: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            out[j * m + i] = a[i * n + j];
        }
    }
    out
}

fn masked_softmax_raw(
    s: &[f64],
    m: usize,
    n: usize,
    allowed: impl Fn(usize, usize) -> bool,
) -> Result<Vec<f64>, NumericsError> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let row = &s[i * n..(i + 1) * n];
        let max = (0..n)
            .filter(|&j| allowed(i, j))
            .map(|j| row[j])
            .fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Err(NumericsError::FullyMaskedRow { row: i });
        }
        let dst = &mut out[i * n..(i + 1) * n];
        let mut total = 0.0;
        for j in 0..n {
            if allowed(i, j) {
                let e = (row[j] - max).exp();
                dst[j] = e;
                total += e;
            }
        }
        dst.iter_mut().for_each(|d| *d /= total);
    }
    Ok(out)
}
