use std::borrow::Cow;

use super::kernels::{axpy, dot, ConvGeom};
use super::{shape_err, NnError, ParamId, ParamStore, Tensor};

/// Handle to a node of a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Param(ParamId),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Relu(Var),
    Exp(Var),
    Log(Var),
    Square(Var),
    Clamp(Var, f64, f64),
    Minimum(Var, Var),
    Sum(Var),
    Mean(Var),
    SumRows(Var),
    Reshape(Var),
    MatMul(Var, Var),
    Transpose(Var),
    Linear(Var, Var, Var),
    Conv2d { x: Var, w: Var, b: Var, geom: ConvGeom },
    ConcatCols(Vec<Var>),
    LogSoftmax(Var),
    Softmax(Var),
    Gather(Var, Vec<usize>),
    RowL2Norm(Var),
}

struct Node<'s> {
    value: Cow<'s, Tensor>,
    op: Op,
    requires_grad: bool,
}

/// Records a forward computation against a borrowed parameter store.
pub struct Graph<'s> {
    store: &'s ParamStore,
    nodes: Vec<Node<'s>>,
}

/// Parameter gradients produced by [`Graph::backward`].
#[derive(Debug, Clone, Default)]
pub struct Gradients {
    grads: Vec<(ParamId, Tensor)>,
}

impl Gradients {
    pub fn get(&self, id: ParamId) -> Option<&Tensor> {
        self.grads.iter().find(|(p, _)| *p == id).map(|(_, t)| t)
    }

    pub fn params(&self) -> impl Iterator<Item = (ParamId, &Tensor)> {
        self.grads.iter().map(|(p, t)| (*p, t))
    }
}

fn rows_cols(shape: &[usize]) -> Option<(usize, usize)> {
    match shape {
        [r, c] => Some((*r, *c)),
        _ => None,
    }
}

impl<'s> Graph<'s> {
    pub fn new(store: &'s ParamStore) -> Self {
        Self { store, nodes: Vec::new() }
    }

    pub fn store(&self) -> &'s ParamStore {
        self.store
    }

    fn push(&mut self, value: Tensor, op: Op, parents: &[Var]) -> Var {
        let requires_grad = parents.iter().any(|p| self.nodes[p.0].requires_grad);
        self.nodes.push(Node { value: Cow::Owned(value), op, requires_grad });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        self.nodes.push(Node {
            value: Cow::Borrowed(self.store.get(id)),
            op: Op::Param(id),
            requires_grad: self.store.is_trainable(id),
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, t: Tensor) -> Var {
        self.nodes.push(Node { value: Cow::Owned(t), op: Op::Leaf, requires_grad: false });
        Var(self.nodes.len() - 1)
    }

    /// A constant copy of `v`'s value; gradients stop here.
    pub fn detach(&mut self, v: Var) -> Var {
        let t = self.value(v).clone();
        self.constant(t)
    }

    fn zip(&self, op: &'static str, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Result<Tensor, NnError> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape() != y.shape() {
            return Err(shape_err(op, x.shape(), y.shape()));
        }
        let data = x.data().iter().zip(y.data()).map(|(p, q)| f(*p, *q)).collect();
        Ok(Tensor::new(x.shape(), data).expect("same shape"))
    }

    fn map(&self, a: Var, f: impl Fn(f64) -> f64) -> Tensor {
        let x = self.value(a);
        Tensor::new(x.shape(), x.data().iter().map(|v| f(*v)).collect()).expect("same shape")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let t = self.zip("add", a, b, |x, y| x + y)?;
        Ok(self.push(t, Op::Add(a, b), &[a, b]))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let t = self.zip("sub", a, b, |x, y| x - y)?;
        Ok(self.push(t, Op::Sub(a, b), &[a, b]))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let t = self.zip("mul", a, b, |x, y| x * y)?;
        Ok(self.push(t, Op::Mul(a, b), &[a, b]))
    }

    pub fn minimum(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let t = self.zip("minimum", a, b, f64::min)?;
        Ok(self.push(t, Op::Minimum(a, b), &[a, b]))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let t = self.map(a, |x| x * c);
        self.push(t, Op::Scale(a, c), &[a])
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        let t = self.map(a, |x| x + c);
        self.push(t, Op::AddScalar(a), &[a])
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let t = self.map(a, |x| x.max(0.0));
        self.push(t, Op::Relu(a), &[a])
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let t = self.map(a, f64::exp);
        self.push(t, Op::Exp(a), &[a])
    }

    pub fn log(&mut self, a: Var) -> Var {
        let t = self.map(a, f64::ln);
        self.push(t, Op::Log(a), &[a])
    }

    pub fn square(&mut self, a: Var) -> Var {
        let t = self.map(a, |x| x * x);
        self.push(t, Op::Square(a), &[a])
    }

    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        let t = self.map(a, |x| x.clamp(lo, hi));
        self.push(t, Op::Clamp(a, lo, hi), &[a])
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(a), &[a])
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let m = x.data().iter().sum::<f64>() / x.len().max(1) as f64;
        self.push(Tensor::scalar(m), Op::Mean(a), &[a])
    }

    /// `[r, c] -> [r]`
    pub fn sum_rows(&mut self, a: Var) -> Result<Var, NnError> {
        let x = self.value(a);
        let (r, c) = rows_cols(x.shape()).ok_or_else(|| shape_err("sum_rows", x.shape(), &[0, 0]))?;
        let data = (0..r).map(|i| x.data()[i * c..(i + 1) * c].iter().sum()).collect();
        let t = Tensor::new(&[r], data).expect("shape");
        Ok(self.push(t, Op::SumRows(a), &[a]))
    }

    /// `[r, c] -> [r]` Euclidean norm of each row.
    pub fn row_l2_norm(&mut self, a: Var) -> Result<Var, NnError> {
        let x = self.value(a);
        let (r, _) = rows_cols(x.shape()).ok_or_else(|| shape_err("row_l2_norm", x.shape(), &[0, 0]))?;
        let data = (0..r).map(|i| dot(x.row(i), x.row(i)).sqrt()).collect();
        let t = Tensor::new(&[r], data).expect("shape");
        Ok(self.push(t, Op::RowL2Norm(a), &[a]))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var, NnError> {
        let t = self.value(a).clone().reshape(shape)?;
        Ok(self.push(t, Op::Reshape(a), &[a]))
    }

    /// `[m, k] x [k, n] -> [m, n]`
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let (x, y) = (self.value(a), self.value(b));
        let (Some((m, k)), Some((k2, n))) = (rows_cols(x.shape()), rows_cols(y.shape())) else {
            return Err(shape_err("matmul", x.shape(), y.shape()));
        };
        if k != k2 {
            return Err(shape_err("matmul", x.shape(), y.shape()));
        }
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let row = &mut out[i * n..(i + 1) * n];
            for kk in 0..k {
                axpy(x.data()[i * k + kk], y.row(kk), row);
            }
        }
        let t = Tensor::new(&[m, n], out).expect("shape");
        Ok(self.push(t, Op::MatMul(a, b), &[a, b]))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var, NnError> {
        let x = self.value(a);
        let (r, c) = rows_cols(x.shape()).ok_or_else(|| shape_err("transpose", x.shape(), &[0, 0]))?;
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = x.data()[i * c + j];
            }
        }
        let t = Tensor::new(&[c, r], out).expect("shape");
        Ok(self.push(t, Op::Transpose(a), &[a]))
    }

    /// `x [n, in]`, `w [out, in]`, `b [out]` -> `x wᵀ + b`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var, NnError> {
        let (xv, wv, bv) = (self.value(x), self.value(w), self.value(b));
        let (Some((n, din)), Some((dout, din2))) = (rows_cols(xv.shape()), rows_cols(wv.shape())) else {
            return Err(shape_err("linear", xv.shape(), wv.shape()));
        };
        if din != din2 {
            return Err(shape_err("linear", xv.shape(), wv.shape()));
        }
        if bv.shape() != [dout] {
            return Err(shape_err("linear bias", wv.shape(), bv.shape()));
        }
        let mut out = vec![0.0; n * dout];
        for i in 0..n {
            let xi = xv.row(i);
            for o in 0..dout {
                out[i * dout + o] = dot(xi, wv.row(o)) + bv.data()[o];
            }
        }
        let t = Tensor::new(&[n, dout], out).expect("shape");
        Ok(self.push(t, Op::Linear(x, w, b), &[x, w, b]))
    }

    /// Valid convolution: `x [n, c, h, w]`, `w [o, c, k, k]`, `b [o]` -> `[n, o, oh, ow]`.
    pub fn conv2d(&mut self, x: Var, w: Var, b: Var, stride: usize) -> Result<Var, NnError> {
        let (xv, wv, bv) = (self.value(x), self.value(w), self.value(b));
        let (&[n, c, h, wd], &[o, c2, k, k2]) = (xv.shape(), wv.shape()) else {
            return Err(shape_err("conv2d", xv.shape(), wv.shape()));
        };
        if c != c2 || k != k2 {
            return Err(shape_err("conv2d", xv.shape(), wv.shape()));
        }
        if bv.shape() != [o] {
            return Err(shape_err("conv2d bias", wv.shape(), bv.shape()));
        }
        let geom = ConvGeom::new(c, h, wd, k, stride).ok_or_else(|| shape_err("conv2d", xv.shape(), wv.shape()))?;
        let (p, pl) = (geom.positions(), geom.patch_len());
        let img_len = c * h * wd;
        let mut cols = vec![0.0; p * pl];
        let mut out = vec![0.0; n * o * p];
        for img in 0..n {
            geom.im2col(&xv.data()[img * img_len..(img + 1) * img_len], &mut cols);
            let dst = &mut out[img * o * p..(img + 1) * o * p];
            for oc in 0..o {
                let wrow = wv.row(oc);
                let bias = bv.data()[oc];
                for pos in 0..p {
                    dst[oc * p + pos] = dot(&cols[pos * pl..(pos + 1) * pl], wrow) + bias;
                }
            }
        }
        let t = Tensor::new(&[n, o, geom.oh, geom.ow], out).expect("shape");
        Ok(self.push(t, Op::Conv2d { x, w, b, geom }, &[x, w, b]))
    }

    /// Concatenates `[n, c_i]` tensors along columns.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, NnError> {
        let first = *parts.first().ok_or_else(|| shape_err("concat", &[], &[]))?;
        let n = self.shape(first).first().copied().unwrap_or(0);
        let mut total = 0;
        for &p in parts {
            match rows_cols(self.shape(p)) {
                Some((r, c)) if r == n => total += c,
                _ => return Err(shape_err("concat", self.shape(first), self.shape(p))),
            }
        }
        let mut out = Vec::with_capacity(n * total);
        for i in 0..n {
            for &p in parts {
                out.extend_from_slice(self.value(p).row(i));
            }
        }
        let t = Tensor::new(&[n, total], out).expect("shape");
        Ok(self.push(t, Op::ConcatCols(parts.to_vec()), parts))
    }

    fn row_softmax(&self, a: Var, op: &'static str, log: bool) -> Result<Tensor, NnError> {
        let x = self.value(a);
        let c = match x.shape() {
            [c] | [_, c] if *c > 0 => *c,
            s => return Err(shape_err(op, s, &[0, 0])),
        };
        let mut out = x.data().to_vec();
        for row in out.chunks_exact_mut(c) {
            let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            for v in row.iter_mut() {
                *v = if log { *v - lse } else { (*v - lse).exp() };
            }
        }
        Ok(Tensor::new(x.shape(), out).expect("shape"))
    }

    /// Softmax over the last axis of a `[c]` or `[r, c]` tensor, in log space.
    pub fn log_softmax(&mut self, a: Var) -> Result<Var, NnError> {
        let t = self.row_softmax(a, "log_softmax", true)?;
        Ok(self.push(t, Op::LogSoftmax(a), &[a]))
    }

    pub fn softmax(&mut self, a: Var) -> Result<Var, NnError> {
        let t = self.row_softmax(a, "softmax", false)?;
        Ok(self.push(t, Op::Softmax(a), &[a]))
    }

    /// Picks `a[i, idx[i]]` for each row: `[r, c] -> [r]`.
    pub fn gather(&mut self, a: Var, idx: &[usize]) -> Result<Var, NnError> {
        let x = self.value(a);
        let (r, c) = rows_cols(x.shape()).ok_or_else(|| shape_err("gather", x.shape(), &[idx.len()]))?;
        if r != idx.len() {
            return Err(shape_err("gather", x.shape(), &[idx.len()]));
        }
        if let Some(&bad) = idx.iter().find(|&&i| i >= c) {
            return Err(NnError::Index { index: bad, len: c });
        }
        let data = idx.iter().enumerate().map(|(i, &j)| x.data()[i * c + j]).collect();
        let t = Tensor::new(&[r], data).expect("shape");
        Ok(self.push(t, Op::Gather(a, idx.to_vec()), &[a]))
    }

    /// Mean squared error between two same-shape tensors.
    pub fn mse(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let d = self.sub(a, b)?;
        let sq = self.square(d);
        Ok(self.mean(sq))
    }

    /// Reverse pass from a scalar `loss`; consumes the graph.
    pub fn backward(self, loss: Var) -> Result<Gradients, NnError> {
        let lshape = self.shape(loss);
        if lshape.iter().product::<usize>() != 1 {
            return Err(NnError::NonScalarLoss(lshape.to_vec()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);
        let mut out = Vec::new();
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            self.propagate(node, &g, &mut grads);
            if let Op::Param(id) = node.op {
                out.push((id, Tensor::new(node.value.shape(), g).expect("grad shape")));
            }
        }
        out.sort_by_key(|(id, _)| *id);
        // The same parameter may appear as several nodes.
        let mut merged: Vec<(ParamId, Tensor)> = Vec::with_capacity(out.len());
        for (id, t) in out {
            match merged.last_mut() {
                Some((last, acc)) if *last == id => axpy(1.0, t.data(), acc.data_mut()),
                _ => merged.push((id, t)),
            }
        }
        Ok(Gradients { grads: merged })
    }

    fn propagate(&self, node: &Node<'_>, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let val = |v: Var| self.nodes[v.0].value.data();
        let needs = |v: Var| self.nodes[v.0].requires_grad;
        let mut acc = |v: Var, f: &mut dyn FnMut(&mut [f64])| {
            if !needs(v) {
                return;
            }
            let slot = grads[v.0].get_or_insert_with(|| vec![0.0; self.nodes[v.0].value.len()]);
            f(slot);
        };
        let y = node.value.data();
        match &node.op {
            Op::Leaf | Op::Param(_) => {}
            Op::Add(a, b) => {
                acc(*a, &mut |s| axpy(1.0, g, s));
                acc(*b, &mut |s| axpy(1.0, g, s));
            }
            Op::Sub(a, b) => {
                acc(*a, &mut |s| axpy(1.0, g, s));
                acc(*b, &mut |s| axpy(-1.0, g, s));
            }
            Op::Mul(a, b) => {
                let (av, bv) = (val(*a), val(*b));
                acc(*a, &mut |s| s.iter_mut().zip(g).zip(bv).for_each(|((s, g), b)| *s += g * b));
                acc(*b, &mut |s| s.iter_mut().zip(g).zip(av).for_each(|((s, g), a)| *s += g * a));
            }
            Op::Minimum(a, b) => {
                let (av, bv) = (val(*a), val(*b));
                acc(*a, &mut |s| {
                    for k in 0..s.len() {
                        if av[k] <= bv[k] {
                            s[k] += g[k];
                        }
                    }
                });
                acc(*b, &mut |s| {
                    for k in 0..s.len() {
                        if av[k] > bv[k] {
                            s[k] += g[k];
                        }
                    }
                });
            }
            Op::Scale(a, c) => acc(*a, &mut |s| axpy(*c, g, s)),
            Op::AddScalar(a) | Op::Reshape(a) => acc(*a, &mut |s| axpy(1.0, g, s)),
            Op::Relu(a) => {
                let av = val(*a);
                acc(*a, &mut |s| {
                    for k in 0..s.len() {
                        if av[k] > 0.0 {
                            s[k] += g[k];
                        }
                    }
                });
            }
            Op::Exp(a) => acc(*a, &mut |s| s.iter_mut().zip(g).zip(y).for_each(|((s, g), y)| *s += g * y)),
            Op::Log(a) => {
                let av = val(*a);
                acc(*a, &mut |s| s.iter_mut().zip(g).zip(av).for_each(|((s, g), x)| *s += g / x));
            }
            Op::Square(a) => {
                let av = val(*a);
                acc(*a, &mut |s| s.iter_mut().zip(g).zip(av).for_each(|((s, g), x)| *s += 2.0 * g * x));
            }
            Op::Clamp(a, lo, hi) => {
                let av = val(*a);
                acc(*a, &mut |s| {
                    for k in 0..s.len() {
                        if av[k] > *lo && av[k] < *hi {
                            s[k] += g[k];
                        }
                    }
                });
            }
            Op::Sum(a) => acc(*a, &mut |s| s.iter_mut().for_each(|s| *s += g[0])),
            Op::Mean(a) => {
                let n = self.nodes[a.0].value.len().max(1) as f64;
                acc(*a, &mut |s| s.iter_mut().for_each(|s| *s += g[0] / n));
            }
            Op::SumRows(a) => {
                let c = self.nodes[a.0].value.shape()[1];
                acc(*a, &mut |s| {
                    if c > 0 {
                        for (row, gi) in s.chunks_exact_mut(c).zip(g) {
                            row.iter_mut().for_each(|v| *v += gi);
                        }
                    }
                });
            }
            Op::RowL2Norm(a) => {
                let x = &self.nodes[a.0].value;
                let c = x.shape()[1];
                acc(*a, &mut |s| {
                    for i in 0..g.len() {
                        if y[i] > 0.0 {
                            axpy(g[i] / y[i], x.row(i), &mut s[i * c..(i + 1) * c]);
                        }
                    }
                });
            }
            Op::MatMul(a, b) => {
                let (x, w) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                let (m, k) = (x.shape()[0], x.shape()[1]);
                let n = w.shape()[1];
                acc(*a, &mut |s| {
                    for i in 0..m {
                        for kk in 0..k {
                            s[i * k + kk] += dot(&g[i * n..(i + 1) * n], w.row(kk));
                        }
                    }
                });
                acc(*b, &mut |s| {
                    for i in 0..m {
                        for kk in 0..k {
                            axpy(x.data()[i * k + kk], &g[i * n..(i + 1) * n], &mut s[kk * n..(kk + 1) * n]);
                        }
                    }
                });
            }
            Op::Transpose(a) => {
                let (r, c) = (self.nodes[a.0].value.shape()[0], self.nodes[a.0].value.shape()[1]);
                acc(*a, &mut |s| {
                    for i in 0..r {
                        for j in 0..c {
                            s[i * c + j] += g[j * r + i];
                        }
                    }
                });
            }
            Op::Linear(x, w, b) => {
                let (xv, wv) = (&self.nodes[x.0].value, &self.nodes[w.0].value);
                let (n, din) = (xv.shape()[0], xv.shape()[1]);
                let dout = wv.shape()[0];
                acc(*x, &mut |s| {
                    for i in 0..n {
                        let dst = &mut s[i * din..(i + 1) * din];
                        for o in 0..dout {
                            axpy(g[i * dout + o], wv.row(o), dst);
                        }
                    }
                });
                acc(*w, &mut |s| {
                    for i in 0..n {
                        let xi = xv.row(i);
                        for o in 0..dout {
                            axpy(g[i * dout + o], xi, &mut s[o * din..(o + 1) * din]);
                        }
                    }
                });
                acc(*b, &mut |s| {
                    for row in g.chunks_exact(dout) {
                        axpy(1.0, row, s);
                    }
                });
            }
            Op::Conv2d { x, w, b, geom } => {
                let (xv, wv) = (&self.nodes[x.0].value, &self.nodes[w.0].value);
                let n = xv.shape()[0];
                let o = wv.shape()[0];
                let (p, pl) = (geom.positions(), geom.patch_len());
                let img_len = geom.c * geom.h * geom.w;
                let (need_x, need_w) = (needs(*x), needs(*w));
                let mut cols = vec![0.0; p * pl];
                let mut dcols = vec![0.0; p * pl];
                let mut dw = vec![0.0; if need_w { wv.len() } else { 0 }];
                let mut dx = vec![0.0; if need_x { xv.len() } else { 0 }];
                for img in 0..n {
                    let gi = &g[img * o * p..(img + 1) * o * p];
                    if need_w {
                        geom.im2col(&xv.data()[img * img_len..(img + 1) * img_len], &mut cols);
                        for oc in 0..o {
                            let dst = &mut dw[oc * pl..(oc + 1) * pl];
                            for pos in 0..p {
                                axpy(gi[oc * p + pos], &cols[pos * pl..(pos + 1) * pl], dst);
                            }
                        }
                    }
                    if need_x {
                        dcols.iter_mut().for_each(|v| *v = 0.0);
                        for oc in 0..o {
                            let wrow = wv.row(oc);
                            for pos in 0..p {
                                axpy(gi[oc * p + pos], wrow, &mut dcols[pos * pl..(pos + 1) * pl]);
                            }
                        }
                        geom.col2im(&dcols, &mut dx[img * img_len..(img + 1) * img_len]);
                    }
                }
                acc(*x, &mut |s| axpy(1.0, &dx, s));
                acc(*w, &mut |s| axpy(1.0, &dw, s));
                acc(*b, &mut |s| {
                    for img in 0..n {
                        for oc in 0..o {
                            s[oc] += g[(img * o + oc) * p..(img * o + oc + 1) * p].iter().sum::<f64>();
                        }
                    }
                });
            }
            Op::ConcatCols(parts) => {
                let total = node.value.shape()[1];
                let mut off = 0;
                for &pv in parts {
                    let c = self.nodes[pv.0].value.shape()[1];
                    if c > 0 {
                        acc(pv, &mut |s| {
                            for (i, row) in s.chunks_exact_mut(c).enumerate() {
                                axpy(1.0, &g[i * total + off..i * total + off + c], row);
                            }
                        });
                    }
                    off += c;
                }
            }
            Op::LogSoftmax(a) => {
                let c = *node.value.shape().last().unwrap_or(&1);
                acc(*a, &mut |s| {
                    for ((srow, grow), yrow) in s.chunks_exact_mut(c).zip(g.chunks_exact(c)).zip(y.chunks_exact(c)) {
                        let gs: f64 = grow.iter().sum();
                        for k in 0..c {
                            srow[k] += grow[k] - yrow[k].exp() * gs;
                        }
                    }
                });
            }
            Op::Softmax(a) => {
                let c = *node.value.shape().last().unwrap_or(&1);
                acc(*a, &mut |s| {
                    for ((srow, grow), yrow) in s.chunks_exact_mut(c).zip(g.chunks_exact(c)).zip(y.chunks_exact(c)) {
                        let gy = dot(grow, yrow);
                        for k in 0..c {
                            srow[k] += yrow[k] * (grow[k] - gy);
                        }
                    }
                });
            }
            Op::Gather(a, idx) => {
                let c = self.nodes[a.0].value.shape()[1];
                acc(*a, &mut |s| {
                    for (i, &j) in idx.iter().enumerate() {
                        s[i * c + j] += g[i];
                    }
                });
            }
        }
    }
}
