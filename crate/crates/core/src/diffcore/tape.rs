//! Operation tape for reverse-mode gradients.
//!
//! Every forward operation appends a node holding its value and the ids of
//! its inputs. [`Tape::backward`] walks the nodes in reverse order and
//! accumulates adjoints into the inputs, collecting the ones that reach
//! parameter leaves into a [`Gradients`] table. A tape lives for a single
//! forward/backward pass; nothing is retained between batches.

use std::f64::consts::PI;

use super::tensor::{Gradients, ParamId, ParamSet, Tensor};
use crate::error::{dim_err, Error, Result};

/// Norms at or below this value get a zero gradient.
pub const NORM_EPS: f64 = 1e-12;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Constant,
    Param(ParamId),
    Affine { x: Var, w: Var, b: Var },
    AffineRows { x: Var, w: Var, b: Var },
    Relu(Var),
    Concat(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Scale { v: Var, s: Var },
    ScaleConst { v: Var, c: f64 },
    Mul(Var, Var),
    Div(Var, Var),
    Sum(Vec<Var>),
    L2Norm(Var),
    Exp(Var),
    Sqrt(Var),
    Abs(Var),
    RowMean(Var),
    RowSqDevMean { x: Var, mean: Var },
    SoftmaxXent { logits: Var, label: usize, probs: Vec<f64> },
    Gaussian { f: Var, mean: Vec<f64>, sigma: f64 },
    LogGaussian { f: Var, mean: Vec<f64>, sigma: f64 },
}

#[derive(Debug, Clone)]
enum Value {
    Owned(Tensor),
    Param(ParamId),
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    value: Value,
}

/// Recorded computation over a borrowed [`ParamSet`].
pub struct Tape<'p> {
    params: &'p ParamSet,
    nodes: Vec<Node>,
    param_nodes: Vec<Option<Var>>,
    detached: Vec<Tensor>,
    frozen: Option<Vec<Tensor>>,
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParamSet) -> Self {
        Self {
            params,
            nodes: Vec::new(),
            param_nodes: vec![None; params.len()],
            detached: Vec::new(),
            frozen: None,
        }
    }

    /// Tape whose `detach` calls return `frozen[i]` for the i-th call instead
    /// of the live value. Finite differences of a stop-gradient objective are
    /// taken this way, with the values recorded at the base point.
    pub fn with_frozen_detach(params: &'p ParamSet, frozen: Vec<Tensor>) -> Self {
        let mut tape = Self::new(params);
        tape.frozen = Some(frozen);
        tape
    }

    /// Values produced by `detach`, in call order.
    pub fn detached_values(&self) -> &[Tensor] {
        &self.detached
    }

    pub fn params(&self) -> &'p ParamSet {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        match &self.nodes[v.0].value {
            Value::Owned(t) => t,
            Value::Param(id) => self.params.get(*id),
        }
    }

    pub fn data(&self, v: Var) -> &[f64] {
        self.value(v).data()
    }

    /// Value of a single-element node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.value(v).data()[0]
    }

    fn push(&mut self, op: Op, value: Tensor) -> Var {
        self.nodes.push(Node {
            op,
            value: Value::Owned(value),
        });
        Var(self.nodes.len() - 1)
    }

    fn push_scalar(&mut self, op: Op, value: f64) -> Var {
        self.push(op, Tensor::vector(vec![value]))
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(Op::Constant, value)
    }

    pub fn constant_vec(&mut self, data: Vec<f64>) -> Var {
        self.constant(Tensor::vector(data))
    }

    pub fn constant_scalar(&mut self, value: f64) -> Var {
        self.constant(Tensor::vector(vec![value]))
    }

    /// Copies the value of `v` into a fresh constant; no gradient flows back.
    pub fn detach(&mut self, v: Var) -> Var {
        let i = self.detached.len();
        let value = match self.frozen.as_ref().and_then(|f| f.get(i)) {
            Some(t) if t.shape() == self.value(v).shape() => t.clone(),
            _ => self.value(v).clone(),
        };
        self.detached.push(value.clone());
        self.constant(value)
    }

    /// Leaf for a parameter; repeated calls return the same node.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_nodes[id.0] {
            return v;
        }
        self.nodes.push(Node {
            op: Op::Param(id),
            value: Value::Param(id),
        });
        let v = Var(self.nodes.len() - 1);
        self.param_nodes[id.0] = Some(v);
        v
    }

    /// `weight · x + bias` for a vector `x`.
    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (xs, ws, bs) = (self.value(x), self.value(w), self.value(b));
        if xs.shape().len() != 1 || ws.shape().len() != 2 || ws.cols() != xs.len() {
            return Err(dim_err(ws.shape(), xs.shape()));
        }
        if bs.len() != ws.rows() {
            return Err(dim_err(ws.shape(), bs.shape()));
        }
        let n = ws.cols();
        let out: Vec<f64> = ws
            .data()
            .chunks_exact(n)
            .zip(bs.data())
            .map(|(row, bias)| dot(row, xs.data()) + bias)
            .collect();
        Ok(self.push(Op::Affine { x, w, b }, Tensor::vector(out)))
    }

    /// Row-wise affine map: each row `r` of `x` becomes `weight · r + bias`.
    pub fn affine_rows(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (xs, ws, bs) = (self.value(x), self.value(w), self.value(b));
        if xs.shape().len() != 2 || ws.shape().len() != 2 || ws.cols() != xs.cols() {
            return Err(dim_err(ws.shape(), xs.shape()));
        }
        if bs.len() != ws.rows() {
            return Err(dim_err(ws.shape(), bs.shape()));
        }
        let (r, n, m) = (xs.rows(), xs.cols(), ws.rows());
        let mut out = Vec::with_capacity(r * m);
        for xr in xs.data().chunks_exact(n) {
            for (wrow, bias) in ws.data().chunks_exact(n).zip(bs.data()) {
                out.push(dot(wrow, xr) + bias);
            }
        }
        let t = Tensor::new(vec![r, m], out)?;
        Ok(self.push(Op::AffineRows { x, w, b }, t))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let xs = self.value(x);
        let shape = xs.shape().to_vec();
        let data = xs.data().iter().map(|&v| v.max(0.0)).collect();
        self.push(Op::Relu(x), tensor(shape, data))
    }

    pub fn concat(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape().len() != 1 || bv.shape().len() != 1 {
            return Err(dim_err(av.shape(), bv.shape()));
        }
        let data = [av.data(), bv.data()].concat();
        Ok(self.push(Op::Concat(a, b), Tensor::vector(data)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let data = self.zip_values(a, b, |x, y| x + y)?;
        let shape = self.value(a).shape().to_vec();
        Ok(self.push(Op::Add(a, b), tensor(shape, data)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let data = self.zip_values(a, b, |x, y| x - y)?;
        let shape = self.value(a).shape().to_vec();
        Ok(self.push(Op::Sub(a, b), tensor(shape, data)))
    }

    /// Multiplies every element of `v` by the single-element node `s`.
    pub fn scale(&mut self, v: Var, s: Var) -> Result<Var> {
        self.expect_scalar(s)?;
        let k = self.scalar(s);
        let vv = self.value(v);
        let shape = vv.shape().to_vec();
        let data = vv.data().iter().map(|x| x * k).collect();
        Ok(self.push(Op::Scale { v, s }, tensor(shape, data)))
    }

    pub fn scale_const(&mut self, v: Var, c: f64) -> Var {
        let vv = self.value(v);
        let shape = vv.shape().to_vec();
        let data = vv.data().iter().map(|x| x * c).collect();
        self.push(Op::ScaleConst { v, c }, tensor(shape, data))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.expect_scalar(a)?;
        self.expect_scalar(b)?;
        let value = self.scalar(a) * self.scalar(b);
        Ok(self.push_scalar(Op::Mul(a, b), value))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.expect_scalar(a)?;
        self.expect_scalar(b)?;
        let value = self.scalar(a) / self.scalar(b);
        Ok(self.push_scalar(Op::Div(a, b), value))
    }

    /// Elementwise sum of equally shaped nodes, added in the given order.
    pub fn sum(&mut self, terms: &[Var]) -> Result<Var> {
        let first = *terms
            .first()
            .ok_or_else(|| Error::Constraint("sum of zero terms".into()))?;
        let shape = self.value(first).shape().to_vec();
        let mut acc = vec![0.0; self.value(first).len()];
        for &t in terms {
            let tv = self.value(t);
            if tv.shape() != shape.as_slice() {
                return Err(dim_err(&shape, tv.shape()));
            }
            acc.iter_mut().zip(tv.data()).for_each(|(a, b)| *a += b);
        }
        Ok(self.push(Op::Sum(terms.to_vec()), tensor(shape, acc)))
    }

    pub fn l2norm(&mut self, x: Var) -> Var {
        let n = norm(self.data(x));
        self.push_scalar(Op::L2Norm(x), n)
    }

    pub fn exp(&mut self, x: Var) -> Var {
        let xs = self.value(x);
        let shape = xs.shape().to_vec();
        let data = xs.data().iter().map(|v| v.exp()).collect();
        self.push(Op::Exp(x), tensor(shape, data))
    }

    /// Elementwise square root; gradient is zero where the result is ≤ [`NORM_EPS`].
    pub fn sqrt(&mut self, x: Var) -> Var {
        let xs = self.value(x);
        let shape = xs.shape().to_vec();
        let data = xs.data().iter().map(|v| v.max(0.0).sqrt()).collect();
        self.push(Op::Sqrt(x), tensor(shape, data))
    }

    pub fn abs(&mut self, x: Var) -> Var {
        let xs = self.value(x);
        let shape = xs.shape().to_vec();
        let data = xs.data().iter().map(|v| v.abs()).collect();
        self.push(Op::Abs(x), tensor(shape, data))
    }

    /// Column means of a matrix node.
    pub fn row_mean(&mut self, x: Var) -> Result<Var> {
        let xs = self.value(x);
        if xs.shape().len() != 2 {
            return Err(dim_err(xs.shape(), &[0, 0]));
        }
        let (r, c) = (xs.rows(), xs.cols());
        let mut acc = vec![0.0; c];
        for row in xs.data().chunks_exact(c) {
            acc.iter_mut().zip(row).for_each(|(a, b)| *a += b);
        }
        acc.iter_mut().for_each(|a| *a /= r as f64);
        Ok(self.push(Op::RowMean(x), Tensor::vector(acc)))
    }

    /// `(1/r) Σ_rows ‖row − mean‖²` for a matrix node and a vector node.
    pub fn row_sq_dev_mean(&mut self, x: Var, mean: Var) -> Result<Var> {
        let (xs, ms) = (self.value(x), self.value(mean));
        if xs.shape().len() != 2 || xs.cols() != ms.len() {
            return Err(dim_err(xs.shape(), ms.shape()));
        }
        let r = xs.rows();
        let total: f64 = xs
            .data()
            .chunks_exact(ms.len())
            .map(|row| sq_dist(row, ms.data()))
            .sum();
        Ok(self.push_scalar(Op::RowSqDevMean { x, mean }, total / r as f64))
    }

    /// Cross-entropy of `softmax(logits)` against `label`.
    ///
    /// Returns the scalar loss node and the probability vector.
    pub fn softmax_cross_entropy(&mut self, logits: Var, label: usize) -> Result<(Var, Vec<f64>)> {
        let lv = self.data(logits);
        if label >= lv.len() {
            return Err(Error::Index {
                index: label,
                len: lv.len(),
            });
        }
        let probs = softmax(lv);
        let loss = log_sum_exp(lv) - lv[label];
        let var = self.push_scalar(
            Op::SoftmaxXent {
                logits,
                label,
                probs: probs.clone(),
            },
            loss,
        );
        Ok((var, probs))
    }

    /// Isotropic Gaussian density of `f` with a constant mean and spread.
    ///
    /// `sigma` must already be floored by the caller; evaluation happens in
    /// log space.
    pub fn gaussian(&mut self, f: Var, mean: &[f64], sigma: f64) -> Result<Var> {
        let fv = self.data(f);
        if fv.len() != mean.len() {
            return Err(dim_err(&[fv.len()], &[mean.len()]));
        }
        let p = gaussian_density(sq_dist(fv, mean), sigma);
        Ok(self.push_scalar(
            Op::Gaussian {
                f,
                mean: mean.to_vec(),
                sigma,
            },
            p,
        ))
    }

    /// Logarithm of [`Tape::gaussian`]; finite wherever `f` is.
    pub fn log_gaussian(&mut self, f: Var, mean: &[f64], sigma: f64) -> Result<Var> {
        let fv = self.data(f);
        if fv.len() != mean.len() {
            return Err(dim_err(&[fv.len()], &[mean.len()]));
        }
        let lp = log_gaussian_density(sq_dist(fv, mean), sigma);
        Ok(self.push_scalar(
            Op::LogGaussian {
                f,
                mean: mean.to_vec(),
                sigma,
            },
            lp,
        ))
    }

    /// Smallest distance of any recorded input to a point where an operation
    /// is not differentiable (relu at 0, norms and roots at the origin, abs at 0).
    pub fn kink_margin(&self) -> f64 {
        let mut margin = f64::INFINITY;
        for node in &self.nodes {
            let m = match &node.op {
                Op::Relu(x) | Op::Abs(x) => {
                    self.data(*x).iter().fold(f64::INFINITY, |a, v| a.min(v.abs()))
                }
                Op::L2Norm(x) => norm(self.data(*x)),
                Op::Sqrt(x) => self.data(*x).iter().fold(f64::INFINITY, |a, v| a.min(v.abs())),
                _ => continue,
            };
            margin = margin.min(m);
        }
        margin
    }

    /// Reverse pass from a single-element root with seed 1.
    pub fn backward(&self, root: Var) -> Result<Gradients> {
        self.expect_scalar(root)?;
        Ok(self.backward_full(root, &[1.0])?.into_gradients())
    }

    /// Reverse pass from `root` with an explicit upstream seed.
    pub fn backward_full(&self, root: Var, seed: &[f64]) -> Result<Adjoints> {
        let rv = self.value(root);
        if rv.len() != seed.len() {
            return Err(dim_err(rv.shape(), &[seed.len()]));
        }
        let mut adj: Vec<Option<Vec<f64>>> = vec![None; root.0 + 1];
        adj[root.0] = Some(seed.to_vec());
        let mut grads = Gradients::empty(self.params.len());

        for i in (0..=root.0).rev() {
            let Some(g) = adj[i].take() else { continue };
            match &self.nodes[i].op {
                Op::Constant => {
                    adj[i] = Some(g);
                }
                Op::Param(id) => {
                    let slot = &mut grads.per_param[id.0];
                    match slot {
                        Some(s) => add_into(s, &g),
                        None => *slot = Some(g.clone()),
                    }
                    adj[i] = Some(g);
                }
                Op::Affine { x, w, b } => {
                    let (xs, ws) = (self.data(*x), self.value(*w));
                    let n = ws.cols();
                    let mut dx = vec![0.0; n];
                    let mut dw = vec![0.0; ws.len()];
                    for (r, (&gr, wrow)) in g.iter().zip(ws.data().chunks_exact(n)).enumerate() {
                        dx.iter_mut().zip(wrow).for_each(|(d, w)| *d += gr * w);
                        dw[r * n..(r + 1) * n]
                            .iter_mut()
                            .zip(xs)
                            .for_each(|(d, xv)| *d = gr * xv);
                    }
                    accumulate(&mut adj, *x, dx);
                    accumulate(&mut adj, *w, dw);
                    accumulate(&mut adj, *b, g);
                }
                Op::AffineRows { x, w, b } => {
                    let (xs, ws) = (self.value(*x), self.value(*w));
                    let (n, m) = (xs.cols(), ws.rows());
                    let mut dx = vec![0.0; xs.len()];
                    let mut dw = vec![0.0; ws.len()];
                    let mut db = vec![0.0; m];
                    for (r, grow) in g.chunks_exact(m).enumerate() {
                        let xr = &xs.data()[r * n..(r + 1) * n];
                        let dxr = &mut dx[r * n..(r + 1) * n];
                        for (j, &gj) in grow.iter().enumerate() {
                            let wrow = &ws.data()[j * n..(j + 1) * n];
                            dxr.iter_mut().zip(wrow).for_each(|(d, wv)| *d += gj * wv);
                            dw[j * n..(j + 1) * n]
                                .iter_mut()
                                .zip(xr)
                                .for_each(|(d, xv)| *d += gj * xv);
                            db[j] += gj;
                        }
                    }
                    accumulate(&mut adj, *x, dx);
                    accumulate(&mut adj, *w, dw);
                    accumulate(&mut adj, *b, db);
                }
                Op::Relu(x) => {
                    let dx = g
                        .iter()
                        .zip(self.data(*x))
                        .map(|(gv, xv)| if *xv > 0.0 { *gv } else { 0.0 })
                        .collect();
                    accumulate(&mut adj, *x, dx);
                }
                Op::Concat(a, b) => {
                    let na = self.value(*a).len();
                    accumulate(&mut adj, *a, g[..na].to_vec());
                    accumulate(&mut adj, *b, g[na..].to_vec());
                }
                Op::Add(a, b) => {
                    accumulate(&mut adj, *a, g.clone());
                    accumulate(&mut adj, *b, g);
                }
                Op::Sub(a, b) => {
                    let neg = g.iter().map(|v| -v).collect();
                    accumulate(&mut adj, *a, g);
                    accumulate(&mut adj, *b, neg);
                }
                Op::Scale { v, s } => {
                    let k = self.scalar(*s);
                    let ds = dot(&g, self.data(*v));
                    accumulate(&mut adj, *v, g.iter().map(|x| x * k).collect());
                    accumulate(&mut adj, *s, vec![ds]);
                }
                Op::ScaleConst { v, c } => {
                    accumulate(&mut adj, *v, g.iter().map(|x| x * c).collect());
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (self.scalar(*a), self.scalar(*b));
                    accumulate(&mut adj, *a, vec![g[0] * bv]);
                    accumulate(&mut adj, *b, vec![g[0] * av]);
                }
                Op::Div(a, b) => {
                    let (av, bv) = (self.scalar(*a), self.scalar(*b));
                    accumulate(&mut adj, *a, vec![g[0] / bv]);
                    accumulate(&mut adj, *b, vec![-g[0] * av / (bv * bv)]);
                }
                Op::Sum(terms) => {
                    for t in terms {
                        accumulate(&mut adj, *t, g.clone());
                    }
                }
                Op::L2Norm(x) => {
                    let xs = self.data(*x);
                    let n = self.scalar(Var(i));
                    let dx = if n > NORM_EPS {
                        xs.iter().map(|v| g[0] * v / n).collect()
                    } else {
                        vec![0.0; xs.len()]
                    };
                    accumulate(&mut adj, *x, dx);
                }
                Op::Exp(x) => {
                    let y = self.data(Var(i));
                    accumulate(&mut adj, *x, g.iter().zip(y).map(|(a, b)| a * b).collect());
                }
                Op::Sqrt(x) => {
                    let y = self.data(Var(i));
                    let dx = g
                        .iter()
                        .zip(y)
                        .map(|(gv, yv)| if *yv > NORM_EPS { gv / (2.0 * yv) } else { 0.0 })
                        .collect();
                    accumulate(&mut adj, *x, dx);
                }
                Op::Abs(x) => {
                    let dx = g
                        .iter()
                        .zip(self.data(*x))
                        .map(|(gv, xv)| gv * sign(*xv))
                        .collect();
                    accumulate(&mut adj, *x, dx);
                }
                Op::RowMean(x) => {
                    let xs = self.value(*x);
                    let r = xs.rows() as f64;
                    let row: Vec<f64> = g.iter().map(|v| v / r).collect();
                    accumulate(&mut adj, *x, row.repeat(xs.rows()));
                }
                Op::RowSqDevMean { x, mean } => {
                    let (xs, ms) = (self.value(*x), self.data(*mean));
                    let r = xs.rows() as f64;
                    let k = 2.0 * g[0] / r;
                    let mut dmean = vec![0.0; ms.len()];
                    let mut dx = Vec::with_capacity(xs.len());
                    for row in xs.data().chunks_exact(ms.len()) {
                        for (c, (xv, mv)) in row.iter().zip(ms).enumerate() {
                            let d = k * (xv - mv);
                            dx.push(d);
                            dmean[c] -= d;
                        }
                    }
                    accumulate(&mut adj, *x, dx);
                    accumulate(&mut adj, *mean, dmean);
                }
                Op::SoftmaxXent { logits, label, probs } => {
                    let mut dl: Vec<f64> = probs.iter().map(|p| g[0] * p).collect();
                    dl[*label] -= g[0];
                    accumulate(&mut adj, *logits, dl);
                }
                Op::Gaussian { f, mean, sigma } => {
                    let p = self.scalar(Var(i));
                    let k = -g[0] * p / (sigma * sigma);
                    let df = self.data(*f).iter().zip(mean).map(|(a, b)| k * (a - b)).collect();
                    accumulate(&mut adj, *f, df);
                }
                Op::LogGaussian { f, mean, sigma } => {
                    let k = -g[0] / (sigma * sigma);
                    let df = self.data(*f).iter().zip(mean).map(|(a, b)| k * (a - b)).collect();
                    accumulate(&mut adj, *f, df);
                }
            }
        }
        Ok(Adjoints { adj, grads })
    }

    fn expect_scalar(&self, v: Var) -> Result<()> {
        let t = self.value(v);
        if t.len() != 1 {
            return Err(dim_err(t.shape(), &[1]));
        }
        Ok(())
    }

    fn zip_values(&self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Result<Vec<f64>> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(dim_err(av.shape(), bv.shape()));
        }
        Ok(av.data().iter().zip(bv.data()).map(|(x, y)| f(*x, *y)).collect())
    }
}

/// Adjoints of every node reached by a reverse pass.
pub struct Adjoints {
    adj: Vec<Option<Vec<f64>>>,
    grads: Gradients,
}

impl Adjoints {
    /// Gradient reaching a leaf (constant or parameter) node.
    pub fn of(&self, v: Var) -> Option<&[f64]> {
        self.adj.get(v.0).and_then(|a| a.as_deref())
    }

    pub fn gradients(&self) -> &Gradients {
        &self.grads
    }

    pub fn into_gradients(self) -> Gradients {
        self.grads
    }
}

fn tensor(shape: Vec<usize>, data: Vec<f64>) -> Tensor {
    Tensor::new(shape, data).expect("shape preserved by elementwise op")
}

fn accumulate(adj: &mut [Option<Vec<f64>>], v: Var, g: Vec<f64>) {
    match &mut adj[v.0] {
        Some(existing) => add_into(existing, &g),
        slot @ None => *slot = Some(g),
    }
}

fn add_into(acc: &mut [f64], g: &[f64]) {
    acc.iter_mut().zip(g).for_each(|(a, b)| *a += b);
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub(crate) fn log_sum_exp(x: &[f64]) -> f64 {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + x.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Max-shifted softmax.
pub fn softmax(x: &[f64]) -> Vec<f64> {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = x.iter().map(|v| (v - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}

/// `exp(−d²/(2σ²)) / (√(2π)·σ)` evaluated through its logarithm.
pub(crate) fn gaussian_density(sq_distance: f64, sigma: f64) -> f64 {
    log_gaussian_density(sq_distance, sigma).exp()
}

pub(crate) fn log_gaussian_density(sq_distance: f64, sigma: f64) -> f64 {
    -((2.0 * PI).sqrt() * sigma).ln() - sq_distance / (2.0 * sigma * sigma)
}
