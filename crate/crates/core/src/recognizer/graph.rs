//! Reverse-mode automatic differentiation over a recorded tape.
//!
//! Every operation appends a node holding its value and whatever the
//! backward pass needs. [`Graph::backward`] walks the tape in reverse and
//! returns gradients for the parameter leaves.

use super::tensor::{gemm, Tensor};
use crate::error::{Error, Result};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Handle to a node on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(pub(crate) usize);

pub(crate) const LN_EPS: f64 = 1e-5;
pub(crate) const BN_EPS: f64 = 1e-5;

/// Geometry of a `[N, C, H, W]` activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Nchw {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Nchw {
    fn of(shape: &[usize]) -> Result<Nchw> {
        match shape {
            &[n, c, h, w] => Ok(Nchw { n, c, h, w }),
            _ => Err(Error::InvalidParameter(format!("expected [N, C, H, W], got {shape:?}"))),
        }
    }
}

enum Op {
    Input,
    Param(usize),
    Linear { x: Var, w: Var, b: Option<Var> },
    Add(Var, Var),
    /// `x[N, rows, cols] + b[rows, cols]`.
    AddBroadcast { x: Var, b: Var },
    Scale(Var, f64),
    Reshape(Var),
    Relu(Var),
    Dropout { x: Var, mask: Vec<f64> },
    LayerNorm { x: Var, g: Var, b: Var, xhat: Vec<f64>, inv_std: Vec<f64> },
    Attention { q: Var, k: Var, v: Var, heads: usize, probs: Vec<f64> },
    Embedding { table: Var, tokens: Vec<usize> },
    Conv2d { x: Var, w: Var, b: Var, geo: Nchw },
    BatchNorm { x: Var, g: Var, b: Var, xhat: Vec<f64>, inv_std: Vec<f64>, training: bool },
    MaxPool { x: Var, argmax: Vec<usize> },
    ToSequence { x: Var, geo: Nchw },
    CrossEntropy { logits: Var, targets: Vec<usize>, ignore: usize, probs: Vec<f64>, count: usize },
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Batch statistics observed by a training-mode batch norm.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchStats {
    pub mean: Vec<f64>,
    /// Unbiased variance.
    pub var: Vec<f64>,
}

/// A recorded computation.
pub struct Graph {
    nodes: Vec<Node>,
    rng: Option<ChaCha8Rng>,
    record_attention: bool,
    attention: Vec<(Vec<usize>, Vec<f64>)>,
}

impl std::fmt::Debug for Graph {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Graph").field("nodes", &self.nodes.len()).finish()
    }
}

fn im2col(x: &[f64], c: usize, h: usize, w: usize, col: &mut [f64]) {
    let hw = h * w;
    for ci in 0..c {
        for ky in 0..3 {
            for kx in 0..3 {
                let row = (ci * 9 + ky * 3 + kx) * hw;
                for y in 0..h {
                    let sy = y as isize + ky as isize - 1;
                    let dst = &mut col[row + y * w..row + (y + 1) * w];
                    if sy < 0 || sy >= h as isize {
                        dst.fill(0.0);
                        continue;
                    }
                    let src = &x[ci * hw + sy as usize * w..ci * hw + (sy as usize + 1) * w];
                    match kx {
                        0 => {
                            dst[0] = 0.0;
                            dst[1..].copy_from_slice(&src[..w - 1]);
                        }
                        1 => dst.copy_from_slice(src),
                        _ => {
                            dst[..w - 1].copy_from_slice(&src[1..]);
                            dst[w - 1] = 0.0;
                        }
                    }
                }
            }
        }
    }
}

fn col2im(col: &[f64], c: usize, h: usize, w: usize, dx: &mut [f64]) {
    let hw = h * w;
    for ci in 0..c {
        for ky in 0..3 {
            for kx in 0..3 {
                let row = (ci * 9 + ky * 3 + kx) * hw;
                for y in 0..h {
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let src = &col[row + y * w..row + (y + 1) * w];
                    let dst = &mut dx[ci * hw + sy as usize * w..ci * hw + (sy as usize + 1) * w];
                    match kx {
                        0 => dst[..w - 1].iter_mut().zip(&src[1..]).for_each(|(d, s)| *d += s),
                        1 => dst.iter_mut().zip(src).for_each(|(d, s)| *d += s),
                        _ => dst[1..].iter_mut().zip(&src[..w - 1]).for_each(|(d, s)| *d += s),
                    }
                }
            }
        }
    }
}

fn add_into(dst: &mut Option<Vec<f64>>, src: &[f64]) {
    match dst {
        Some(d) => d.iter_mut().zip(src).for_each(|(a, b)| *a += b),
        None => *dst = Some(src.to_vec()),
    }
}

impl Graph {
    /// A graph for inference or gradient checks (dropout disabled).
    pub fn new() -> Graph {
        Graph {
            nodes: Vec::new(),
            rng: None,
            record_attention: false,
            attention: Vec::new(),
        }
    }

    /// A graph that applies dropout using `rng`.
    pub fn with_dropout_rng(rng: ChaCha8Rng) -> Graph {
        Graph {
            rng: Some(rng),
            ..Graph::new()
        }
    }

    /// Keeps a copy of every attention probability tensor (`[N, heads, Sq, Sk]`).
    pub fn record_attention(&mut self, on: bool) {
        self.record_attention = on;
    }

    pub fn attention_records(&self) -> &[(Vec<usize>, Vec<f64>)] {
        &self.attention
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// A constant.
    pub fn input(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Input, false)
    }

    /// A parameter leaf; its gradient is reported under `index`.
    pub fn param(&mut self, index: usize, t: Tensor) -> Var {
        self.push(t, Op::Param(index), true)
    }

    /// `x W + b` over the last axis of `x`; `W` is `[in, out]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let (xs, ws) = (self.value(x).shape().to_vec(), self.value(w).shape().to_vec());
        let &[din, dout] = ws.as_slice() else {
            return Err(Error::InvalidParameter(format!("linear weight must be 2-D, got {ws:?}")));
        };
        if xs.last() != Some(&din) {
            return Err(Error::InvalidParameter(format!("linear input {xs:?} does not end in {din}")));
        }
        let m = self.value(x).len() / din;
        let mut out = vec![0.0; m * dout];
        if let Some(b) = b {
            let bv = self.value(b).data();
            for r in out.chunks_exact_mut(dout) {
                r.copy_from_slice(bv);
            }
        }
        gemm(m, din, dout, 1.0, self.value(x).data(), (din, 1), self.value(w).data(), (dout, 1), 1.0, &mut out, (dout, 1));
        let mut shape = xs;
        *shape.last_mut().expect("non-empty") = dout;
        let rg = self.rg(x) || self.rg(w) || b.is_some_and(|b| self.rg(b));
        Ok(self.push(Tensor::new(&shape, out)?, Op::Linear { x, w, b }, rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(Error::InvalidParameter(format!(
                "add: shapes {:?} and {:?} differ",
                self.value(a).shape(),
                self.value(b).shape()
            )));
        }
        let data = self.value(a).data().iter().zip(self.value(b).data()).map(|(x, y)| x + y).collect();
        let t = Tensor::new(self.value(a).shape(), data)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(t, Op::Add(a, b), rg))
    }

    /// Adds `b` to every leading slice of `x`.
    pub fn add_broadcast(&mut self, x: Var, b: Var) -> Result<Var> {
        let blen = self.value(b).len();
        if blen == 0 || self.value(x).len() % blen != 0 || !self.value(x).shape().ends_with(self.value(b).shape()) {
            return Err(Error::InvalidParameter(format!(
                "cannot broadcast {:?} onto {:?}",
                self.value(b).shape(),
                self.value(x).shape()
            )));
        }
        let bv = self.value(b).data();
        let data = self.value(x).data().iter().enumerate().map(|(i, v)| v + bv[i % blen]).collect();
        let t = Tensor::new(self.value(x).shape(), data)?;
        let rg = self.rg(x) || self.rg(b);
        Ok(self.push(t, Op::AddBroadcast { x, b }, rg))
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Var {
        let v = self.value(x);
        let t = Tensor::new(v.shape(), v.data().iter().map(|a| a * s).collect()).expect("same shape");
        let rg = self.rg(x);
        self.push(t, Op::Scale(x, s), rg)
    }

    /// Same values under a new shape.
    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let t = self.value(x).clone().reshape(shape)?;
        let rg = self.rg(x);
        Ok(self.push(t, Op::Reshape(x), rg))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let t = Tensor::new(v.shape(), v.data().iter().map(|a| a.max(0.0)).collect()).expect("same shape");
        let rg = self.rg(x);
        self.push(t, Op::Relu(x), rg)
    }

    /// Inverted dropout; identity when the graph has no dropout rng or `p == 0`.
    pub fn dropout(&mut self, x: Var, p: f64) -> Var {
        let Some(rng) = self.rng.as_mut().filter(|_| p > 0.0) else {
            return x;
        };
        let keep = 1.0 / (1.0 - p);
        let n = self.nodes[x.0].value.len();
        let mask: Vec<f64> = (0..n).map(|_| if rng.random::<f64>() < p { 0.0 } else { keep }).collect();
        let v = self.value(x);
        let t = Tensor::new(v.shape(), v.data().iter().zip(&mask).map(|(a, m)| a * m).collect()).expect("same shape");
        let rg = self.rg(x);
        self.push(t, Op::Dropout { x, mask }, rg)
    }

    /// Normalizes over the last axis, then scales by `g` and shifts by `b`.
    pub fn layer_norm(&mut self, x: Var, g: Var, b: Var) -> Result<Var> {
        let d = self.value(x).last_dim();
        if self.value(g).len() != d || self.value(b).len() != d {
            return Err(Error::InvalidParameter("layer norm affine size mismatch".into()));
        }
        let xv = self.value(x).data();
        let (gv, bv) = (self.value(g).data(), self.value(b).data());
        let rows = xv.len() / d;
        let mut xhat = vec![0.0; xv.len()];
        let mut inv_std = vec![0.0; rows];
        let mut out = vec![0.0; xv.len()];
        for r in 0..rows {
            let row = &xv[r * d..(r + 1) * d];
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            let is = 1.0 / (var + LN_EPS).sqrt();
            inv_std[r] = is;
            for j in 0..d {
                let xh = (row[j] - mean) * is;
                xhat[r * d + j] = xh;
                out[r * d + j] = xh * gv[j] + bv[j];
            }
        }
        let t = Tensor::new(self.value(x).shape(), out)?;
        let rg = self.rg(x) || self.rg(g) || self.rg(b);
        Ok(self.push(t, Op::LayerNorm { x, g, b, xhat, inv_std }, rg))
    }

    /// Multi-head scaled dot-product attention on `[N, S, d]` projections.
    /// With `causal`, query `i` only sees keys `j <= i`.
    pub fn attention(&mut self, q: Var, k: Var, v: Var, heads: usize, causal: bool) -> Result<Var> {
        let qs = self.value(q).shape().to_vec();
        let ks = self.value(k).shape().to_vec();
        let (&[n, sq, d], &[nk, sk, dk_]) = (qs.as_slice(), ks.as_slice()) else {
            return Err(Error::InvalidParameter("attention inputs must be [N, S, d]".into()));
        };
        if n != nk || d != dk_ || self.value(v).shape() != ks.as_slice() || heads == 0 || d % heads != 0 {
            return Err(Error::InvalidParameter(format!("attention shapes {qs:?} / {ks:?} with {heads} heads")));
        }
        let dh = d / heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let (qv, kv, vv) = (self.value(q).data(), self.value(k).data(), self.value(v).data());
        let mut probs = vec![0.0; n * heads * sq * sk];
        let mut out = vec![0.0; n * sq * d];
        for b in 0..n {
            for h in 0..heads {
                let p = &mut probs[((b * heads + h) * sq) * sk..((b * heads + h + 1) * sq) * sk];
                let qo = b * sq * d + h * dh;
                let ko = b * sk * d + h * dh;
                gemm(sq, dh, sk, scale, &qv[qo..], (d, 1), &kv[ko..], (1, d), 0.0, p, (sk, 1));
                for i in 0..sq {
                    let row = &mut p[i * sk..(i + 1) * sk];
                    let visible = if causal { (i + 1).min(sk) } else { sk };
                    let max = row[..visible].iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let mut sum = 0.0;
                    for v in row[..visible].iter_mut() {
                        *v = (*v - max).exp();
                        sum += *v;
                    }
                    row[..visible].iter_mut().for_each(|v| *v /= sum);
                    row[visible..].fill(0.0);
                }
                gemm(sq, sk, dh, 1.0, p, (sk, 1), &vv[ko..], (d, 1), 0.0, &mut out[qo..], (d, 1));
            }
        }
        if self.record_attention {
            self.attention.push((vec![n, heads, sq, sk], probs.clone()));
        }
        let t = Tensor::new(&[n, sq, d], out)?;
        let rg = self.rg(q) || self.rg(k) || self.rg(v);
        Ok(self.push(t, Op::Attention { q, k, v, heads, probs }, rg))
    }

    /// Looks up rows of `table` (`[V, d]`); output is `[tokens.len(), d]`.
    pub fn embedding(&mut self, table: Var, tokens: &[usize]) -> Result<Var> {
        let ts = self.value(table).shape().to_vec();
        let &[vocab, d] = ts.as_slice() else {
            return Err(Error::InvalidParameter("embedding table must be [V, d]".into()));
        };
        if let Some(t) = tokens.iter().find(|&&t| t >= vocab) {
            return Err(Error::InvalidParameter(format!("token {t} outside vocabulary of {vocab}")));
        }
        let tv = self.value(table);
        let mut out = Vec::with_capacity(tokens.len() * d);
        for &t in tokens {
            out.extend_from_slice(tv.row(t));
        }
        let rg = self.rg(table);
        Ok(self.push(
            Tensor::new(&[tokens.len(), d], out)?,
            Op::Embedding {
                table,
                tokens: tokens.to_vec(),
            },
            rg,
        ))
    }

    /// 3x3 convolution, stride 1, zero padding 1. `w` is `[Cout, Cin, 3, 3]`.
    pub fn conv2d(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let geo = Nchw::of(self.value(x).shape())?;
        let ws = self.value(w).shape().to_vec();
        let &[cout, cin, 3, 3] = ws.as_slice() else {
            return Err(Error::InvalidParameter(format!("conv weight must be [Cout, Cin, 3, 3], got {ws:?}")));
        };
        if cin != geo.c || self.value(b).len() != cout || geo.w < 2 {
            return Err(Error::InvalidParameter(format!("conv input {:?} vs weight {ws:?}", self.value(x).shape())));
        }
        let hw = geo.h * geo.w;
        let mut out = vec![0.0; geo.n * cout * hw];
        let mut col = vec![0.0; cin * 9 * hw];
        let (xv, wv, bv) = (self.value(x).data(), self.value(w).data(), self.value(b).data());
        for i in 0..geo.n {
            im2col(&xv[i * cin * hw..(i + 1) * cin * hw], cin, geo.h, geo.w, &mut col);
            let y = &mut out[i * cout * hw..(i + 1) * cout * hw];
            for (co, r) in y.chunks_exact_mut(hw).enumerate() {
                r.fill(bv[co]);
            }
            gemm(cout, cin * 9, hw, 1.0, wv, (cin * 9, 1), &col, (hw, 1), 1.0, y, (hw, 1));
        }
        let t = Tensor::new(&[geo.n, cout, geo.h, geo.w], out)?;
        let rg = self.rg(x) || self.rg(w) || self.rg(b);
        Ok(self.push(t, Op::Conv2d { x, w, b, geo }, rg))
    }

    /// Per-channel batch norm over `[N, C, H, W]`.
    ///
    /// In training mode the batch statistics are used (and returned);
    /// otherwise `running` supplies mean and variance.
    pub fn batch_norm(
        &mut self,
        x: Var,
        g: Var,
        b: Var,
        running: Option<(&[f64], &[f64])>,
    ) -> Result<(Var, Option<BatchStats>)> {
        let geo = Nchw::of(self.value(x).shape())?;
        let (c, hw) = (geo.c, geo.h * geo.w);
        if self.value(g).len() != c || self.value(b).len() != c {
            return Err(Error::InvalidParameter("batch norm affine size mismatch".into()));
        }
        let m = geo.n * hw;
        let xv = self.value(x).data();
        let (mean, var, stats) = match running {
            Some((rm, rv)) => (rm.to_vec(), rv.to_vec(), None),
            None => {
                let mut mean = vec![0.0; c];
                let mut var = vec![0.0; c];
                for ch in 0..c {
                    let mut s = 0.0;
                    for i in 0..geo.n {
                        s += xv[(i * c + ch) * hw..(i * c + ch + 1) * hw].iter().sum::<f64>();
                    }
                    let mu = s / m as f64;
                    let mut ss = 0.0;
                    for i in 0..geo.n {
                        ss += xv[(i * c + ch) * hw..(i * c + ch + 1) * hw].iter().map(|v| (v - mu) * (v - mu)).sum::<f64>();
                    }
                    mean[ch] = mu;
                    var[ch] = ss / m as f64;
                }
                let unbiased = var.iter().map(|v| if m > 1 { v * m as f64 / (m - 1) as f64 } else { *v }).collect();
                (mean.clone(), var, Some(BatchStats { mean, var: unbiased }))
            }
        };
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();
        let (gv, bv) = (self.value(g).data(), self.value(b).data());
        let mut xhat = vec![0.0; xv.len()];
        let mut out = vec![0.0; xv.len()];
        for i in 0..geo.n {
            for ch in 0..c {
                let base = (i * c + ch) * hw;
                for j in base..base + hw {
                    let xh = (xv[j] - mean[ch]) * inv_std[ch];
                    xhat[j] = xh;
                    out[j] = xh * gv[ch] + bv[ch];
                }
            }
        }
        let t = Tensor::new(self.value(x).shape(), out)?;
        let rg = self.rg(x) || self.rg(g) || self.rg(b);
        let training = stats.is_some();
        let var_out = self.push(
            t,
            Op::BatchNorm {
                x,
                g,
                b,
                xhat,
                inv_std,
                training,
            },
            rg,
        );
        Ok((var_out, stats))
    }

    /// 2x2 max pooling with stride 2.
    pub fn max_pool(&mut self, x: Var) -> Result<Var> {
        let geo = Nchw::of(self.value(x).shape())?;
        if geo.h % 2 != 0 || geo.w % 2 != 0 {
            return Err(Error::InvalidParameter(format!("max pool needs even H and W, got {}x{}", geo.h, geo.w)));
        }
        let (oh, ow) = (geo.h / 2, geo.w / 2);
        let xv = self.value(x).data();
        let mut out = Vec::with_capacity(geo.n * geo.c * oh * ow);
        let mut argmax = Vec::with_capacity(out.capacity());
        for plane in 0..geo.n * geo.c {
            let base = plane * geo.h * geo.w;
            for y in 0..oh {
                for xx in 0..ow {
                    let cands = [
                        base + 2 * y * geo.w + 2 * xx,
                        base + 2 * y * geo.w + 2 * xx + 1,
                        base + (2 * y + 1) * geo.w + 2 * xx,
                        base + (2 * y + 1) * geo.w + 2 * xx + 1,
                    ];
                    let best = cands.into_iter().fold(cands[0], |a, b| if xv[b] > xv[a] { b } else { a });
                    out.push(xv[best]);
                    argmax.push(best);
                }
            }
        }
        let t = Tensor::new(&[geo.n, geo.c, oh, ow], out)?;
        let rg = self.rg(x);
        Ok(self.push(t, Op::MaxPool { x, argmax }, rg))
    }

    /// `[N, C, H, W]` to `[N, W, C*H]`: one feature vector per column,
    /// channel-major.
    pub fn to_sequence(&mut self, x: Var) -> Result<Var> {
        let geo = Nchw::of(self.value(x).shape())?;
        let xv = self.value(x).data();
        let f = geo.c * geo.h;
        let mut out = vec![0.0; geo.n * geo.w * f];
        for i in 0..geo.n {
            for c in 0..geo.c {
                for y in 0..geo.h {
                    let src = ((i * geo.c + c) * geo.h + y) * geo.w;
                    for xx in 0..geo.w {
                        out[(i * geo.w + xx) * f + c * geo.h + y] = xv[src + xx];
                    }
                }
            }
        }
        let t = Tensor::new(&[geo.n, geo.w, f], out)?;
        let rg = self.rg(x);
        Ok(self.push(t, Op::ToSequence { x, geo }, rg))
    }

    /// Mean cross-entropy of `logits` (`[M, V]` or `[.., V]`) against
    /// `targets`, skipping positions whose target is `ignore`.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[usize], ignore: usize) -> Result<Var> {
        let lv = self.value(logits);
        let vsz = lv.last_dim();
        let m = lv.len() / vsz;
        if targets.len() != m {
            return Err(Error::InvalidParameter(format!("{} targets for {m} logit rows", targets.len())));
        }
        let mut probs = vec![0.0; lv.len()];
        let mut loss = 0.0;
        let mut count = 0;
        for (r, &t) in targets.iter().enumerate() {
            if t == ignore {
                continue;
            }
            if t >= vsz {
                return Err(Error::InvalidParameter(format!("target {t} outside vocabulary of {vsz}")));
            }
            let row = lv.row(r);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = row.iter().map(|v| (v - max).exp()).sum();
            for (j, v) in row.iter().enumerate() {
                probs[r * vsz + j] = (v - max).exp() / sum;
            }
            loss += -(row[t] - max - sum.ln());
            count += 1;
        }
        let loss = if count > 0 { loss / count as f64 } else { 0.0 };
        let rg = self.rg(logits);
        Ok(self.push(
            Tensor::new(&[1], vec![loss])?,
            Op::CrossEntropy {
                logits,
                targets: targets.to_vec(),
                ignore,
                probs,
                count,
            },
            rg,
        ))
    }

    /// Back-propagates from the scalar `root` and returns each parameter
    /// leaf's gradient keyed by its parameter index.
    pub fn backward(&self, root: Var) -> Vec<(usize, Vec<f64>)> {
        let mut grads: Vec<Option<Vec<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root.0] = Some(vec![1.0; self.nodes[root.0].value.len()]);
        let mut out = Vec::new();
        for id in (0..=root.0).rev() {
            let Some(dy) = grads[id].take() else { continue };
            let node = &self.nodes[id];
            if !node.requires_grad {
                continue;
            }
            self.backward_node(node, &dy, &mut grads, &mut out);
        }
        out
    }

    fn backward_node(&self, node: &Node, dy: &[f64], grads: &mut [Option<Vec<f64>>], out: &mut Vec<(usize, Vec<f64>)>) {
        let val = |v: Var| &self.nodes[v.0].value;
        match &node.op {
            Op::Input => {}
            Op::Param(i) => out.push((*i, dy.to_vec())),
            Op::Linear { x, w, b } => {
                let (din, dout) = (val(*w).shape()[0], val(*w).shape()[1]);
                let m = dy.len() / dout;
                if self.rg(*x) {
                    let mut dx = vec![0.0; m * din];
                    gemm(m, dout, din, 1.0, dy, (dout, 1), val(*w).data(), (1, dout), 0.0, &mut dx, (din, 1));
                    add_into(&mut grads[x.0], &dx);
                }
                if self.rg(*w) {
                    let mut dw = vec![0.0; din * dout];
                    gemm(din, m, dout, 1.0, val(*x).data(), (1, din), dy, (dout, 1), 0.0, &mut dw, (dout, 1));
                    add_into(&mut grads[w.0], &dw);
                }
                if let Some(b) = b.filter(|b| self.rg(*b)) {
                    let mut db = vec![0.0; dout];
                    for r in dy.chunks_exact(dout) {
                        db.iter_mut().zip(r).for_each(|(a, v)| *a += v);
                    }
                    add_into(&mut grads[b.0], &db);
                }
            }
            Op::Add(a, b) => {
                for v in [a, b] {
                    if self.rg(*v) {
                        add_into(&mut grads[v.0], dy);
                    }
                }
            }
            Op::AddBroadcast { x, b } => {
                if self.rg(*x) {
                    add_into(&mut grads[x.0], dy);
                }
                if self.rg(*b) {
                    let blen = val(*b).len();
                    let mut db = vec![0.0; blen];
                    for (i, v) in dy.iter().enumerate() {
                        db[i % blen] += v;
                    }
                    add_into(&mut grads[b.0], &db);
                }
            }
            Op::Scale(x, s) => {
                let dx: Vec<f64> = dy.iter().map(|v| v * s).collect();
                add_into(&mut grads[x.0], &dx);
            }
            Op::Reshape(x) => add_into(&mut grads[x.0], dy),
            Op::Relu(x) => {
                let dx: Vec<f64> = dy
                    .iter()
                    .zip(val(*x).data())
                    .map(|(g, &v)| if v > 0.0 { *g } else { 0.0 })
                    .collect();
                add_into(&mut grads[x.0], &dx);
            }
            Op::Dropout { x, mask } => {
                let dx: Vec<f64> = dy.iter().zip(mask).map(|(g, m)| g * m).collect();
                add_into(&mut grads[x.0], &dx);
            }
            Op::LayerNorm { x, g, b, xhat, inv_std } => {
                let d = val(*g).len();
                let gv = val(*g).data();
                if self.rg(*g) || self.rg(*b) {
                    let mut dg = vec![0.0; d];
                    let mut db = vec![0.0; d];
                    for (i, v) in dy.iter().enumerate() {
                        dg[i % d] += v * xhat[i];
                        db[i % d] += v;
                    }
                    add_into(&mut grads[g.0], &dg);
                    add_into(&mut grads[b.0], &db);
                }
                if self.rg(*x) {
                    let mut dx = vec![0.0; dy.len()];
                    for (r, &is) in inv_std.iter().enumerate() {
                        let rs = r * d..(r + 1) * d;
                        let dxh: Vec<f64> = dy[rs.clone()].iter().zip(gv).map(|(a, b)| a * b).collect();
                        let s1: f64 = dxh.iter().sum();
                        let s2: f64 = dxh.iter().zip(&xhat[rs.clone()]).map(|(a, b)| a * b).sum();
                        for j in 0..d {
                            dx[r * d + j] = is / d as f64 * (d as f64 * dxh[j] - s1 - xhat[r * d + j] * s2);
                        }
                    }
                    add_into(&mut grads[x.0], &dx);
                }
            }
            Op::Attention { q, k, v, heads, probs } => {
                let (n, sq, d) = (val(*q).shape()[0], val(*q).shape()[1], val(*q).shape()[2]);
                let sk = val(*k).shape()[1];
                let dh = d / heads;
                let scale = 1.0 / (dh as f64).sqrt();
                let (qv, kv, vv) = (val(*q).data(), val(*k).data(), val(*v).data());
                let mut dq = vec![0.0; qv.len()];
                let mut dk = vec![0.0; kv.len()];
                let mut dv = vec![0.0; vv.len()];
                let mut dp = vec![0.0; sq * sk];
                for bi in 0..n {
                    for h in 0..*heads {
                        let p = &probs[((bi * heads + h) * sq) * sk..((bi * heads + h + 1) * sq) * sk];
                        let qo = bi * sq * d + h * dh;
                        let ko = bi * sk * d + h * dh;
                        gemm(sq, dh, sk, 1.0, &dy[qo..], (d, 1), &vv[ko..], (1, d), 0.0, &mut dp, (sk, 1));
                        gemm(sk, sq, dh, 1.0, p, (1, sk), &dy[qo..], (d, 1), 1.0, &mut dv[ko..], (d, 1));
                        for i in 0..sq {
                            let pr = &p[i * sk..(i + 1) * sk];
                            let dr = &mut dp[i * sk..(i + 1) * sk];
                            let dot: f64 = pr.iter().zip(dr.iter()).map(|(a, b)| a * b).sum();
                            dr.iter_mut().zip(pr).for_each(|(g, pv)| *g = pv * (*g - dot));
                        }
                        gemm(sq, sk, dh, scale, &dp, (sk, 1), &kv[ko..], (d, 1), 1.0, &mut dq[qo..], (d, 1));
                        gemm(sk, sq, dh, scale, &dp, (1, sk), &qv[qo..], (d, 1), 1.0, &mut dk[ko..], (d, 1));
                    }
                }
                for (var, g) in [(q, dq), (k, dk), (v, dv)] {
                    if self.rg(*var) {
                        add_into(&mut grads[var.0], &g);
                    }
                }
            }
            Op::Embedding { table, tokens } => {
                let d = val(*table).shape()[1];
                let mut dt = vec![0.0; val(*table).len()];
                for (i, &t) in tokens.iter().enumerate() {
                    dt[t * d..(t + 1) * d].iter_mut().zip(&dy[i * d..(i + 1) * d]).for_each(|(a, b)| *a += b);
                }
                add_into(&mut grads[table.0], &dt);
            }
            Op::Conv2d { x, w, b, geo } => {
                let cout = val(*w).shape()[0];
                let (cin, hw) = (geo.c, geo.h * geo.w);
                let mut col = vec![0.0; cin * 9 * hw];
                let mut dw = vec![0.0; cout * cin * 9];
                let mut db = vec![0.0; cout];
                let mut dx = if self.rg(*x) { Some(vec![0.0; val(*x).len()]) } else { None };
                let mut dcol = if dx.is_some() { vec![0.0; col.len()] } else { Vec::new() };
                for i in 0..geo.n {
                    let dyi = &dy[i * cout * hw..(i + 1) * cout * hw];
                    if self.rg(*w) {
                        im2col(&val(*x).data()[i * cin * hw..(i + 1) * cin * hw], cin, geo.h, geo.w, &mut col);
                        gemm(cout, hw, cin * 9, 1.0, dyi, (hw, 1), &col, (1, hw), 1.0, &mut dw, (cin * 9, 1));
                    }
                    for (co, r) in dyi.chunks_exact(hw).enumerate() {
                        db[co] += r.iter().sum::<f64>();
                    }
                    if let Some(dx) = dx.as_mut() {
                        gemm(cin * 9, cout, hw, 1.0, val(*w).data(), (1, cin * 9), dyi, (hw, 1), 0.0, &mut dcol, (hw, 1));
                        col2im(&dcol, cin, geo.h, geo.w, &mut dx[i * cin * hw..(i + 1) * cin * hw]);
                    }
                }
                if self.rg(*w) {
                    add_into(&mut grads[w.0], &dw);
                }
                if self.rg(*b) {
                    add_into(&mut grads[b.0], &db);
                }
                if let Some(dx) = dx {
                    add_into(&mut grads[x.0], &dx);
                }
            }
            Op::BatchNorm {
                x,
                g,
                b,
                xhat,
                inv_std,
                training,
            } => {
                let geo = Nchw::of(val(*x).shape()).expect("checked in forward");
                let (c, hw) = (geo.c, geo.h * geo.w);
                let m = (geo.n * hw) as f64;
                let gv = val(*g).data();
                let mut dg = vec![0.0; c];
                let mut db = vec![0.0; c];
                let mut sdx = vec![0.0; c];
                let mut sdxx = vec![0.0; c];
                for i in 0..geo.n {
                    for ch in 0..c {
                        let base = (i * c + ch) * hw;
                        for j in base..base + hw {
                            dg[ch] += dy[j] * xhat[j];
                            db[ch] += dy[j];
                            sdx[ch] += dy[j] * gv[ch];
                            sdxx[ch] += dy[j] * gv[ch] * xhat[j];
                        }
                    }
                }
                if self.rg(*g) {
                    add_into(&mut grads[g.0], &dg);
                }
                if self.rg(*b) {
                    add_into(&mut grads[b.0], &db);
                }
                if self.rg(*x) {
                    let mut dx = vec![0.0; dy.len()];
                    for i in 0..geo.n {
                        for ch in 0..c {
                            let base = (i * c + ch) * hw;
                            for j in base..base + hw {
                                let dxh = dy[j] * gv[ch];
                                dx[j] = if *training {
                                    inv_std[ch] / m * (m * dxh - sdx[ch] - xhat[j] * sdxx[ch])
                                } else {
                                    dxh * inv_std[ch]
                                };
                            }
                        }
                    }
                    add_into(&mut grads[x.0], &dx);
                }
            }
            Op::MaxPool { x, argmax } => {
                let mut dx = vec![0.0; val(*x).len()];
                for (g, &src) in dy.iter().zip(argmax) {
                    dx[src] += g;
                }
                add_into(&mut grads[x.0], &dx);
            }
            Op::ToSequence { x, geo } => {
                let f = geo.c * geo.h;
                let mut dx = vec![0.0; val(*x).len()];
                for i in 0..geo.n {
                    for c in 0..geo.c {
                        for y in 0..geo.h {
                            let dst = ((i * geo.c + c) * geo.h + y) * geo.w;
                            for xx in 0..geo.w {
                                dx[dst + xx] = dy[(i * geo.w + xx) * f + c * geo.h + y];
                            }
                        }
                    }
                }
                add_into(&mut grads[x.0], &dx);
            }
            Op::CrossEntropy {
                logits,
                targets,
                ignore,
                probs,
                count,
            } => {
                let vsz = val(*logits).last_dim();
                let mut dl = vec![0.0; probs.len()];
                if *count > 0 {
                    let s = dy[0] / *count as f64;
                    for (r, &t) in targets.iter().enumerate() {
                        if t == *ignore {
                            continue;
                        }
                        for j in 0..vsz {
                            dl[r * vsz + j] = s * (probs[r * vsz + j] - if j == t { 1.0 } else { 0.0 });
                        }
                    }
                }
                add_into(&mut grads[logits.0], &dl);
            }
        }
    }
}

impl Default for Graph {
    fn default() -> Self {
        Graph::new()
    }
}
