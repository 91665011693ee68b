//! Reverse-mode differentiation over the tensor op set.
//!
//! A [`Graph`] records every operation applied during a forward pass together
//! with its value. [`Graph::backward`] walks the record in reverse and returns
//! the gradient of a scalar node with respect to every parameter that was
//! read. Parameters live in borrowed [`WeightStore`]s ("sets"), so one graph
//! can span the NUC and SR networks while keeping their gradients apart.

use std::sync::Arc;

use crate::error::{contract, Error, Result};
use crate::metrics::ssim::{ssim_and_grad, SsimParams};
use crate::ops::{
    self, conv_backward_input, conv_backward_params, conv_forward, pixel_unshuffle, resample_plane,
    resample_plane_adjoint, AxisTaps, ConvGeom,
};
use crate::tensor::{Real, Tensor3};
use crate::weights::{ConvSpec, WeightStore};

/// Handle to a node of a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct ParamRef {
    set: usize,
    index: usize,
}

enum Op<R> {
    Leaf,
    Conv { x: Var, w: ParamRef, b: ParamRef, geom: ConvGeom },
    LeakyRelu { x: Var, slope: R },
    Softplus { x: Var },
    PixelShuffle { x: Var, s: usize },
    Concat { parts: Vec<Var> },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Affine { x: Var, scale: R },
    AddScalar { x: Var, s: Var },
    Linear { x: Var, w: ParamRef, b: ParamRef },
    Resample { x: Var, ty: Arc<AxisTaps>, tx: Arc<AxisTaps> },
    ChannelSoftmax { x: Var },
    LocalFuse { weights: Var, frames: Var, k: usize },
    Shift { x: Var, dy: i32, dx: i32 },
    Mae { x: Var, target: Var },
    SsimLoss { x: Var, target: Var, params: SsimParams },
}

struct Node<R> {
    op: Op<R>,
    value: Tensor3<R>,
    needs_grad: bool,
}

/// Parameter gradients, one `f64` buffer per parameter of each set.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    sets: Vec<Vec<Vec<f64>>>,
}

impl Gradients {
    pub fn zeros<R: Real>(stores: &[&WeightStore<R>]) -> Self {
        Self { sets: stores.iter().map(|s| (0..s.len()).map(|i| vec![0.0; s.by_index(i).len()]).collect()).collect() }
    }

    /// Gradient buffers of one set, indexed like the store.
    pub fn set(&self, set: usize) -> &[Vec<f64>] {
        &self.sets[set]
    }

    pub fn accumulate(&mut self, other: &Gradients) {
        for (a, b) in self.sets.iter_mut().zip(&other.sets) {
            for (pa, pb) in a.iter_mut().zip(b) {
                for (x, y) in pa.iter_mut().zip(pb) {
                    *x += y;
                }
            }
        }
    }

    pub fn scale(&mut self, f: f64) {
        self.sets.iter_mut().flatten().flatten().for_each(|v| *v *= f);
    }

    pub fn all_finite(&self) -> bool {
        self.sets.iter().flatten().flatten().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.sets.iter().flatten().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }
}

fn clamp_index(i: usize, d: isize, n: usize) -> usize {
    (i as isize + d).clamp(0, n as isize - 1) as usize
}

/// Recorded forward computation.
pub struct Graph<'a, R: Real> {
    sets: Vec<&'a WeightStore<R>>,
    nodes: Vec<Node<R>>,
}

impl<'a, R: Real> Graph<'a, R> {
    pub fn new(sets: Vec<&'a WeightStore<R>>) -> Self {
        Self { sets, nodes: Vec::new() }
    }

    fn push(&mut self, op: Op<R>, value: Tensor3<R>, needs_grad: bool) -> Var {
        self.nodes.push(Node { op, value, needs_grad });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor3<R> {
        &self.nodes[v.0].value
    }

    /// Scalar value of a `1×1×1` node.
    pub fn scalar(&self, v: Var) -> R {
        self.value(v).data()[0]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn param(&self, set: usize, name: &str, dims: &[usize]) -> Result<ParamRef> {
        let store = self.sets.get(set).ok_or_else(|| Error::Load(format!("no parameter set {set}")))?;
        store.expect(name, dims)?;
        Ok(ParamRef { set, index: store.index_of(name).expect("checked above") })
    }

    fn param_values(&self, p: ParamRef) -> &[R] {
        &self.sets[p.set].by_index(p.index).values
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn same_shape(&self, a: Var, b: Var) -> Result<()> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(contract(format!("shape mismatch {:?} vs {:?}", self.value(a).shape(), self.value(b).shape())));
        }
        Ok(())
    }

    /// Constant input.
    pub fn leaf(&mut self, t: Tensor3<R>) -> Var {
        self.push(Op::Leaf, t, false)
    }

    /// Same-padded convolution with parameters `<spec.name>.weight` / `.bias` of `set`.
    pub fn conv(&mut self, x: Var, set: usize, spec: &ConvSpec) -> Result<Var> {
        let w = self.param(set, &spec.weight_name(), &spec.weight_dims())?;
        let b = self.param(set, &spec.bias_name(), &[spec.out_channels])?;
        let geom = ConvGeom::same(spec.out_channels, spec.in_channels, spec.k);
        geom.check_input(self.value(x))?;
        let y = conv_forward(self.value(x), self.param_values(w), Some(self.param_values(b)), geom);
        Ok(self.push(Op::Conv { x, w, b, geom }, y, true))
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Var {
        let slope = R::of(slope);
        let y = ops::leaky_relu(self.value(x), slope);
        let ng = self.needs(x);
        self.push(Op::LeakyRelu { x, slope }, y, ng)
    }

    pub fn softplus(&mut self, x: Var) -> Var {
        let y = self.value(x).map(ops::softplus);
        let ng = self.needs(x);
        self.push(Op::Softplus { x }, y, ng)
    }

    pub fn pixel_shuffle(&mut self, x: Var, s: usize) -> Result<Var> {
        let y = ops::pixel_shuffle(self.value(x), s)?;
        let ng = self.needs(x);
        Ok(self.push(Op::PixelShuffle { x, s }, y, ng))
    }

    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let vals: Vec<&Tensor3<R>> = parts.iter().map(|&p| self.value(p)).collect();
        let y = ops::concat_all(&vals)?;
        let ng = parts.iter().any(|&p| self.needs(p));
        Ok(self.push(Op::Concat { parts: parts.to_vec() }, y, ng))
    }

    fn binary(&mut self, a: Var, b: Var, f: impl Fn(R, R) -> R, op: Op<R>) -> Result<Var> {
        self.same_shape(a, b)?;
        let (va, vb) = (self.value(a), self.value(b));
        let data = va.data().iter().zip(vb.data()).map(|(&x, &y)| f(x, y)).collect();
        let (c, h, w) = va.shape();
        let y = Tensor3::new(c, h, w, data)?;
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(op, y, ng))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, |x, y| x / y, Op::Div(a, b))
    }

    /// `scale * x + shift`.
    pub fn affine(&mut self, x: Var, scale: f64, shift: f64) -> Var {
        let (s, t) = (R::of(scale), R::of(shift));
        let y = self.value(x).map(|v| s * v + t);
        let ng = self.needs(x);
        self.push(Op::Affine { x, scale: s }, y, ng)
    }

    /// Add a `1×1×1` node to every element of `x`.
    pub fn add_scalar(&mut self, x: Var, s: Var) -> Result<Var> {
        if self.value(s).shape() != (1, 1, 1) {
            return Err(contract("add_scalar needs a 1x1x1 operand"));
        }
        let sv = self.scalar(s);
        let y = self.value(x).map(|v| v + sv);
        let ng = self.needs(x) || self.needs(s);
        Ok(self.push(Op::AddScalar { x, s }, y, ng))
    }

    /// Affine head over all elements of `x`: `Σ w·x + b`, parameters `<name>.weight` (len n) and `<name>.bias` (len 1).
    pub fn linear(&mut self, x: Var, set: usize, name: &str) -> Result<Var> {
        let n = self.value(x).data().len();
        let w = self.param(set, &format!("{name}.weight"), &[n])?;
        let b = self.param(set, &format!("{name}.bias"), &[1])?;
        let acc: f64 =
            self.value(x).data().iter().zip(self.param_values(w)).map(|(a, b)| a.f64() * b.f64()).sum::<f64>()
                + self.param_values(b)[0].f64();
        Ok(self.push(Op::Linear { x, w, b }, Tensor3::filled(1, 1, 1, R::of(acc)), true))
    }

    /// Bicubic resampling of every channel to `oh×ow`.
    pub fn resample(&mut self, x: Var, oh: usize, ow: usize) -> Var {
        let (c, h, w) = self.value(x).shape();
        let ty = Arc::new(AxisTaps::new(h, oh));
        let tx = Arc::new(AxisTaps::new(w, ow));
        let mut data = Vec::with_capacity(c * oh * ow);
        for ch in 0..c {
            data.extend(resample_plane(self.value(x).channel(ch), w, &ty, &tx));
        }
        let y = Tensor3::new(c, oh, ow, data).expect("resampled plane sizes");
        let ng = self.needs(x);
        self.push(Op::Resample { x, ty, tx }, y, ng)
    }

    /// Softmax across channels at every pixel.
    pub fn channel_softmax(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let (c, h, w) = xv.shape();
        let n = h * w;
        let mut y = Tensor3::zeros(c, h, w);
        let out = y.data_mut();
        for p in 0..n {
            let m = (0..c).map(|ch| xv.data()[ch * n + p]).fold(R::neg_infinity(), R::max);
            let mut sum = 0.0f64;
            for ch in 0..c {
                let e = (xv.data()[ch * n + p] - m).exp();
                out[ch * n + p] = e;
                sum += e.f64();
            }
            let inv = R::of(1.0 / sum);
            for ch in 0..c {
                out[ch * n + p] = out[ch * n + p] * inv;
            }
        }
        let ng = self.needs(x);
        self.push(Op::ChannelSoftmax { x }, y, ng)
    }

    /// Per-pixel kernel fusion: `out[p] = Σ_f Σ_t weights[f·k²+t, p] · frames[f, p + tap_t]`,
    /// taps outside the frame read the nearest edge sample.
    pub fn local_fuse(&mut self, weights: Var, frames: Var, k: usize) -> Result<Var> {
        let (wv, fv) = (self.value(weights), self.value(frames));
        let (nf, h, w) = fv.shape();
        if k % 2 == 0 || wv.shape() != (nf * k * k, h, w) {
            return Err(contract(format!("local_fuse: weights {:?} do not match {nf} frames with k={k}", wv.shape())));
        }
        let r = (k / 2) as isize;
        let n = h * w;
        let mut out = vec![0.0f64; n];
        for f in 0..nf {
            let plane = fv.channel(f);
            for ty in 0..k {
                for tx in 0..k {
                    let wp = wv.channel(f * k * k + ty * k + tx);
                    let (dy, dx) = (ty as isize - r, tx as isize - r);
                    for y in 0..h {
                        let sy = clamp_index(y, dy, h);
                        for x in 0..w {
                            let sx = clamp_index(x, dx, w);
                            out[y * w + x] += wp[y * w + x].f64() * plane[sy * w + sx].f64();
                        }
                    }
                }
            }
        }
        let y = Tensor3::new(1, h, w, out.into_iter().map(R::of).collect())?;
        let ng = self.needs(weights) || self.needs(frames);
        Ok(self.push(Op::LocalFuse { weights, frames, k }, y, ng))
    }

    /// Content moved by an integer shift: `out[p] = x[p - (dy, dx)]`, edges clamped.
    pub fn shift(&mut self, x: Var, dy: i32, dx: i32) -> Var {
        let xv = self.value(x);
        let (c, h, w) = xv.shape();
        let mut out = Vec::with_capacity(xv.data().len());
        for ch in 0..c {
            let plane = xv.channel(ch);
            for y in 0..h {
                let sy = clamp_index(y, -(dy as isize), h);
                for xx in 0..w {
                    out.push(plane[sy * w + clamp_index(xx, -(dx as isize), w)]);
                }
            }
        }
        let y = Tensor3::new(c, h, w, out).expect("same shape as input");
        let ng = self.needs(x);
        self.push(Op::Shift { x, dy, dx }, y, ng)
    }

    /// Mean absolute error against a constant target.
    pub fn mae(&mut self, x: Var, target: Var) -> Result<Var> {
        self.same_shape(x, target)?;
        let v: f64 = self
            .value(x)
            .data()
            .iter()
            .zip(self.value(target).data())
            .map(|(a, b)| (a.f64() - b.f64()).abs())
            .sum::<f64>()
            / self.value(x).data().len() as f64;
        let ng = self.needs(x);
        Ok(self.push(Op::Mae { x, target }, Tensor3::filled(1, 1, 1, R::of(v)), ng))
    }

    /// SSIM dissimilarity `(1 - mean SSIM) / 2` of single-channel maps.
    pub fn ssim_loss(&mut self, x: Var, target: Var, params: SsimParams) -> Result<Var> {
        self.same_shape(x, target)?;
        let (c, h, w) = self.value(x).shape();
        if c != 1 {
            return Err(contract("ssim_loss expects single-channel maps"));
        }
        let a: Vec<f64> = self.value(x).data().iter().map(|v| v.f64()).collect();
        let b: Vec<f64> = self.value(target).data().iter().map(|v| v.f64()).collect();
        let (s, _) = ssim_and_grad(&a, &b, h, w, &params, false)?;
        let ng = self.needs(x);
        Ok(self.push(Op::SsimLoss { x, target, params }, Tensor3::filled(1, 1, 1, R::of((1.0 - s) / 2.0)), ng))
    }

    /// Gradients of the scalar `loss` w.r.t. every parameter of every set.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.value(loss).shape() != (1, 1, 1) {
            return Err(contract("backward needs a scalar loss"));
        }
        let mut params = Gradients::zeros(&self.sets);
        let mut grads: Vec<Option<Vec<R>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![R::one()]);

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            let mut send = |v: Var, d: Vec<R>| {
                if !self.nodes[v.0].needs_grad {
                    return;
                }
                match &mut grads[v.0] {
                    Some(acc) => acc.iter_mut().zip(d).for_each(|(a, b)| *a = *a + b),
                    slot => *slot = Some(d),
                }
            };
            match &node.op {
                Op::Leaf => {}
                Op::Conv { x, w, b, geom } => {
                    let xv = self.value(*x);
                    let (oc, oh, ow) = node.value.shape();
                    let gy = Tensor3::new(oc, oh, ow, g)?;
                    let (dw, db) = conv_backward_params(xv, &gy, *geom);
                    add_to(&mut params.sets[w.set][w.index], &dw);
                    add_to(&mut params.sets[b.set][b.index], &db);
                    if self.needs(*x) {
                        let dx = conv_backward_input(&gy, self.param_values(*w), *geom);
                        send(*x, dx.into_data());
                    }
                }
                Op::LeakyRelu { x, slope } => {
                    let d = self
                        .value(*x)
                        .data()
                        .iter()
                        .zip(&g)
                        .map(|(&v, &gi)| if v >= R::zero() { gi } else { *slope * gi })
                        .collect();
                    send(*x, d);
                }
                Op::Softplus { x } => {
                    let d = self.value(*x).data().iter().zip(&g).map(|(&v, &gi)| gi * ops::sigmoid(v)).collect();
                    send(*x, d);
                }
                Op::PixelShuffle { x, s } => {
                    let (c, h, w) = node.value.shape();
                    let gy = Tensor3::new(c, h, w, g)?;
                    send(*x, pixel_unshuffle(&gy, *s).into_data());
                }
                Op::Concat { parts } => {
                    let mut off = 0;
                    for p in parts {
                        let n = self.value(*p).data().len();
                        send(*p, g[off..off + n].to_vec());
                        off += n;
                    }
                }
                Op::Add(a, b) => {
                    send(*a, g.clone());
                    send(*b, g);
                }
                Op::Sub(a, b) => {
                    send(*b, g.iter().map(|&v| -v).collect());
                    send(*a, g);
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (self.value(*a).data(), self.value(*b).data());
                    send(*a, g.iter().zip(vb).map(|(&gi, &y)| gi * y).collect());
                    send(*b, g.iter().zip(va).map(|(&gi, &x)| gi * x).collect());
                }
                Op::Div(a, b) => {
                    let (va, vb) = (self.value(*a).data(), self.value(*b).data());
                    send(*a, g.iter().zip(vb).map(|(&gi, &y)| gi / y).collect());
                    send(*b, g.iter().zip(va.iter().zip(vb)).map(|(&gi, (&x, &y))| -gi * x / (y * y)).collect());
                }
                Op::Affine { x, scale } => {
                    send(*x, g.iter().map(|&v| v * *scale).collect());
                }
                Op::AddScalar { x, s } => {
                    let total: f64 = g.iter().map(|v| v.f64()).sum();
                    send(*s, vec![R::of(total)]);
                    send(*x, g);
                }
                Op::Linear { x, w, b } => {
                    let gs = g[0];
                    let xv = self.value(*x).data();
                    let dw: Vec<f64> = xv.iter().map(|v| v.f64() * gs.f64()).collect();
                    add_to(&mut params.sets[w.set][w.index], &dw);
                    add_to(&mut params.sets[b.set][b.index], &[gs.f64()]);
                    if self.needs(*x) {
                        send(*x, self.param_values(*w).iter().map(|&wv| wv * gs).collect());
                    }
                }
                Op::Resample { x, ty, tx } => {
                    let (c, oh, ow) = node.value.shape();
                    let w_in = self.value(*x).width();
                    let mut d = Vec::with_capacity(self.value(*x).data().len());
                    for ch in 0..c {
                        d.extend(resample_plane_adjoint(&g[ch * oh * ow..(ch + 1) * oh * ow], w_in, ty, tx));
                    }
                    send(*x, d);
                }
                Op::ChannelSoftmax { x } => {
                    let (c, h, w) = node.value.shape();
                    let n = h * w;
                    let y = node.value.data();
                    let mut d = vec![R::zero(); c * n];
                    for p in 0..n {
                        let dot: f64 = (0..c).map(|ch| g[ch * n + p].f64() * y[ch * n + p].f64()).sum();
                        for ch in 0..c {
                            d[ch * n + p] = R::of(y[ch * n + p].f64() * (g[ch * n + p].f64() - dot));
                        }
                    }
                    send(*x, d);
                }
                Op::LocalFuse { weights, frames, k } => {
                    let (wv, fv) = (self.value(*weights), self.value(*frames));
                    let (nf, h, w) = fv.shape();
                    let r = (*k / 2) as isize;
                    let n = h * w;
                    let mut dw = vec![R::zero(); wv.data().len()];
                    let mut df = vec![0.0f64; fv.data().len()];
                    for f in 0..nf {
                        let plane = fv.channel(f);
                        for ty in 0..*k {
                            for tx in 0..*k {
                                let c = f * k * k + ty * k + tx;
                                let wp = wv.channel(c);
                                let (dy, dx) = (ty as isize - r, tx as isize - r);
                                for y in 0..h {
                                    let sy = clamp_index(y, dy, h);
                                    for x in 0..w {
                                        let sx = clamp_index(x, dx, w);
                                        let p = y * w + x;
                                        let q = sy * w + sx;
                                        dw[c * n + p] = g[p] * plane[q];
                                        df[f * n + q] += g[p].f64() * wp[p].f64();
                                    }
                                }
                            }
                        }
                    }
                    send(*weights, dw);
                    send(*frames, df.into_iter().map(R::of).collect());
                }
                Op::Shift { x, dy, dx } => {
                    let (c, h, w) = node.value.shape();
                    let mut d = vec![R::zero(); c * h * w];
                    for ch in 0..c {
                        for y in 0..h {
                            let sy = clamp_index(y, -(*dy as isize), h);
                            for xx in 0..w {
                                let q = ch * h * w + sy * w + clamp_index(xx, -(*dx as isize), w);
                                d[q] = d[q] + g[ch * h * w + y * w + xx];
                            }
                        }
                    }
                    send(*x, d);
                }
                Op::Mae { x, target } => {
                    let n = self.value(*x).data().len() as f64;
                    let gs = g[0].f64() / n;
                    let d = self
                        .value(*x)
                        .data()
                        .iter()
                        .zip(self.value(*target).data())
                        .map(|(&a, &b)| {
                            let diff = a - b;
                            R::of(if diff > R::zero() {
                                gs
                            } else if diff < R::zero() {
                                -gs
                            } else {
                                0.0
                            })
                        })
                        .collect();
                    send(*x, d);
                }
                Op::SsimLoss { x, target, params: p } => {
                    let (_, h, w) = self.value(*x).shape();
                    let a: Vec<f64> = self.value(*x).data().iter().map(|v| v.f64()).collect();
                    let b: Vec<f64> = self.value(*target).data().iter().map(|v| v.f64()).collect();
                    let (_, ds) = ssim_and_grad(&a, &b, h, w, p, true)?;
                    let scale = -0.5 * g[0].f64();
                    send(*x, ds.expect("gradient requested").into_iter().map(|v| R::of(v * scale)).collect());
                }
            }
        }
        Ok(params)
    }
}

fn add_to(acc: &mut [f64], d: &[f64]) {
    for (a, b) in acc.iter_mut().zip(d) {
        *a += b;
    }
}
