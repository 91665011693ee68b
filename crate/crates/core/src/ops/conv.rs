//! Stride-1 zero-padded 2-D convolution.
//!
//! Rows of the output are cut into fixed-size bands; each band is lowered to
//! an im2col matrix and multiplied with `dgemm`. All reductions accumulate in
//! `f64`. Band boundaries depend only on the output width, so results are
//! bit-identical for any thread count.

use rayon::prelude::*;

use crate::error::{contract, Error, Result};
use crate::tensor::{Real, Tensor3};

const BAND_COLUMNS: usize = 2048;

/// Convolution weights `[out][in][kh][kw]` plus one bias per output channel.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvKernel<R = f32> {
    out_channels: usize,
    in_channels: usize,
    kernel_height: usize,
    kernel_width: usize,
    weights: Vec<R>,
    bias: Vec<R>,
    padding: usize,
}

impl<R: Real> ConvKernel<R> {
    pub fn new(
        out_channels: usize,
        in_channels: usize,
        kernel_height: usize,
        kernel_width: usize,
        weights: Vec<R>,
        bias: Vec<R>,
        padding: usize,
    ) -> Result<Self> {
        if out_channels == 0 || in_channels == 0 || kernel_height == 0 || kernel_width == 0 {
            return Err(Error::Params("convolution dims must be >= 1".into()));
        }
        if weights.len() != out_channels * in_channels * kernel_height * kernel_width {
            return Err(Error::Params(format!(
                "{} weights for a {out_channels}x{in_channels}x{kernel_height}x{kernel_width} kernel",
                weights.len()
            )));
        }
        if bias.len() != out_channels {
            return Err(Error::Params(format!("{} biases for {out_channels} outputs", bias.len())));
        }
        if !weights.iter().chain(&bias).all(|v| v.is_finite()) {
            return Err(Error::Params("non-finite convolution weights".into()));
        }
        if padding >= kernel_height || padding >= kernel_width {
            return Err(Error::Params(format!("padding {padding} must be smaller than the kernel")));
        }
        Ok(Self { out_channels, in_channels, kernel_height, kernel_width, weights, bias, padding })
    }

    /// Square odd kernel with "same" padding.
    pub fn same(out_channels: usize, in_channels: usize, k: usize, weights: Vec<R>, bias: Vec<R>) -> Result<Self> {
        if k % 2 == 0 {
            return Err(Error::Params(format!("same-size convolution needs an odd kernel, got {k}")));
        }
        Self::new(out_channels, in_channels, k, k, weights, bias, (k - 1) / 2)
    }

    pub fn zeros(out_channels: usize, in_channels: usize, k: usize) -> Self {
        Self::same(
            out_channels,
            in_channels,
            k,
            vec![R::zero(); out_channels * in_channels * k * k],
            vec![R::zero(); out_channels],
        )
        .expect("zero kernel is admissible")
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn weights(&self) -> &[R] {
        &self.weights
    }

    pub fn bias(&self) -> &[R] {
        &self.bias
    }

    pub(crate) fn geom(&self) -> ConvGeom {
        ConvGeom {
            out_channels: self.out_channels,
            in_channels: self.in_channels,
            kh: self.kernel_height,
            kw: self.kernel_width,
            pad_y: self.padding,
            pad_x: self.padding,
        }
    }
}

/// Convolve `input` with `kernel`.
pub fn conv2d<R: Real>(input: &Tensor3<R>, kernel: &ConvKernel<R>) -> Result<Tensor3<R>> {
    let geom = kernel.geom();
    geom.check_input(input)?;
    Ok(conv_forward(input, &kernel.weights, Some(&kernel.bias), geom))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct ConvGeom {
    pub out_channels: usize,
    pub in_channels: usize,
    pub kh: usize,
    pub kw: usize,
    pub pad_y: usize,
    pub pad_x: usize,
}

impl ConvGeom {
    pub fn same(out_channels: usize, in_channels: usize, k: usize) -> Self {
        Self { out_channels, in_channels, kh: k, kw: k, pad_y: (k - 1) / 2, pad_x: (k - 1) / 2 }
    }

    pub fn weight_len(&self) -> usize {
        self.out_channels * self.in_channels * self.kh * self.kw
    }

    fn col_rows(&self) -> usize {
        self.in_channels * self.kh * self.kw
    }

    pub fn check_input<R: Real>(&self, input: &Tensor3<R>) -> Result<()> {
        if input.channels() != self.in_channels {
            return Err(contract(format!(
                "conv expects {} input channels, got {}",
                self.in_channels,
                input.channels()
            )));
        }
        if input.height() + 2 * self.pad_y < self.kh || input.width() + 2 * self.pad_x < self.kw {
            return Err(contract("input smaller than kernel"));
        }
        Ok(())
    }

    pub fn out_dims(&self, h: usize, w: usize) -> (usize, usize) {
        (h + 2 * self.pad_y + 1 - self.kh, w + 2 * self.pad_x + 1 - self.kw)
    }

    /// Geometry of the convolution computing the input gradient.
    fn transposed(&self) -> Self {
        Self {
            out_channels: self.in_channels,
            in_channels: self.out_channels,
            kh: self.kh,
            kw: self.kw,
            pad_y: self.kh - 1 - self.pad_y,
            pad_x: self.kw - 1 - self.pad_x,
        }
    }
}

fn bands(oh: usize, ow: usize) -> Vec<(usize, usize)> {
    let rows = (BAND_COLUMNS / ow.max(1)).max(1);
    (0..oh).step_by(rows).map(|y0| (y0, (y0 + rows).min(oh))).collect()
}

/// im2col of output rows `y0..y1` into a `K × n` matrix.
fn im2col<R: Real>(x: &Tensor3<R>, g: &ConvGeom, ow: usize, y0: usize, y1: usize, col: &mut Vec<f64>) {
    let (h, w) = (x.height() as isize, x.width() as isize);
    let n = (y1 - y0) * ow;
    col.clear();
    col.resize(g.col_rows() * n, 0.0);
    let mut row = 0;
    for ci in 0..g.in_channels {
        let plane = x.channel(ci);
        for ky in 0..g.kh {
            for kx in 0..g.kw {
                let dst = &mut col[row * n..(row + 1) * n];
                let dx = kx as isize - g.pad_x as isize;
                // valid output x range: 0 <= x + dx < w
                let x_lo = (-dx).max(0).min(ow as isize) as usize;
                let x_hi = (w - dx).clamp(0, ow as isize) as usize;
                for (r, y) in (y0..y1).enumerate() {
                    let iy = y as isize + ky as isize - g.pad_y as isize;
                    if iy < 0 || iy >= h || x_lo >= x_hi {
                        continue;
                    }
                    let src_row = &plane[iy as usize * w as usize..(iy as usize + 1) * w as usize];
                    let d = &mut dst[r * ow..(r + 1) * ow];
                    let src = &src_row[(x_lo as isize + dx) as usize..(x_hi as isize + dx) as usize];
                    for (o, s) in d[x_lo..x_hi].iter_mut().zip(src) {
                        *o = s.f64();
                    }
                }
                row += 1;
            }
        }
    }
}

fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    rsa: usize,
    csa: usize,
    b: &[f64],
    rsb: usize,
    csb: usize,
    c: &mut [f64],
) {
    debug_assert!(c.len() >= m * n);
    // SAFETY: strides describe in-bounds views of `a`, `b` and `c`, checked by
    // the callers' construction of these buffers.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            0.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

pub(crate) fn conv_forward<R: Real>(x: &Tensor3<R>, weights: &[R], bias: Option<&[R]>, g: ConvGeom) -> Tensor3<R> {
    debug_assert_eq!(weights.len(), g.weight_len());
    let (oh, ow) = g.out_dims(x.height(), x.width());
    let k = g.col_rows();
    let w64: Vec<f64> = weights.iter().map(|v| v.f64()).collect();
    let band_out: Vec<(usize, usize, Vec<f64>)> = bands(oh, ow)
        .into_par_iter()
        .map_init(Vec::new, |col, (y0, y1)| {
            im2col(x, &g, ow, y0, y1, col);
            let n = (y1 - y0) * ow;
            let mut out = vec![0.0; g.out_channels * n];
            gemm(g.out_channels, k, n, &w64, k, 1, col, n, 1, &mut out);
            (y0, y1, out)
        })
        .collect();

    let mut y = Tensor3::zeros(g.out_channels, oh, ow);
    for (y0, y1, out) in band_out {
        let n = (y1 - y0) * ow;
        for o in 0..g.out_channels {
            let b = bias.map_or(0.0, |b| b[o].f64());
            let dst = &mut y.channel_mut(o)[y0 * ow..y1 * ow];
            for (d, s) in dst.iter_mut().zip(&out[o * n..(o + 1) * n]) {
                *d = R::of(s + b);
            }
        }
    }
    y
}

/// Gradient w.r.t. the input: a full convolution with the flipped, transposed kernel.
pub(crate) fn conv_backward_input<R: Real>(dy: &Tensor3<R>, weights: &[R], g: ConvGeom) -> Tensor3<R> {
    let t = g.transposed();
    let mut flipped = vec![R::zero(); weights.len()];
    for o in 0..g.out_channels {
        for i in 0..g.in_channels {
            for ky in 0..g.kh {
                for kx in 0..g.kw {
                    let src = ((o * g.in_channels + i) * g.kh + ky) * g.kw + kx;
                    let dst = ((i * g.out_channels + o) * g.kh + (g.kh - 1 - ky)) * g.kw + (g.kw - 1 - kx);
                    flipped[dst] = weights[src];
                }
            }
        }
    }
    conv_forward(dy, &flipped, None, t)
}

/// Gradients w.r.t. weights and bias, accumulated in `f64`.
pub(crate) fn conv_backward_params<R: Real>(x: &Tensor3<R>, dy: &Tensor3<R>, g: ConvGeom) -> (Vec<f64>, Vec<f64>) {
    let (oh, ow) = (dy.height(), dy.width());
    let k = g.col_rows();
    let partials: Vec<Vec<f64>> = bands(oh, ow)
        .into_par_iter()
        .map_init(Vec::new, |col, (y0, y1)| {
            im2col(x, &g, ow, y0, y1, col);
            let n = (y1 - y0) * ow;
            let mut dyb = Vec::with_capacity(g.out_channels * n);
            for o in 0..g.out_channels {
                dyb.extend(dy.channel(o)[y0 * ow..y1 * ow].iter().map(|v| v.f64()));
            }
            let mut dw = vec![0.0; g.out_channels * k];
            // dW[oc x K] = dY[oc x n] * col^T[n x K]
            gemm(g.out_channels, n, k, &dyb, n, 1, col, 1, n, &mut dw);
            dw
        })
        .collect();
    let mut dw = vec![0.0; g.out_channels * k];
    for p in partials {
        for (a, b) in dw.iter_mut().zip(p) {
            *a += b;
        }
    }
    let db = (0..g.out_channels).map(|o| dy.channel(o).iter().map(|v| v.f64()).sum()).collect();
    (dw, db)
}
