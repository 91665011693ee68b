//! Deterministic tensor operations every network in the crate is built from.

mod conv;
mod resample;

pub use conv::{conv2d, ConvKernel};
pub(crate) use conv::{conv_backward_input, conv_backward_params, conv_forward, ConvGeom};
pub use resample::{bicubic_resample, cubic_weight, downscale_gt, resampled_len, AxisTaps};
pub(crate) use resample::{resample_plane, resample_plane_adjoint};

use crate::error::{contract, Result};
use crate::tensor::{Real, Tensor3};

/// Elementwise `x` for `x >= 0`, `slope * x` otherwise. `slope` must lie in `[0, 1)`.
pub fn leaky_relu<R: Real>(input: &Tensor3<R>, slope: R) -> Tensor3<R> {
    debug_assert!(slope >= R::zero() && slope < R::one());
    input.map(|v| if v >= R::zero() { v } else { slope * v })
}

/// `ln(1 + e^x)` without overflow.
#[inline]
pub(crate) fn softplus<R: Real>(x: R) -> R {
    if x > R::of(20.0) {
        x
    } else {
        x.exp().ln_1p()
    }
}

#[inline]
pub(crate) fn sigmoid<R: Real>(x: R) -> R {
    if x >= R::zero() {
        R::one() / (R::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (R::one() + e)
    }
}

/// Rearrange `C·s² × H × W` into `C × sH × sW`:
/// `out[c, y, x] = in[c·s² + (y mod s)·s + (x mod s), y / s, x / s]`.
pub fn pixel_shuffle<R: Real>(input: &Tensor3<R>, s: usize) -> Result<Tensor3<R>> {
    let (c, h, w) = input.shape();
    if s == 0 || c % (s * s) != 0 {
        return Err(contract(format!("{c} channels not divisible by {s}^2")));
    }
    let oc = c / (s * s);
    let (oh, ow) = (h * s, w * s);
    let mut out = Vec::with_capacity(c * h * w);
    for co in 0..oc {
        for y in 0..oh {
            for x in 0..ow {
                out.push(input.at(co * s * s + (y % s) * s + x % s, y / s, x / s));
            }
        }
    }
    Tensor3::new(oc, oh, ow, out)
}

/// Inverse of [`pixel_shuffle`].
pub(crate) fn pixel_unshuffle<R: Real>(input: &Tensor3<R>, s: usize) -> Tensor3<R> {
    let (c, h, w) = input.shape();
    debug_assert!(h % s == 0 && w % s == 0);
    let (ih, iw) = (h / s, w / s);
    let mut out = Tensor3::zeros(c * s * s, ih, iw);
    let data = out.data_mut();
    for co in 0..c {
        for y in 0..h {
            for x in 0..w {
                let ci = co * s * s + (y % s) * s + x % s;
                data[(ci * ih + y / s) * iw + x / s] = input.at(co, y, x);
            }
        }
    }
    out
}

/// Channel-wise concatenation; `a` occupies the leading channels.
pub fn concat_channels<R: Real>(a: &Tensor3<R>, b: &Tensor3<R>) -> Result<Tensor3<R>> {
    concat_all(&[a, b])
}

pub(crate) fn concat_all<R: Real>(parts: &[&Tensor3<R>]) -> Result<Tensor3<R>> {
    let first = parts.first().ok_or_else(|| contract("nothing to concatenate"))?;
    let (h, w) = (first.height(), first.width());
    if parts.iter().any(|p| p.height() != h || p.width() != w) {
        return Err(contract("concatenation needs equal spatial dims"));
    }
    let channels = parts.iter().map(|p| p.channels()).sum();
    let mut data = Vec::with_capacity(channels * h * w);
    for p in parts {
        data.extend_from_slice(p.data());
    }
    Tensor3::new(channels, h, w, data)
}
