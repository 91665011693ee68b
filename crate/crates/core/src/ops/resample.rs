//! Separable bicubic resampling (Catmull-Rom, a = -0.5) with half-pixel
//! centers and edge clamping.
//!
//! The resampler is a fixed linear map; [`AxisTaps`] stores it per axis so the
//! training graph can apply its exact adjoint.

use crate::error::{contract, Result};
use crate::grid::Grid2D;
use crate::tensor::Real;

const A: f64 = -0.5;

/// Cubic convolution kernel.
pub fn cubic_weight(t: f64) -> f64 {
    let t = t.abs();
    if t <= 1.0 {
        ((A + 2.0) * t - (A + 3.0)) * t * t + 1.0
    } else if t < 2.0 {
        ((A * t - 5.0 * A) * t + 8.0 * A) * t - 4.0 * A
    } else {
        0.0
    }
}

/// Four source indices and weights per output sample along one axis.
#[derive(Clone, Debug, PartialEq)]
pub struct AxisTaps {
    pub(crate) n_in: usize,
    pub(crate) index: Vec<[usize; 4]>,
    pub(crate) weight: Vec<[f64; 4]>,
}

impl AxisTaps {
    pub fn new(n_in: usize, n_out: usize) -> Self {
        let scale = n_in as f64 / n_out as f64;
        let last = n_in as isize - 1;
        let mut index = Vec::with_capacity(n_out);
        let mut weight = Vec::with_capacity(n_out);
        for o in 0..n_out {
            let src = (o as f64 + 0.5) * scale - 0.5;
            let base = src.floor();
            let t = src - base;
            let base = base as isize;
            index.push([0, 1, 2, 3].map(|j| (base - 1 + j as isize).clamp(0, last) as usize));
            weight.push([cubic_weight(t + 1.0), cubic_weight(t), cubic_weight(1.0 - t), cubic_weight(2.0 - t)]);
        }
        Self { n_in, index, weight }
    }

    pub fn n_out(&self) -> usize {
        self.index.len()
    }
}

/// Resample one `h×w` plane through the given taps.
pub(crate) fn resample_plane<R: Real>(src: &[R], w: usize, ty: &AxisTaps, tx: &AxisTaps) -> Vec<R> {
    let h = ty.n_in;
    debug_assert_eq!(src.len(), h * w);
    let (oh, ow) = (ty.n_out(), tx.n_out());
    // horizontal pass kept in f64
    let mut tmp = vec![0.0f64; h * ow];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        let out = &mut tmp[y * ow..(y + 1) * ow];
        for (o, (idx, wt)) in out.iter_mut().zip(tx.index.iter().zip(&tx.weight)) {
            *o = (0..4).map(|j| wt[j] * row[idx[j]].f64()).sum();
        }
    }
    let mut dst = Vec::with_capacity(oh * ow);
    for (idx, wt) in ty.index.iter().zip(&ty.weight) {
        for x in 0..ow {
            let v: f64 = (0..4).map(|j| wt[j] * tmp[idx[j] * ow + x]).sum();
            dst.push(R::of(v));
        }
    }
    dst
}

/// Transpose of [`resample_plane`]: maps an `oh×ow` gradient back to `h×w`.
pub(crate) fn resample_plane_adjoint<R: Real>(grad: &[R], w: usize, ty: &AxisTaps, tx: &AxisTaps) -> Vec<R> {
    let h = ty.n_in;
    let ow = tx.n_out();
    let mut tmp = vec![0.0f64; h * ow];
    for (oy, (idx, wt)) in ty.index.iter().zip(&ty.weight).enumerate() {
        for x in 0..ow {
            let g = grad[oy * ow + x].f64();
            for j in 0..4 {
                tmp[idx[j] * ow + x] += wt[j] * g;
            }
        }
    }
    let mut dst = vec![0.0f64; h * w];
    for y in 0..h {
        for (ox, (idx, wt)) in tx.index.iter().zip(&tx.weight).enumerate() {
            let g = tmp[y * ow + ox];
            for j in 0..4 {
                dst[y * w + idx[j]] += wt[j] * g;
            }
        }
    }
    dst.into_iter().map(R::of).collect()
}

/// Output size for a resampling factor.
pub fn resampled_len(n: usize, factor: f64) -> usize {
    (n as f64 * factor).round() as usize
}

/// Bicubic resampling of a grid by `factor` (output `round(H·factor) × round(W·factor)`).
pub fn bicubic_resample(input: &Grid2D, factor: f64) -> Result<Grid2D> {
    if !(factor > 0.0) || !factor.is_finite() {
        return Err(contract(format!("resample factor must be > 0, got {factor}")));
    }
    let (oh, ow) = (resampled_len(input.height(), factor), resampled_len(input.width(), factor));
    if oh == 0 || ow == 0 {
        return Err(contract(format!("factor {factor} collapses {}x{} to nothing", input.height(), input.width())));
    }
    let ty = AxisTaps::new(input.height(), oh);
    let tx = AxisTaps::new(input.width(), ow);
    let values = resample_plane(input.values(), input.width(), &ty, &tx);
    Grid2D::new(oh, ow, values, input.unit())
}

/// Create a low-resolution map from a high-resolution one: bicubic by `1/s`.
pub fn downscale_gt(gt: &Grid2D, s: usize) -> Result<Grid2D> {
    if s == 0 || gt.height() % s != 0 || gt.width() % s != 0 {
        return Err(contract(format!("{}x{} not divisible by {s}", gt.height(), gt.width())));
    }
    bicubic_resample(gt, 1.0 / s as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Unit;

    #[test]
    fn kernel_partition_of_unity() {
        for i in 0..=20 {
            let t = i as f64 / 20.0;
            let s = cubic_weight(t + 1.0) + cubic_weight(t) + cubic_weight(1.0 - t) + cubic_weight(2.0 - t);
            assert!((s - 1.0).abs() < 1e-14);
        }
        assert_eq!(cubic_weight(0.0), 1.0);
        assert_eq!(cubic_weight(1.0), 0.0);
        assert_eq!(cubic_weight(2.5), 0.0);
    }

    #[test]
    fn constants_are_exact() {
        let g = Grid2D::filled(7, 5, 25.0, Unit::Celsius);
        for f in [0.5, 2.0, 4.0, 1.5, 0.25] {
            if let Ok(out) = bicubic_resample(&g, f) {
                assert!(out.values().iter().all(|&v| v == 25.0), "factor {f}");
            }
        }
    }

    #[test]
    fn downscale_checks_divisibility() {
        let g = Grid2D::filled(6, 6, 30.0, Unit::Celsius);
        assert!(downscale_gt(&g, 4).is_err());
        let g = Grid2D::filled(8, 8, 30.0, Unit::Celsius);
        let d = downscale_gt(&g, 4).unwrap();
        assert_eq!(d.dims(), (2, 2));
        assert!(d.values().iter().all(|&v| v == 30.0));
        assert!(bicubic_resample(&g, 0.0).is_err());
        assert!(bicubic_resample(&g, -1.0).is_err());
    }

    #[test]
    fn adjoint_identity() {
        let ty = AxisTaps::new(5, 10);
        let tx = AxisTaps::new(4, 8);
        let x: Vec<f64> = (0..20).map(|v| ((v * 7) % 9) as f64 - 4.0).collect();
        let g: Vec<f64> = (0..80).map(|v| ((v * 5) % 11) as f64 - 5.0).collect();
        let y = resample_plane(&x, 4, &ty, &tx);
        let xa = resample_plane_adjoint(&g, 4, &ty, &tx);
        let lhs: f64 = y.iter().zip(&g).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(&xa).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-9);
    }
}
