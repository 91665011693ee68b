//! Evaluation metrics for temperature maps.

pub mod cwsi;
pub mod emd;
pub mod ssim;

pub use cwsi::{cwsi, cwsi_error, CwsiInputs};
pub use emd::{emd, emd_histograms, Histogram, TransportPlan};
pub use ssim::SsimParams;

use crate::error::{contract, Result};
use crate::grid::Grid2D;

/// Metric settings. Temperatures in °C.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsConfig {
    /// Peak value `X` used by PSNR and as the SSIM dynamic range.
    pub psnr_peak: f64,
    pub ssim_window: usize,
    pub ssim_sigma: f64,
    pub ssim_k1: f64,
    pub ssim_k2: f64,
    pub emd_bins: usize,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self { psnr_peak: 90.0, ssim_window: 11, ssim_sigma: 1.5, ssim_k1: 0.01, ssim_k2: 0.03, emd_bins: 256 }
    }
}

impl MetricsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.psnr_peak > 0.0) {
            return Err(contract("psnr peak must be > 0"));
        }
        if self.ssim_window % 2 == 0 {
            return Err(contract("ssim window must be odd"));
        }
        if self.emd_bins < 2 {
            return Err(contract("emd needs at least 2 bins"));
        }
        Ok(())
    }

    pub fn ssim_params(&self) -> SsimParams {
        SsimParams::new(self.ssim_window, self.ssim_sigma, self.ssim_k1, self.ssim_k2, self.psnr_peak)
    }
}

fn same_dims(a: &Grid2D, b: &Grid2D) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(contract(format!("dims differ: {:?} vs {:?}", a.dims(), b.dims())));
    }
    Ok(())
}

/// Mean absolute error.
pub fn mae(a: &Grid2D, b: &Grid2D) -> Result<f64> {
    same_dims(a, b)?;
    let s: f64 = a.values().iter().zip(b.values()).map(|(x, y)| (*x as f64 - *y as f64).abs()).sum();
    Ok(s / a.len() as f64)
}

/// Mean squared error.
pub fn mse(a: &Grid2D, b: &Grid2D) -> Result<f64> {
    same_dims(a, b)?;
    let s: f64 = a.values().iter().zip(b.values()).map(|(x, y)| (*x as f64 - *y as f64).powi(2)).sum();
    Ok(s / a.len() as f64)
}

/// Peak signal-to-noise ratio in dB; `+inf` for identical maps.
pub fn psnr(a: &Grid2D, b: &Grid2D, cfg: &MetricsConfig) -> Result<f64> {
    let m = mse(a, b)?;
    if m == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (cfg.psnr_peak * cfg.psnr_peak / m).log10())
}

/// Mean SSIM with the configured Gaussian window and dynamic range `X`.
pub fn ssim(a: &Grid2D, b: &Grid2D, cfg: &MetricsConfig) -> Result<f64> {
    same_dims(a, b)?;
    let x: Vec<f64> = a.values().iter().map(|&v| v as f64).collect();
    let y: Vec<f64> = b.values().iter().map(|&v| v as f64).collect();
    Ok(ssim::ssim_and_grad(&x, &y, a.height(), a.width(), &cfg.ssim_params(), false)?.0)
}

/// Format a metric for CSV output (`inf` for the infinite PSNR sentinel).
pub fn format_metric(v: f64) -> String {
    if v.is_infinite() && v > 0.0 {
        "inf".to_string()
    } else {
        format!("{v:.6}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Unit;

    fn g(h: usize, w: usize, v: &[f32]) -> Grid2D {
        Grid2D::new(h, w, v.to_vec(), Unit::Celsius).unwrap()
    }

    #[test]
    fn mae_examples() {
        let a = g(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(mae(&a, &a).unwrap(), 0.0);
        assert_eq!(mae(&a, &a.map(|v| v + 1.0)).unwrap(), 1.0);
        assert_eq!(mae(&a, &g(2, 2, &[2.0, 2.0, 3.0, 4.0])).unwrap(), 0.25);
        assert!(mae(&a, &g(1, 4, &[0.0; 4])).is_err());
    }

    #[test]
    fn psnr_examples() {
        let cfg = MetricsConfig::default();
        let a = g(2, 2, &[10.0, 20.0, 30.0, 40.0]);
        assert_eq!(psnr(&a, &a, &cfg).unwrap(), f64::INFINITY);
        assert_eq!(format_metric(psnr(&a, &a, &cfg).unwrap()), "inf");
        let b = a.map(|v| v + 9.0);
        assert!((psnr(&a, &b, &cfg).unwrap() - 20.0).abs() < 1e-9);
        let c = a.map(|v| v + 90.0);
        assert!(psnr(&a, &c, &cfg).unwrap().abs() < 1e-9);
    }

    #[test]
    fn ssim_self_and_inverted() {
        let cfg = MetricsConfig::default();
        let a = Grid2D::from_fn(16, 16, Unit::Celsius, |y, x| ((y * 16 + x) * 37 % 29) as f32);
        assert!((ssim(&a, &a, &cfg).unwrap() - 1.0).abs() < 1e-12);
        let inv = a.map(|v| 40.0 - v);
        assert!(ssim(&a, &inv, &cfg).unwrap() < 1.0);
        assert!(ssim(&g(4, 4, &[0.0; 16]), &g(4, 4, &[0.0; 16]), &cfg).is_err());
    }
}
