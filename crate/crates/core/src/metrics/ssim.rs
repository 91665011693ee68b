//! Structural similarity with a Gaussian window over valid positions only.
//!
//! Shared by the evaluation metric and by the training loss, which also needs
//! the gradient of mean SSIM with respect to the first image.

use crate::error::{contract, Result};

/// Window and stabilizing constants of one SSIM evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct SsimParams {
    pub window: usize,
    pub sigma: f64,
    /// `(k1 · X)²`
    pub c1: f64,
    /// `(k2 · X)²`
    pub c2: f64,
}

impl SsimParams {
    pub fn new(window: usize, sigma: f64, k1: f64, k2: f64, data_range: f64) -> Self {
        Self { window, sigma, c1: (k1 * data_range).powi(2), c2: (k2 * data_range).powi(2) }
    }

    /// Normalized 1-D Gaussian taps.
    pub fn taps(&self) -> Vec<f64> {
        let r = (self.window / 2) as f64;
        let raw: Vec<f64> =
            (0..self.window).map(|i| (-((i as f64 - r).powi(2)) / (2.0 * self.sigma * self.sigma)).exp()).collect();
        let s: f64 = raw.iter().sum();
        raw.into_iter().map(|v| v / s).collect()
    }
}

/// Valid-region separable filter: `(h-k+1) × (w-k+1)`.
fn filter_valid(img: &[f64], h: usize, w: usize, g: &[f64]) -> Vec<f64> {
    let k = g.len();
    let (oh, ow) = (h + 1 - k, w + 1 - k);
    let mut tmp = vec![0.0; h * ow];
    for y in 0..h {
        let row = &img[y * w..(y + 1) * w];
        for x in 0..ow {
            tmp[y * ow + x] = g.iter().zip(&row[x..x + k]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..k).map(|i| g[i] * tmp[(y + i) * ow + x]).sum();
        }
    }
    out
}

/// Adjoint of [`filter_valid`].
fn filter_valid_adjoint(field: &[f64], h: usize, w: usize, g: &[f64]) -> Vec<f64> {
    let k = g.len();
    let (oh, ow) = (h + 1 - k, w + 1 - k);
    let mut tmp = vec![0.0; h * ow];
    for y in 0..oh {
        for x in 0..ow {
            let f = field[y * ow + x];
            for i in 0..k {
                tmp[(y + i) * ow + x] += g[i] * f;
            }
        }
    }
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..ow {
            let t = tmp[y * ow + x];
            for j in 0..k {
                out[y * w + x + j] += g[j] * t;
            }
        }
    }
    out
}

struct LocalStats {
    mu_a: Vec<f64>,
    mu_b: Vec<f64>,
    var_a: Vec<f64>,
    var_b: Vec<f64>,
    cov: Vec<f64>,
}

fn local_stats(a: &[f64], b: &[f64], h: usize, w: usize, g: &[f64]) -> LocalStats {
    let sq_a: Vec<f64> = a.iter().map(|v| v * v).collect();
    let sq_b: Vec<f64> = b.iter().map(|v| v * v).collect();
    let ab: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    let mu_a = filter_valid(a, h, w, g);
    let mu_b = filter_valid(b, h, w, g);
    let e_aa = filter_valid(&sq_a, h, w, g);
    let e_bb = filter_valid(&sq_b, h, w, g);
    let e_ab = filter_valid(&ab, h, w, g);
    let var_a = e_aa.iter().zip(&mu_a).map(|(e, m)| e - m * m).collect();
    let var_b = e_bb.iter().zip(&mu_b).map(|(e, m)| e - m * m).collect();
    let cov = e_ab.iter().zip(mu_a.iter().zip(&mu_b)).map(|(e, (x, y))| e - x * y).collect();
    LocalStats { mu_a, mu_b, var_a, var_b, cov }
}

fn check_dims(len_a: usize, len_b: usize, h: usize, w: usize, p: &SsimParams) -> Result<()> {
    if len_a != h * w || len_b != h * w {
        return Err(contract("ssim inputs must both be h x w"));
    }
    if p.window % 2 == 0 || p.window == 0 {
        return Err(contract(format!("ssim window must be odd, got {}", p.window)));
    }
    if h < p.window || w < p.window {
        return Err(contract(format!("ssim needs at least {0}x{0} maps, got {h}x{w}", p.window)));
    }
    Ok(())
}

/// Mean SSIM of `a` against `b` and, on request, its gradient w.r.t. `a`.
pub fn ssim_and_grad(
    a: &[f64],
    b: &[f64],
    h: usize,
    w: usize,
    p: &SsimParams,
    want_grad: bool,
) -> Result<(f64, Option<Vec<f64>>)> {
    check_dims(a.len(), b.len(), h, w, p)?;
    let g = p.taps();
    let st = local_stats(a, b, h, w, &g);
    let m = st.mu_a.len();
    let mut total = 0.0;
    let (mut da_mu, mut da_sq, mut da_ab) =
        if want_grad { (vec![0.0; m], vec![0.0; m], vec![0.0; m]) } else { (Vec::new(), Vec::new(), Vec::new()) };
    for i in 0..m {
        let (mx, my) = (st.mu_a[i], st.mu_b[i]);
        let a1 = 2.0 * mx * my + p.c1;
        let a2 = 2.0 * st.cov[i] + p.c2;
        let b1 = mx * mx + my * my + p.c1;
        let b2 = st.var_a[i] + st.var_b[i] + p.c2;
        let s = (a1 * a2) / (b1 * b2);
        total += s;
        if want_grad {
            let ds_dmu = s * (2.0 * my / a1 - 2.0 * mx / b1);
            let ds_dcov = s * 2.0 / a2;
            let ds_dvar = -s / b2;
            // var_a = E[a²] - mu_a², cov = E[ab] - mu_a·mu_b
            da_sq[i] = ds_dvar;
            da_ab[i] = ds_dcov;
            da_mu[i] = ds_dmu - 2.0 * mx * ds_dvar - my * ds_dcov;
        }
    }
    let mean = total / m as f64;
    if !want_grad {
        return Ok((mean, None));
    }
    let inv = 1.0 / m as f64;
    let t_mu = filter_valid_adjoint(&da_mu, h, w, &g);
    let t_sq = filter_valid_adjoint(&da_sq, h, w, &g);
    let t_ab = filter_valid_adjoint(&da_ab, h, w, &g);
    let grad = (0..h * w).map(|q| inv * (t_mu[q] + 2.0 * a[q] * t_sq[q] + b[q] * t_ab[q])).collect();
    Ok((mean, Some(grad)))
}

/// Mean luminance term and mean contrast-structure term, reported separately.
pub fn ssim_components(a: &[f64], b: &[f64], h: usize, w: usize, p: &SsimParams) -> Result<(f64, f64)> {
    check_dims(a.len(), b.len(), h, w, p)?;
    let st = local_stats(a, b, h, w, &p.taps());
    let m = st.mu_a.len() as f64;
    let mut lum = 0.0;
    let mut cs = 0.0;
    for i in 0..st.mu_a.len() {
        let (mx, my) = (st.mu_a[i], st.mu_b[i]);
        lum += (2.0 * mx * my + p.c1) / (mx * mx + my * my + p.c1);
        cs += (2.0 * st.cov[i] + p.c2) / (st.var_a[i] + st.var_b[i] + p.c2);
    }
    Ok((lum / m, cs / m))
}
