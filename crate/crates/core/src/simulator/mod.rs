//! Raw frame synthesis from temperature maps.
//!
//! Camera model: `L = G(T_amb, r) · T + D(T_amb, r) + noise`, where the gain
//! and offset are cubic polynomials in the ambient temperature scaled by a
//! shared radial profile, `r` being the distance from the frame center with
//! each axis normalized by its half extent (corners sit at `√2`).

mod burst;
mod params;

pub use burst::{synth_burst, Burst, Motion, MotionConfig};
pub use params::{AmbientTemperature, CameraParams, AMBIENT_RANGE, MAX_RADIUS};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{contract, Error, Result};
use crate::grid::{GrayFrame, Grid2D, Unit};

/// ChaCha words reserved per pixel of the noise stream.
const WORDS_PER_PIXEL: u128 = 32;

/// Normalized radius of every pixel, row-major.
pub fn radius_map(height: usize, width: usize) -> Vec<f64> {
    let half = |n: usize| if n > 1 { (n - 1) as f64 / 2.0 } else { 1.0 };
    let (hy, hx) = (half(height), half(width));
    let (cy, cx) = ((height as f64 - 1.0) / 2.0, (width as f64 - 1.0) / 2.0);
    let mut out = Vec::with_capacity(height * width);
    for y in 0..height {
        let dy = (y as f64 - cy) / hy;
        for x in 0..width {
            let dx = (x as f64 - cx) / hx;
            out.push((dy * dy + dx * dx).sqrt());
        }
    }
    out
}

fn profile_scaled(params: &CameraParams, base: f64, height: usize, width: usize) -> Vec<f64> {
    radius_map(height, width).into_iter().map(|r| base * params.radial(r)).collect()
}

fn check_dims(height: usize, width: usize) -> Result<()> {
    if height == 0 || width == 0 {
        return Err(contract(format!("map dims must be >= 1x1, got {height}x{width}")));
    }
    Ok(())
}

fn gain_values(params: &CameraParams, t_amb: AmbientTemperature, height: usize, width: usize) -> Result<Vec<f64>> {
    check_dims(height, width)?;
    let g = profile_scaled(params, params.gain(t_amb.value()), height, width);
    if let Some(bad) = g.iter().find(|v| !(**v > 0.0)) {
        return Err(Error::Params(format!("evaluated gain {bad} is not positive")));
    }
    Ok(g)
}

fn offset_values(params: &CameraParams, t_amb: AmbientTemperature, height: usize, width: usize) -> Result<Vec<f64>> {
    check_dims(height, width)?;
    Ok(profile_scaled(params, params.offset(t_amb.value()), height, width))
}

/// Per-pixel gain `G`, gray levels per °C.
pub fn gain_map(params: &CameraParams, t_amb: AmbientTemperature, height: usize, width: usize) -> Result<Grid2D> {
    let g = gain_values(params, t_amb, height, width)?;
    Grid2D::new(height, width, g.into_iter().map(|v| v as f32).collect(), Unit::Dimensionless)
}

/// Per-pixel offset `D`, gray levels.
pub fn offset_map(params: &CameraParams, t_amb: AmbientTemperature, height: usize, width: usize) -> Result<Grid2D> {
    let d = offset_values(params, t_amb, height, width)?;
    Grid2D::new(height, width, d.into_iter().map(|v| v as f32).collect(), Unit::GrayLevel)
}

/// A simulated frame plus how many pixels hit the gray-level limits.
#[derive(Clone, Debug, PartialEq)]
pub struct Simulated {
    pub frame: GrayFrame,
    pub clamped: usize,
}

impl Simulated {
    /// More than 1% of the pixels were clamped.
    pub fn saturated(&self) -> bool {
        self.clamped * 100 > self.frame.levels().len()
    }
}

/// Raw frame of `true_map` (°C). `frame_index` keys the noise stream together
/// with `params.seed`, so different indices give independent noise.
pub fn simulate_frame(
    true_map: &Grid2D,
    t_amb: AmbientTemperature,
    params: &CameraParams,
    frame_index: u64,
) -> Result<Simulated> {
    params.validate()?;
    if !true_map.all_finite() {
        return Err(contract("temperature map has non-finite values"));
    }
    let (h, w) = true_map.dims();
    let g = gain_values(params, t_amb, h, w)?;
    let d = offset_values(params, t_amb, h, w)?;
    let top = params.max_level();
    let sigma = params.noise_sigma;
    let mut base = ChaCha8Rng::seed_from_u64(params.seed);
    base.set_stream(frame_index);

    let rows: Vec<(Vec<u16>, usize)> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut rng = base.clone();
            let mut row = Vec::with_capacity(w);
            let mut clamped = 0;
            for x in 0..w {
                let i = y * w + x;
                let mut v = g[i] * true_map.values()[i] as f64 + d[i];
                if sigma > 0.0 {
                    rng.set_word_pos(i as u128 * WORDS_PER_PIXEL);
                    let e: f64 = rng.sample(StandardNormal);
                    v += sigma * e;
                }
                let q = v.round();
                if q < 0.0 || q > top {
                    clamped += 1;
                }
                row.push(q.clamp(0.0, top) as u16);
            }
            (row, clamped)
        })
        .collect();

    let clamped = rows.iter().map(|r| r.1).sum();
    let levels = rows.into_iter().flat_map(|r| r.0).collect();
    let frame = GrayFrame::new(h, w, levels, Some(t_amb.value() as f32))?;
    let out = Simulated { frame, clamped };
    if out.saturated() {
        log::warn!("frame {frame_index}: {clamped} of {} pixels clamped", h * w);
    }
    Ok(out)
}

/// Exact inverse of the noise-free model: `(L - D) / G`.
pub fn invert_ideal(frame: &GrayFrame, t_amb: AmbientTemperature, params: &CameraParams) -> Result<Grid2D> {
    params.validate()?;
    let (h, w) = frame.dims();
    let g = gain_values(params, t_amb, h, w)?;
    let d = offset_values(params, t_amb, h, w)?;
    let values = frame.levels().iter().zip(g.iter().zip(&d)).map(|(&l, (g, d))| ((l as f64 - d) / g) as f32).collect();
    Grid2D::new(h, w, values, Unit::Celsius)
}

/// One-point correction: subtract the reference's deviation from its mean.
pub fn flat_field_correct(frame: &GrayFrame, reference: &GrayFrame) -> Result<GrayFrame> {
    if frame.dims() != reference.dims() {
        return Err(contract(format!("frame {:?} and reference {:?} differ", frame.dims(), reference.dims())));
    }
    let m = reference.mean();
    let levels = frame
        .levels()
        .iter()
        .zip(reference.levels())
        .map(|(&f, &r)| (f as f64 - (r as f64 - m)).round().clamp(0.0, u16::MAX as f64) as u16)
        .collect();
    GrayFrame::new(frame.height(), frame.width(), levels, frame.t_amb())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn amb(t: f64) -> AmbientTemperature {
        AmbientTemperature::new(t).unwrap()
    }

    #[test]
    fn maps_follow_the_examples() {
        let p = CameraParams::identity();
        let g = gain_map(&p, amb(20.0), 5, 5).unwrap();
        assert!(g.values().iter().all(|&v| v == 1.0));
        let p = CameraParams { gain_poly: vec![2.0], radial_profile: vec![1.0, 0.0, -0.1], ..CameraParams::identity() };
        let g = gain_map(&p, amb(20.0), 5, 5).unwrap();
        assert_eq!(g.get(2, 2), 2.0);
        assert!((g.get(0, 0) - 1.6).abs() < 1e-6);
        assert!((g.get(4, 4) - 1.6).abs() < 1e-6);
        let d =
            offset_map(&CameraParams { offset_poly: vec![100.0], ..CameraParams::identity() }, amb(0.0), 3, 4).unwrap();
        assert!(d.values().iter().all(|&v| v == 100.0));
        assert!(offset_map(&CameraParams::identity(), amb(0.0), 3, 4).unwrap().values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn negative_gain_is_rejected() {
        let p = CameraParams { gain_poly: vec![1.0], radial_profile: vec![1.0, 0.0, -1.0], ..CameraParams::identity() };
        assert!(matches!(gain_map(&p, amb(10.0), 8, 8), Err(Error::Params(_))));
    }

    #[test]
    fn affine_camera() {
        let t = Grid2D::filled(4, 6, 25.0, Unit::Celsius);
        let p = CameraParams { gain_poly: vec![2.0], offset_poly: vec![100.0], ..CameraParams::identity() };
        let s = simulate_frame(&t, amb(10.0), &p, 0).unwrap();
        assert!(s.frame.levels().iter().all(|&v| v == 150));
        assert_eq!(s.frame.t_amb(), Some(10.0));
        let back = invert_ideal(&s.frame, amb(10.0), &p).unwrap();
        assert!(back.values().iter().all(|&v| v == 25.0));
    }

    #[test]
    fn saturation_is_reported() {
        let t = Grid2D::filled(4, 4, 30.0, Unit::Celsius);
        let p = CameraParams { gain_poly: vec![1000.0], ..CameraParams::identity() };
        let s = simulate_frame(&t, amb(10.0), &p, 0).unwrap();
        assert!(s.saturated());
        assert!(s.frame.levels().iter().all(|&v| v == 16383));
    }

    #[test]
    fn noise_is_keyed_by_seed_and_index() {
        let t = Grid2D::filled(8, 8, 30.0, Unit::Celsius);
        let p = CameraParams { offset_poly: vec![1000.0], noise_sigma: 5.0, seed: 3, ..CameraParams::identity() };
        let a = simulate_frame(&t, amb(10.0), &p, 0).unwrap().frame;
        assert_eq!(a, simulate_frame(&t, amb(10.0), &p, 0).unwrap().frame);
        assert_ne!(a, simulate_frame(&t, amb(10.0), &p, 1).unwrap().frame);
        let q = CameraParams { seed: 4, ..p.clone() };
        assert_ne!(a, simulate_frame(&t, amb(10.0), &q, 0).unwrap().frame);
        let mean = a.mean();
        assert!((mean - 1030.0).abs() < 2.0, "{mean}");
    }

    #[test]
    fn flat_field() {
        let f = GrayFrame::new(2, 2, vec![10, 20, 30, 40], None).unwrap();
        let uniform = GrayFrame::new(2, 2, vec![7; 4], None).unwrap();
        assert_eq!(flat_field_correct(&f, &uniform).unwrap(), f);
        let flat = flat_field_correct(&f, &f).unwrap();
        assert!(flat.levels().iter().all(|&v| v == 25));
    }
}
