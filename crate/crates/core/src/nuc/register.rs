//! Integer-shift registration of burst frames against frame 0.

use crate::error::{contract, Result};
use crate::grid::GrayFrame;
use crate::simulator::Burst;

#[derive(Clone, Debug, PartialEq)]
pub struct RegistrationResult {
    /// Per frame `(dy, dx)`: frame `k` at `p` shows what frame 0 shows at `p + shift`.
    pub shifts: Vec<(i32, i32)>,
    /// Smallest peak normalized correlation over frames `1..n`, clamped to `[0, 1]`.
    pub confidence: f64,
}

/// Radius of the box mean removed before correlation. Smooth sensor
/// patterns stay fixed while the scene moves, so only detail is matched.
const HIGH_PASS_RADIUS: usize = 2;

/// Frame minus its local box mean (edge clamped).
fn high_pass(f: &GrayFrame) -> Vec<f64> {
    let (h, w) = f.dims();
    let r = HIGH_PASS_RADIUS as isize;
    let at =
        |y: isize, x: isize| f.get(y.clamp(0, h as isize - 1) as usize, x.clamp(0, w as isize - 1) as usize) as f64;
    let mut out = Vec::with_capacity(h * w);
    let n = ((2 * r + 1) * (2 * r + 1)) as f64;
    for y in 0..h as isize {
        for x in 0..w as isize {
            let mut s = 0.0;
            for dy in -r..=r {
                for dx in -r..=r {
                    s += at(y + dy, x + dx);
                }
            }
            out.push(at(y, x) - s / n);
        }
    }
    out
}

/// Normalized cross-correlation of `a[p]` with `b[p + (dy, dx)]` over the overlap.
fn ncc(a: &[f64], b: &[f64], h: usize, w: usize, dy: i32, dx: i32) -> f64 {
    let (h, w) = (h as i32, w as i32);
    let (y0, y1) = (0.max(-dy), h.min(h - dy));
    let (x0, x1) = (0.max(-dx), w.min(w - dx));
    if y1 <= y0 || x1 <= x0 {
        return 0.0;
    }
    let at = |p: &[f64], y: i32, x: i32| p[(y * w + x) as usize];
    let n = ((y1 - y0) * (x1 - x0)) as f64;
    let (mut sa, mut sb) = (0.0, 0.0);
    for y in y0..y1 {
        for x in x0..x1 {
            sa += at(a, y, x);
            sb += at(b, y + dy, x + dx);
        }
    }
    let (ma, mb) = (sa / n, sb / n);
    let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
    for y in y0..y1 {
        for x in x0..x1 {
            let u = at(a, y, x) - ma;
            let v = at(b, y + dy, x + dx) - mb;
            ab += u * v;
            aa += u * u;
            bb += v * v;
        }
    }
    if aa < 1e-12 || bb < 1e-12 {
        0.0
    } else {
        ab / (aa * bb).sqrt()
    }
}

/// Candidate shifts, nearest first so ties resolve toward small motion.
fn candidates(max_shift: usize) -> Vec<(i32, i32)> {
    let m = max_shift as i32;
    let mut c: Vec<(i32, i32)> = (-m..=m).flat_map(|dy| (-m..=m).map(move |dx| (dy, dx))).collect();
    c.sort_by_key(|&(dy, dx)| (dy.abs() + dx.abs(), dy.abs().max(dx.abs()), dy, dx));
    c
}

/// Shift of every frame maximizing normalized correlation with frame 0,
/// searched over `[-max_shift, max_shift]²`. Frames are correlated after
/// removing their local mean.
pub fn register_burst(burst: &Burst, max_shift: usize) -> Result<RegistrationResult> {
    if burst.len() < 2 {
        return Err(contract("registration needs at least two frames"));
    }
    let (h, w) = burst.dims();
    let reference = high_pass(&burst.frames[0]);
    let cands = candidates(max_shift);
    let mut shifts = vec![(0, 0)];
    let mut confidence = f64::INFINITY;
    for frame in &burst.frames[1..] {
        let frame = high_pass(frame);
        let mut best = (0, 0);
        let mut best_score = f64::NEG_INFINITY;
        for &(dy, dx) in &cands {
            let s = ncc(&frame, &reference, h, w, dy, dx);
            if s > best_score {
                best_score = s;
                best = (dy, dx);
            }
        }
        if best_score <= 0.0 {
            best = (0, 0);
        }
        shifts.push(best);
        confidence = confidence.min(best_score.clamp(0.0, 1.0));
    }
    Ok(RegistrationResult { shifts, confidence })
}

/// Frames moved onto frame 0's grid (edges clamped).
pub fn align_burst(burst: &Burst, reg: &RegistrationResult) -> Result<Vec<GrayFrame>> {
    if reg.shifts.len() != burst.len() {
        return Err(contract("registration does not match burst length"));
    }
    Ok(burst.frames.iter().zip(&reg.shifts).map(|(f, &(dy, dx))| f.shifted(dy, dx)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Grid2D, Unit};
    use crate::simulator::{synth_burst, AmbientTemperature, CameraParams, MotionConfig};

    fn amb() -> AmbientTemperature {
        AmbientTemperature::new(20.0).unwrap()
    }

    #[test]
    fn identical_frames_do_not_move() {
        let f = GrayFrame::new(8, 8, (0..64).map(|v| (v * 13 % 17) as u16).collect(), None).unwrap();
        let b = Burst::new(vec![f.clone(), f.clone(), f], amb()).unwrap();
        let r = register_burst(&b, 3).unwrap();
        assert_eq!(r.shifts, vec![(0, 0); 3]);
        assert!((r.confidence - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_frames_have_zero_confidence() {
        let f = GrayFrame::new(8, 8, vec![100; 64], None).unwrap();
        let b = Burst::new(vec![f.clone(), f], amb()).unwrap();
        let r = register_burst(&b, 2).unwrap();
        assert_eq!(r.shifts, vec![(0, 0); 2]);
        assert_eq!(r.confidence, 0.0);
        assert!(register_burst(&Burst::new(vec![b.frames[0].clone()], amb()).unwrap(), 2).is_err());
    }

    #[test]
    fn smooth_sensor_pattern_does_not_pin_registration() {
        let t = Grid2D::from_fn(48, 48, Unit::Celsius, |y, x| 25.0 + ((y * 31 + x * 17 + y * x) % 11) as f32 * 0.6);
        let p = CameraParams {
            gain_poly: vec![4.0],
            offset_poly: vec![2000.0],
            radial_profile: vec![1.0, 0.0, -0.05],
            noise_sigma: 6.0,
            ..CameraParams::identity()
        };
        let b = synth_burst(&t, amb(), 7, &MotionConfig::translations(4, 2), &p, 3).unwrap();
        let r = register_burst(&b, 2).unwrap();
        for (s, m) in r.shifts.iter().zip(&b.motions) {
            assert_eq!(*s, (m.dy, m.dx));
        }
    }

    #[test]
    fn recovers_translations() {
        let t = Grid2D::from_fn(40, 40, Unit::Celsius, |y, x| {
            20.0 + 5.0 * ((y as f32 * 0.45).sin() * (x as f32 * 0.3).cos()) + ((y * 3 + x * 5) % 7) as f32
        });
        let p = CameraParams { gain_poly: vec![20.0], ..CameraParams::identity() };
        let b = synth_burst(&t, amb(), 6, &MotionConfig::translations(4, 3), &p, 5).unwrap();
        let r = register_burst(&b, 3).unwrap();
        for (s, m) in r.shifts.iter().zip(&b.motions) {
            assert_eq!(*s, (m.dy, m.dx));
        }
        let aligned = align_burst(&b, &r).unwrap();
        for f in &aligned {
            assert_eq!(f.get(10, 10), aligned[0].get(10, 10));
        }
    }
}
