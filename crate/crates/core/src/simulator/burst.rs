//! Bursts of frames under small random camera motion.

use nalgebra::{SMatrix, SVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{simulate_frame, AmbientTemperature, CameraParams};
use crate::error::{contract, Result};
use crate::grid::{GrayFrame, Grid2D, Unit};

/// Stream-key salt separating motion draws from sensor noise.
const MOTION_SALT: u64 = 0x6d6f_7469_6f6e;

/// Bounds of the random motion applied to frames `1..n`.
#[derive(Clone, Debug, PartialEq)]
pub struct MotionConfig {
    /// Border cropped from each side of the source map.
    pub margin: usize,
    /// Crop offsets are integers in `[-max_shift, max_shift]`.
    pub max_shift: usize,
    /// Rotation in `[-max_deg, max_deg]` degrees.
    pub max_deg: f64,
    /// Perspective corner jitter in `[-max_px, max_px]` pixels per coordinate.
    pub max_px: f64,
}

impl MotionConfig {
    /// No motion at all; every frame sees the center crop.
    pub fn still(margin: usize) -> Self {
        Self { margin, max_shift: 0, max_deg: 0.0, max_px: 0.0 }
    }

    /// Integer translations only.
    pub fn translations(margin: usize, max_shift: usize) -> Self {
        Self { margin, max_shift, max_deg: 0.0, max_px: 0.0 }
    }

    /// Source pixels a motion may reach beyond the crop, rounded up.
    fn reach(&self, out_h: usize, out_w: usize) -> usize {
        let half_diag = 0.5 * ((out_h * out_h + out_w * out_w) as f64).sqrt();
        let rot = half_diag * self.max_deg.to_radians().abs();
        // bilinear taps need one more pixel
        self.max_shift
            + (1.5 * self.max_px + rot).ceil() as usize
            + usize::from(self.max_deg != 0.0 || self.max_px != 0.0)
    }
}

/// Geometric transform of one frame relative to the center crop.
#[derive(Clone, Debug, PartialEq)]
pub struct Motion {
    /// Integer crop offset; frame content at `p` shows the source at `p + (dy, dx)`.
    pub dy: i32,
    pub dx: i32,
    pub angle_deg: f64,
    /// Displacement `(dy, dx)` of the four output corners (TL, TR, BR, BL).
    pub corners: [[f64; 2]; 4],
}

impl Motion {
    pub fn identity() -> Self {
        Self { dy: 0, dx: 0, angle_deg: 0.0, corners: [[0.0; 2]; 4] }
    }

    pub fn is_translation(&self) -> bool {
        self.angle_deg == 0.0 && self.corners.iter().flatten().all(|&c| c == 0.0)
    }

    fn sample(rng: &mut ChaCha8Rng, cfg: &MotionConfig) -> Self {
        let s = cfg.max_shift as i32;
        let (dy, dx) = (rng.random_range(-s..=s), rng.random_range(-s..=s));
        let angle_deg = if cfg.max_deg > 0.0 { rng.random_range(-cfg.max_deg..=cfg.max_deg) } else { 0.0 };
        let mut corners = [[0.0; 2]; 4];
        if cfg.max_px > 0.0 {
            for c in corners.iter_mut().flatten() {
                *c = rng.random_range(-cfg.max_px..=cfg.max_px);
            }
        }
        Self { dy, dx, angle_deg, corners }
    }
}

/// Frames of one scene at one ambient temperature.
#[derive(Clone, Debug, PartialEq)]
pub struct Burst {
    pub frames: Vec<GrayFrame>,
    pub t_amb: AmbientTemperature,
    /// Temperature map seen by frame 0.
    pub true_map: Option<Grid2D>,
    pub motions: Vec<Motion>,
}

impl Burst {
    pub fn new(frames: Vec<GrayFrame>, t_amb: AmbientTemperature) -> Result<Self> {
        if frames.is_empty() {
            return Err(contract("a burst needs at least one frame"));
        }
        if frames.iter().any(|f| f.dims() != frames[0].dims()) {
            return Err(contract("burst frames differ in size"));
        }
        let motions = vec![Motion::identity(); frames.len()];
        Ok(Self { frames, t_amb, true_map: None, motions })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.frames[0].dims()
    }
}

/// Maps centered output coordinates `(y, x)` to centered source coordinates.
struct Warp {
    homography: Option<[f64; 8]>,
    cos: f64,
    sin: f64,
}

impl Warp {
    fn new(m: &Motion, out_h: usize, out_w: usize) -> Result<Self> {
        let homography = if m.corners.iter().flatten().all(|&c| c == 0.0) {
            None
        } else {
            let (hy, hx) = ((out_h as f64 - 1.0) / 2.0, (out_w as f64 - 1.0) / 2.0);
            let src = [[-hy, -hx], [-hy, hx], [hy, hx], [hy, -hx]];
            let mut a = SMatrix::<f64, 8, 8>::zeros();
            let mut b = SVector::<f64, 8>::zeros();
            for (i, (s, d)) in src.iter().zip(&m.corners).enumerate() {
                let (y, x) = (s[0], s[1]);
                let (ty, tx) = (y + d[0], x + d[1]);
                let r = 2 * i;
                a.row_mut(r).copy_from_slice(&[x, y, 1.0, 0.0, 0.0, 0.0, -x * tx, -y * tx]);
                b[r] = tx;
                a.row_mut(r + 1).copy_from_slice(&[0.0, 0.0, 0.0, x, y, 1.0, -x * ty, -y * ty]);
                b[r + 1] = ty;
            }
            let h = a.lu().solve(&b).ok_or_else(|| contract("degenerate corner jitter"))?;
            Some(std::array::from_fn(|i| h[i]))
        };
        let t = m.angle_deg.to_radians();
        Ok(Self { homography, cos: t.cos(), sin: t.sin() })
    }

    fn apply(&self, y: f64, x: f64) -> (f64, f64) {
        let (y, x) = match &self.homography {
            None => (y, x),
            Some(h) => {
                let den = h[6] * x + h[7] * y + 1.0;
                ((h[3] * x + h[4] * y + h[5]) / den, (h[0] * x + h[1] * y + h[2]) / den)
            }
        };
        if self.sin == 0.0 {
            (y, x)
        } else {
            (self.sin * x + self.cos * y, self.cos * x - self.sin * y)
        }
    }
}

fn bilinear(map: &Grid2D, y: f64, x: f64) -> f32 {
    let (h, w) = map.dims();
    let y = y.clamp(0.0, (h - 1) as f64);
    let x = x.clamp(0.0, (w - 1) as f64);
    let (y0, x0) = (y.floor() as usize, x.floor() as usize);
    let (fy, fx) = (y - y0 as f64, x - x0 as f64);
    if fy == 0.0 && fx == 0.0 {
        return map.get(y0, x0);
    }
    let (y1, x1) = ((y0 + 1).min(h - 1), (x0 + 1).min(w - 1));
    let v = |yy, xx| map.get(yy, xx) as f64;
    let top = v(y0, x0) * (1.0 - fx) + v(y0, x1) * fx;
    let bot = v(y1, x0) * (1.0 - fx) + v(y1, x1) * fx;
    (top * (1.0 - fy) + bot * fy) as f32
}

/// View of `source` under `motion`, `out_h × out_w`, centered on the source.
fn warp_view(source: &Grid2D, motion: &Motion, out_h: usize, out_w: usize) -> Result<Grid2D> {
    let (sh, sw) = source.dims();
    let (scy, scx) = ((sh as f64 - 1.0) / 2.0, (sw as f64 - 1.0) / 2.0);
    let (ocy, ocx) = ((out_h as f64 - 1.0) / 2.0, (out_w as f64 - 1.0) / 2.0);
    let warp = Warp::new(motion, out_h, out_w)?;
    Ok(Grid2D::from_fn(out_h, out_w, Unit::Celsius, |y, x| {
        let (wy, wx) = warp.apply(y as f64 - ocy, x as f64 - ocx);
        bilinear(source, scy + motion.dy as f64 + wy, scx + motion.dx as f64 + wx)
    }))
}

/// `n` frames of `true_map` cropped by `cfg.margin` on each side. Frame 0 is the
/// center crop; later frames get random motion. `burst_id` keys both the
/// motion draws and the sensor noise.
pub fn synth_burst(
    true_map: &Grid2D,
    t_amb: AmbientTemperature,
    n: usize,
    cfg: &MotionConfig,
    params: &CameraParams,
    burst_id: u64,
) -> Result<Burst> {
    if n == 0 || n > 1 << 16 {
        return Err(contract(format!("burst length must be in 1..=65536, got {n}")));
    }
    let (h, w) = true_map.dims();
    if cfg.margin == 0 || h <= 2 * cfg.margin || w <= 2 * cfg.margin {
        return Err(contract(format!("map {h}x{w} leaves no frame inside margin {}", cfg.margin)));
    }
    if !(cfg.max_deg >= 0.0 && cfg.max_px >= 0.0) {
        return Err(contract("motion bounds must be non-negative"));
    }
    let (oh, ow) = (h - 2 * cfg.margin, w - 2 * cfg.margin);
    let reach = cfg.reach(oh, ow);
    if reach > cfg.margin {
        return Err(contract(format!("margin {} too small for motion reaching {reach} px", cfg.margin)));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed ^ MOTION_SALT);
    rng.set_stream(burst_id);
    let mut motions = vec![Motion::identity()];
    motions.extend((1..n).map(|_| Motion::sample(&mut rng, cfg)));

    let center = true_map.center_crop(oh, ow)?;
    let mut frames = Vec::with_capacity(n);
    for (k, m) in motions.iter().enumerate() {
        let view = if k == 0 { center.clone() } else { warp_view(true_map, m, oh, ow)? };
        frames.push(simulate_frame(&view, t_amb, params, (burst_id << 16) | k as u64)?.frame);
    }
    Ok(Burst { frames, t_amb, true_map: Some(center.with_unit(Unit::Celsius)), motions })
}
