//! Synthetic canopy-like temperature maps: rows of cool plants over warm soil.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::Result;
use crate::grid::{Grid2D, Unit};
use crate::simulator::AmbientTemperature;
use crate::training::GtScene;

struct Plant {
    cy: f64,
    cx: f64,
    ry: f64,
    rx: f64,
    angle: f64,
    temp: f64,
    phase: f64,
}

/// One scene at ambient `t_amb`. Soil sits 6-14 °C above ambient with a smooth
/// trend; each plant is 0-6 °C below ambient and warms toward its rim.
pub fn canopy_scene(height: usize, width: usize, t_amb: AmbientTemperature, rng: &mut impl Rng) -> Grid2D {
    let amb = t_amb.value();
    let (h, w) = (height as f64, width as f64);
    let soil = amb + rng.random_range(6.0..14.0);
    let trend = (rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5));
    let wave = (rng.random_range(0.5..2.0), rng.random_range(0.0..std::f64::consts::TAU));

    let vertical = rng.random_bool(0.5);
    let (along, across) = if vertical { (h, w) } else { (w, h) };
    let rows = rng.random_range(2..=4);
    let pitch = across / rows as f64;
    let mut plants = Vec::new();
    for r in 0..rows {
        let row_pos = (r as f64 + 0.5) * pitch + rng.random_range(-0.1..0.1) * pitch;
        let mut t = rng.random_range(0.0..0.6) * pitch;
        while t < along {
            let size = rng.random_range(0.3..0.55) * pitch;
            let (a, c) = (t, row_pos + rng.random_range(-0.1..0.1) * pitch);
            let (cy, cx) = if vertical { (a, c) } else { (c, a) };
            plants.push(Plant {
                cy,
                cx,
                ry: size * rng.random_range(0.7..1.3),
                rx: size * rng.random_range(0.7..1.3),
                angle: rng.random_range(0.0..std::f64::consts::PI),
                temp: amb - rng.random_range(0.0..6.0),
                phase: rng.random_range(0.0..std::f64::consts::TAU),
            });
            t += size * rng.random_range(1.4..2.2);
        }
    }

    Grid2D::from_fn(height, width, Unit::Celsius, |y, x| {
        let (yf, xf) = (y as f64 + 0.5, x as f64 + 0.5);
        let (u, v) = (yf / h - 0.5, xf / w - 0.5);
        let mut t = soil + trend.0 * u + trend.1 * v + 0.6 * (wave.0 * std::f64::consts::TAU * (u + v) + wave.1).sin();
        let mut cover = 0.0f64;
        let mut leaf = 0.0;
        for p in &plants {
            let (dy, dx) = (yf - p.cy, xf - p.cx);
            let (s, c) = p.angle.sin_cos();
            let (a, b) = ((c * dy + s * dx) / p.ry, (-s * dy + c * dx) / p.rx);
            let d = (a * a + b * b).sqrt();
            if d > 1.6 {
                continue;
            }
            let m = 1.0 / (1.0 + ((d - 1.0) / 0.08).exp());
            if m > cover {
                cover = m;
                leaf = p.temp + 1.2 * d * d + 0.3 * (3.0 * a + 2.0 * b + p.phase).sin();
            }
        }
        t = t * (1.0 - cover) + leaf * cover;
        t as f32
    })
}

/// `n` scenes with ambient temperatures uniform in `ambient`. Scene `i` depends
/// only on `(seed, i)`.
pub fn canopy_scenes(n: usize, height: usize, width: usize, ambient: (f64, f64), seed: u64) -> Result<Vec<GtScene>> {
    AmbientTemperature::new(ambient.0)?;
    AmbientTemperature::new(ambient.1)?;
    Ok((0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let v = if ambient.1 > ambient.0 { rng.random_range(ambient.0..=ambient.1) } else { ambient.0 };
            let t_amb = AmbientTemperature::new(v).expect("checked range");
            GtScene { map: canopy_scene(height, width, t_amb, &mut rng), t_amb: Some(t_amb) }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::cwsi;
    use crate::TEMP_RANGE;

    #[test]
    fn scenes_are_deterministic_and_plausible() {
        let a = canopy_scenes(6, 32, 48, (5.0, 40.0), 9).unwrap();
        assert_eq!(a, canopy_scenes(6, 32, 48, (5.0, 40.0), 9).unwrap());
        for s in &a {
            assert_eq!(s.map.dims(), (32, 48));
            assert!(s.map.min() as f64 > TEMP_RANGE.0 && (s.map.max() as f64) < TEMP_RANGE.1);
            let amb = s.t_amb.unwrap().value();
            assert!(s.map.max() as f64 > amb + 4.0 && (s.map.min() as f64) < amb);
            let c = cwsi(&s.map, amb, None).unwrap();
            assert!((-0.5..1.5).contains(&c), "cwsi {c}");
        }
    }
}
