//! Camera model parameters and their key-value text form.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Camera operating envelope for the ambient temperature, °C.
pub const AMBIENT_RANGE: (f64, f64) = (-20.0, 70.0);

/// Range of `T_amb` over which the gain must stay positive, °C.
const GAIN_CHECK_RANGE: (f64, f64) = (-10.0, 60.0);

/// Largest normalized radius (frame corners).
pub const MAX_RADIUS: f64 = std::f64::consts::SQRT_2;

/// Camera body temperature.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct AmbientTemperature(f64);

impl AmbientTemperature {
    pub fn new(value: f64) -> Result<Self> {
        if !(AMBIENT_RANGE.0..=AMBIENT_RANGE.1).contains(&value) {
            return Err(Error::Params(format!(
                "ambient temperature {value} outside [{}, {}] °C",
                AMBIENT_RANGE.0, AMBIENT_RANGE.1
            )));
        }
        Ok(Self(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Position inside the operating envelope, in `[0, 1]`.
    pub fn normalized(self) -> f64 {
        (self.0 - AMBIENT_RANGE.0) / (AMBIENT_RANGE.1 - AMBIENT_RANGE.0)
    }
}

/// Polynomial `Σ c_i · t^i`.
pub(crate) fn poly(coeffs: &[f64], t: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
}

/// Linear camera with ambient drift and radially symmetric nonuniformity.
#[derive(Clone, Debug, PartialEq)]
pub struct CameraParams {
    /// Gain over `T_amb`, gray levels per °C.
    pub gain_poly: Vec<f64>,
    /// Offset over `T_amb`, gray levels.
    pub offset_poly: Vec<f64>,
    /// Multiplicative profile over the normalized radius, `1` at the center.
    pub radial_profile: Vec<f64>,
    pub noise_sigma: f64,
    pub seed: u64,
    pub gray_depth: u32,
}

impl Default for CameraParams {
    fn default() -> Self {
        Self::identity()
    }
}

impl CameraParams {
    /// `G ≡ 1`, `D ≡ 0`, no noise.
    pub fn identity() -> Self {
        Self {
            gain_poly: vec![1.0],
            offset_poly: vec![0.0],
            radial_profile: vec![1.0],
            noise_sigma: 0.0,
            seed: 0,
            gray_depth: 14,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Params(m));
        for (name, c) in [("gain_poly", &self.gain_poly), ("offset_poly", &self.offset_poly)] {
            if c.is_empty() || c.len() > 4 {
                return bad(format!("{name} needs 1 to 4 coefficients, got {}", c.len()));
            }
        }
        if self.radial_profile.is_empty() {
            return bad("radial_profile needs at least one coefficient".into());
        }
        let all = self.gain_poly.iter().chain(&self.offset_poly).chain(&self.radial_profile);
        if all.clone().any(|v| !v.is_finite()) || !self.noise_sigma.is_finite() {
            return bad("coefficients must be finite".into());
        }
        if self.radial_profile[0] != 1.0 {
            return bad(format!("radial_profile must be 1 at r = 0, got {}", self.radial_profile[0]));
        }
        if self.noise_sigma < 0.0 {
            return bad(format!("noise_sigma must be >= 0, got {}", self.noise_sigma));
        }
        if !(1..=16).contains(&self.gray_depth) {
            return bad(format!("gray_depth must be in 1..=16, got {}", self.gray_depth));
        }
        let (lo, hi) = GAIN_CHECK_RANGE;
        for i in 0..=700 {
            let t = lo + (hi - lo) * i as f64 / 700.0;
            if !(self.gain(t) > 0.0) {
                return bad(format!("gain is not positive at T_amb = {t}"));
            }
        }
        Ok(())
    }

    pub fn gain(&self, t_amb: f64) -> f64 {
        poly(&self.gain_poly, t_amb)
    }

    pub fn offset(&self, t_amb: f64) -> f64 {
        poly(&self.offset_poly, t_amb)
    }

    pub fn radial(&self, r: f64) -> f64 {
        poly(&self.radial_profile, r)
    }

    /// Largest representable gray level.
    pub fn max_level(&self) -> f64 {
        ((1u32 << self.gray_depth) - 1) as f64
    }

    pub fn to_text(&self) -> String {
        let list = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ");
        let mut s = String::new();
        let _ = writeln!(s, "gain_poly = {}", list(&self.gain_poly));
        let _ = writeln!(s, "offset_poly = {}", list(&self.offset_poly));
        let _ = writeln!(s, "radial_profile = {}", list(&self.radial_profile));
        let _ = writeln!(s, "noise_sigma = {:?}", self.noise_sigma);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "gray_depth = {}", self.gray_depth);
        s
    }

    /// Parse `key = n[, n...]` lines. `#` starts a comment. Keys other than the
    /// two polynomials fall back to the identity camera's values.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut out = Self::identity();
        let (mut have_gain, mut have_offset) = (false, false);
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |m: &str| Error::Format(format!("line {}: {m}", lineno + 1));
            let (key, value) = line.split_once('=').ok_or_else(|| err("expected `key = value`"))?;
            let nums = || -> Result<Vec<f64>> {
                value
                    .split(',')
                    .map(|t| t.trim().parse::<f64>().map_err(|_| err(&format!("bad number `{}`", t.trim()))))
                    .collect()
            };
            let single = || -> Result<&str> {
                let v = value.trim();
                if v.contains(',') {
                    return Err(err("expected a single value"));
                }
                Ok(v)
            };
            match key.trim() {
                "gain_poly" => {
                    out.gain_poly = nums()?;
                    have_gain = true;
                }
                "offset_poly" => {
                    out.offset_poly = nums()?;
                    have_offset = true;
                }
                "radial_profile" => out.radial_profile = nums()?,
                "noise_sigma" => out.noise_sigma = single()?.parse().map_err(|_| err("bad noise_sigma"))?,
                "seed" => out.seed = single()?.parse().map_err(|_| err("bad seed"))?,
                "gray_depth" => out.gray_depth = single()?.parse().map_err(|_| err("bad gray_depth"))?,
                other => return Err(err(&format!("unknown key `{other}`"))),
            }
        }
        if !have_gain || !have_offset {
            return Err(Error::Format("camera params need gain_poly and offset_poly".into()));
        }
        out.validate()?;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let p = CameraParams {
            gain_poly: vec![4.0, 0.01, -1e-4, 3e-7],
            offset_poly: vec![2000.0, 3.5],
            radial_profile: vec![1.0, 0.0, -0.05],
            noise_sigma: 2.0,
            seed: 77,
            gray_depth: 14,
        };
        assert_eq!(CameraParams::from_text(&p.to_text()).unwrap(), p);
    }

    #[test]
    fn rejects_bad_params() {
        let mut p = CameraParams::identity();
        p.gain_poly = vec![0.0, 1.0];
        assert!(p.validate().is_err());
        let mut p = CameraParams::identity();
        p.radial_profile = vec![0.9];
        assert!(p.validate().is_err());
        let mut p = CameraParams::identity();
        p.noise_sigma = -1.0;
        assert!(p.validate().is_err());
        assert!(CameraParams::from_text("gain_poly = 1\n").is_err());
        assert!(CameraParams::from_text("gain_poly = 1\noffset_poly = 0\nfoo = 1\n").is_err());
        assert!(CameraParams::from_text("gain_poly = 1\noffset_poly = x\n").is_err());
        let p = CameraParams::from_text("# camera\ngain_poly = 2 # flat\noffset_poly = 100\n").unwrap();
        assert_eq!(p.gain_poly, vec![2.0]);
    }

    #[test]
    fn ambient_range() {
        assert!(AmbientTemperature::new(-20.0).is_ok());
        assert!(AmbientTemperature::new(70.5).is_err());
        assert_eq!(AmbientTemperature::new(25.0).unwrap().normalized(), 0.5);
    }
}
