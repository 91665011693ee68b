//! Camera model file (TOML).
//!
//! ```toml
//! gain_poly = [3.9, 0.0045]
//! offset_poly = [1850.0, 7.0]
//! radial_profile = [1.0, 0.0, -0.05]
//! noise_sigma = 2.0
//! seed = 11
//! gray_depth = 14
//! ```

use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use thermopipe::simulator::CameraParams;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraFile {
    pub gain_poly: Vec<f64>,
    pub offset_poly: Vec<f64>,
    #[serde(default = "unit_profile")]
    pub radial_profile: Vec<f64>,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_depth")]
    pub gray_depth: u32,
}

fn unit_profile() -> Vec<f64> {
    vec![1.0]
}

fn default_depth() -> u32 {
    14
}

impl From<CameraFile> for CameraParams {
    fn from(f: CameraFile) -> Self {
        Self {
            gain_poly: f.gain_poly,
            offset_poly: f.offset_poly,
            radial_profile: f.radial_profile,
            noise_sigma: f.noise_sigma,
            seed: f.seed,
            gray_depth: f.gray_depth,
        }
    }
}

impl From<&CameraParams> for CameraFile {
    fn from(p: &CameraParams) -> Self {
        Self {
            gain_poly: p.gain_poly.clone(),
            offset_poly: p.offset_poly.clone(),
            radial_profile: p.radial_profile.clone(),
            noise_sigma: p.noise_sigma,
            seed: p.seed,
            gray_depth: p.gray_depth,
        }
    }
}

pub fn parse_camera(text: &str) -> Result<CameraParams> {
    let file: CameraFile = toml::from_str(text)?;
    let params = CameraParams::from(file);
    params.validate()?;
    Ok(params)
}

pub fn read_camera(path: &Path) -> Result<CameraParams> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_camera(&text).with_context(|| format!("camera parameters in {}", path.display()))
}

pub fn camera_toml(params: &CameraParams) -> String {
    toml::to_string(&CameraFile::from(params)).expect("camera parameters serialize")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_defaults() {
        let p = CameraParams {
            gain_poly: vec![3.9, 0.0045],
            offset_poly: vec![1850.0, 7.0],
            noise_sigma: 2.0,
            ..CameraParams::identity()
        };
        assert_eq!(parse_camera(&camera_toml(&p)).unwrap(), p);
        let minimal = parse_camera("gain_poly = [2.0]\noffset_poly = [100.0]\n").unwrap();
        assert_eq!(minimal.radial_profile, vec![1.0]);
        assert_eq!(minimal.gray_depth, 14);
        assert!(parse_camera("gain_poly = [2.0]\noffset_poly = [1.0]\nbogus = 1\n").is_err());
        assert!(parse_camera("gain_poly = []\noffset_poly = [1.0]\n").is_err());
    }
}
