//! Crop water stress index from a temperature map.

use crate::error::{contract, Error, Result};
use crate::grid::Grid2D;

/// Share of the coolest pixels averaged into the plant temperature.
pub const PLANT_FRACTION: f64 = 0.33;
/// Share of the coolest pixels averaged into the wet reference.
pub const WET_FRACTION: f64 = 0.05;
/// The dry reference sits this many °C above ambient.
pub const DRY_OFFSET: f64 = 7.0;

/// Reference temperatures of the index, °C.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CwsiInputs {
    pub t_plant: f64,
    pub t_wet: f64,
    pub t_dry: f64,
}

impl CwsiInputs {
    /// Derive the references from a map, optionally restricted to canopy pixels.
    pub fn from_map(map: &Grid2D, t_amb: f64, mask: Option<&[bool]>) -> Result<Self> {
        let mut vals: Vec<f64> = match mask {
            Some(m) => {
                if m.len() != map.len() {
                    return Err(contract(format!("mask has {} entries for {} pixels", m.len(), map.len())));
                }
                map.values().iter().zip(m).filter(|(_, &keep)| keep).map(|(&v, _)| v as f64).collect()
            }
            None => map.values().iter().map(|&v| v as f64).collect(),
        };
        if vals.is_empty() {
            return Err(contract("CWSI mask selects no pixels"));
        }
        vals.sort_by(f64::total_cmp);
        let coolest_mean = |frac: f64| {
            let k = ((frac * vals.len() as f64).round() as usize).clamp(1, vals.len());
            vals[..k].iter().sum::<f64>() / k as f64
        };
        Ok(Self { t_plant: coolest_mean(PLANT_FRACTION), t_wet: coolest_mean(WET_FRACTION), t_dry: t_amb + DRY_OFFSET })
    }

    /// `(T_plant - T_wet) / (T_dry - T_wet)`, unclamped.
    pub fn index(&self) -> Result<f64> {
        if !(self.t_dry > self.t_wet) {
            return Err(Error::DegenerateCwsi { t_dry: self.t_dry, t_wet: self.t_wet });
        }
        Ok((self.t_plant - self.t_wet) / (self.t_dry - self.t_wet))
    }
}

pub fn cwsi(map: &Grid2D, t_amb: f64, mask: Option<&[bool]>) -> Result<f64> {
    CwsiInputs::from_map(map, t_amb, mask)?.index()
}

/// Absolute CWSI difference in percentage points.
pub fn cwsi_error(gt: &Grid2D, est: &Grid2D, t_amb: f64, mask: Option<&[bool]>) -> Result<f64> {
    Ok((cwsi(gt, t_amb, mask)? - cwsi(est, t_amb, mask)?).abs() * 100.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Unit;

    #[test]
    fn formula() {
        let c = CwsiInputs { t_plant: 30.0, t_wet: 28.0, t_dry: 35.0 };
        assert!((c.index().unwrap() - 2.0 / 7.0).abs() < 1e-15);
        let bad = CwsiInputs { t_plant: 30.0, t_wet: 28.0, t_dry: 28.0 };
        assert!(matches!(bad.index(), Err(Error::DegenerateCwsi { .. })));
    }

    #[test]
    fn uniform_map_is_zero() {
        let m = Grid2D::filled(10, 10, 25.0, Unit::Celsius);
        assert_eq!(cwsi(&m, 30.0, None).unwrap(), 0.0);
        assert_eq!(cwsi_error(&m, &m, 30.0, None).unwrap(), 0.0);
    }

    #[test]
    fn plant_at_dry_reference_is_one() {
        // 20 pixels: 5% -> 1 pixel, 33% -> 7 pixels
        let t_amb = 30.0;
        let mut v = vec![31.0f32];
        v.extend([38.0; 6]);
        v.extend([45.0; 13]);
        let m = Grid2D::new(4, 5, v, Unit::Celsius).unwrap();
        let c = CwsiInputs::from_map(&m, t_amb, None).unwrap();
        assert_eq!(c.t_wet, 31.0);
        assert!((c.t_plant - 37.0).abs() < 1e-12);
        assert!((c.index().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mask_restricts_pixels() {
        let m = Grid2D::from_fn(4, 4, Unit::Celsius, |y, _| if y < 2 { 20.0 } else { 40.0 });
        let mask: Vec<bool> = (0..16).map(|i| i >= 8).collect();
        let c = CwsiInputs::from_map(&m, 30.0, Some(&mask)).unwrap();
        assert_eq!(c.t_wet, 40.0);
        assert!(CwsiInputs::from_map(&m, 30.0, Some(&[false; 16])).is_err());
        assert!(CwsiInputs::from_map(&m, 30.0, Some(&[true; 3])).is_err());
    }
}
