//! Two-dimensional rasters: temperature maps and raw gray-level frames.

use crate::error::{contract, Result};

/// Physical meaning of a grid's samples.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Unit {
    Celsius,
    GrayLevel,
    Dimensionless,
}

/// Row-major `H×W` raster of 32-bit samples.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid2D {
    height: usize,
    width: usize,
    values: Vec<f32>,
    unit: Unit,
}

impl Grid2D {
    pub fn new(height: usize, width: usize, values: Vec<f32>, unit: Unit) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(contract(format!("grid dims must be >= 1, got {height}x{width}")));
        }
        if values.len() != height * width {
            return Err(contract(format!("grid has {} values, expected {height}x{width}", values.len())));
        }
        Ok(Self { height, width, values, unit })
    }

    pub fn filled(height: usize, width: usize, value: f32, unit: Unit) -> Self {
        assert!(height > 0 && width > 0, "grid dims must be >= 1");
        Self { height, width, values: vec![value; height * width], unit }
    }

    pub fn from_fn(height: usize, width: usize, unit: Unit, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        assert!(height > 0 && width > 0, "grid dims must be >= 1");
        let mut values = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                values.push(f(y, x));
            }
        }
        Self { height, width, values, unit }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn unit(&self) -> Unit {
        self.unit
    }

    pub fn with_unit(mut self, unit: Unit) -> Self {
        self.unit = unit;
        self
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f32] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> f32 {
        self.values[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, v: f32) {
        self.values[y * self.width + x] = v;
    }

    pub fn row(&self, y: usize) -> &[f32] {
        &self.values[y * self.width..(y + 1) * self.width]
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().map(|&v| v as f64).sum::<f64>() / self.len() as f64
    }

    pub fn min(&self) -> f32 {
        self.values.iter().copied().fold(f32::INFINITY, f32::min)
    }

    pub fn max(&self) -> f32 {
        self.values.iter().copied().fold(f32::NEG_INFINITY, f32::max)
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Self {
        Self { values: self.values.iter().map(|&v| f(v)).collect(), ..self.clone() }
    }

    /// The grid turned by 180 degrees.
    pub fn rotate180(&self) -> Self {
        let mut values = self.values.clone();
        values.reverse();
        Self { values, ..self.clone() }
    }

    /// Sub-window with top-left corner `(y0, x0)`.
    pub fn crop(&self, y0: usize, x0: usize, height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 || y0 + height > self.height || x0 + width > self.width {
            return Err(contract(format!("crop {height}x{width}@({y0},{x0}) outside {}x{}", self.height, self.width)));
        }
        let mut values = Vec::with_capacity(height * width);
        for y in y0..y0 + height {
            values.extend_from_slice(&self.values[y * self.width + x0..y * self.width + x0 + width]);
        }
        Ok(Self { height, width, values, unit: self.unit })
    }

    /// Centered sub-window.
    pub fn center_crop(&self, height: usize, width: usize) -> Result<Self> {
        if height > self.height || width > self.width {
            return Err(contract("center crop larger than grid"));
        }
        self.crop((self.height - height) / 2, (self.width - width) / 2, height, width)
    }
}

/// Raw camera output: integer gray levels plus the camera's ambient
/// temperature when known.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayFrame {
    height: usize,
    width: usize,
    levels: Vec<u16>,
    t_amb: Option<f32>,
}

impl GrayFrame {
    pub fn new(height: usize, width: usize, levels: Vec<u16>, t_amb: Option<f32>) -> Result<Self> {
        if height == 0 || width == 0 || levels.len() != height * width {
            return Err(contract(format!("gray frame {height}x{width} with {} samples", levels.len())));
        }
        if t_amb.is_some_and(|t| !t.is_finite()) {
            return Err(contract("ambient temperature must be finite when present"));
        }
        Ok(Self { height, width, levels, t_amb })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn levels(&self) -> &[u16] {
        &self.levels
    }

    pub fn t_amb(&self) -> Option<f32> {
        self.t_amb
    }

    /// Replace the ambient temperature; non-finite values clear it.
    pub fn with_t_amb(mut self, t_amb: Option<f32>) -> Self {
        self.t_amb = t_amb.filter(|t| t.is_finite());
        self
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> u16 {
        self.levels[y * self.width + x]
    }

    pub fn mean(&self) -> f64 {
        self.levels.iter().map(|&v| v as f64).sum::<f64>() / self.levels.len() as f64
    }

    /// Gray levels as a float grid.
    pub fn to_grid(&self) -> Grid2D {
        Grid2D {
            height: self.height,
            width: self.width,
            values: self.levels.iter().map(|&v| v as f32).collect(),
            unit: Unit::GrayLevel,
        }
    }

    /// Content displaced by an integer shift: `out[p] = self[p - shift]`, with
    /// edge clamping.
    pub fn shifted(&self, dy: i32, dx: i32) -> Self {
        let (h, w) = (self.height as i64, self.width as i64);
        let mut levels = Vec::with_capacity(self.levels.len());
        for y in 0..h {
            let sy = (y - dy as i64).clamp(0, h - 1) as usize;
            for x in 0..w {
                let sx = (x - dx as i64).clamp(0, w - 1) as usize;
                levels.push(self.levels[sy * self.width + sx]);
            }
        }
        Self { levels, ..self.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_dims() {
        assert!(Grid2D::new(0, 3, vec![], Unit::Celsius).is_err());
        assert!(Grid2D::new(2, 2, vec![1.0; 3], Unit::Celsius).is_err());
    }

    #[test]
    fn rotate_twice_is_identity() {
        let g = Grid2D::from_fn(3, 5, Unit::Celsius, |y, x| (y * 7 + x) as f32);
        assert_eq!(g.rotate180().rotate180(), g);
        assert_eq!(g.rotate180().get(0, 0), g.get(2, 4));
    }

    #[test]
    fn crop_and_shift() {
        let g = Grid2D::from_fn(4, 4, Unit::Celsius, |y, x| (y * 4 + x) as f32);
        let c = g.crop(1, 2, 2, 2).unwrap();
        assert_eq!(c.values(), &[6.0, 7.0, 10.0, 11.0]);
        assert!(g.crop(3, 3, 2, 2).is_err());

        let f = GrayFrame::new(2, 3, vec![1, 2, 3, 4, 5, 6], None).unwrap();
        let s = f.shifted(0, 1);
        assert_eq!(s.levels(), &[1, 1, 2, 4, 4, 5]);
    }
}
