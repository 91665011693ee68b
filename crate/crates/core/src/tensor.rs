//! Channel-major feature maps and the scalar abstraction shared by every
//! numeric kernel.
//!
//! Networks run in `f32`; the same code paths instantiate with `f64` so that
//! finite-difference gradient checks are meaningful.

use std::fmt::{Debug, Display};

use num_traits::Float;

use crate::error::{contract, Result};
use crate::grid::{Grid2D, Unit};

/// Floating point element type of tensors and networks.
pub trait Real: Float + Default + Debug + Display + Send + Sync + 'static {
    fn of(v: f64) -> Self;
    fn f64(self) -> f64;
}

impl Real for f32 {
    #[inline]
    fn of(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    #[inline]
    fn of(v: f64) -> Self {
        v
    }
    #[inline]
    fn f64(self) -> f64 {
        self
    }
}

/// A `C×H×W` feature map stored channel-major, then row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor3<R = f32> {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<R>,
}

impl<R: Real> Tensor3<R> {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<R>) -> Result<Self> {
        if data.len() != channels * height * width {
            return Err(contract(format!("tensor data length {} != {}x{}x{}", data.len(), channels, height, width)));
        }
        Ok(Self { channels, height, width, data })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self::filled(channels, height, width, R::zero())
    }

    pub fn filled(channels: usize, height: usize, width: usize, value: R) -> Self {
        Self { channels, height, width, data: vec![value; channels * height * width] }
    }

    /// Single-channel tensor holding the grid's values.
    pub fn from_grid(grid: &Grid2D) -> Self {
        Self {
            channels: 1,
            height: grid.height(),
            width: grid.width(),
            data: grid.values().iter().map(|&v| R::of(v as f64)).collect(),
        }
    }

    /// Channel `c` as a grid with the given unit tag.
    pub fn to_grid(&self, c: usize, unit: Unit) -> Grid2D {
        let values = self.channel(c).iter().map(|v| v.f64() as f32).collect();
        Grid2D::new(self.height, self.width, values, unit).expect("channel plane has H*W values")
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[R] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [R] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<R> {
        self.data
    }

    pub fn channel(&self, c: usize) -> &[R] {
        let n = self.plane_len();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [R] {
        let n = self.plane_len();
        &mut self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn at(&self, c: usize, y: usize, x: usize) -> R {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn map(&self, f: impl Fn(R) -> R) -> Self {
        Self {
            channels: self.channels,
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn cast<S: Real>(&self) -> Tensor3<S> {
        Tensor3 {
            channels: self.channels,
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|v| S::of(v.f64())).collect(),
        }
    }

    /// Split into the leading `at` channels and the rest.
    pub fn split_channels(&self, at: usize) -> Result<(Self, Self)> {
        if at > self.channels {
            return Err(contract(format!("split at {at} beyond {} channels", self.channels)));
        }
        let cut = at * self.plane_len();
        Ok((
            Self { channels: at, height: self.height, width: self.width, data: self.data[..cut].to_vec() },
            Self {
                channels: self.channels - at,
                height: self.height,
                width: self.width,
                data: self.data[cut..].to_vec(),
            },
        ))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
