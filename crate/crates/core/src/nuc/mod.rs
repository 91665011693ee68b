//! Nonuniformity correction: gray levels to radiometric temperature.
//!
//! [`SingleNucNet`] predicts per-pixel gain and offset maps from one frame and
//! the camera's ambient temperature. [`MultiNucNet`] fuses a registered burst
//! with predicted per-pixel kernels around a learned scene-mean estimate.

mod multi;
mod register;
mod single;

pub use multi::{estimate_mean_temp, nuc_multi, MultiNucConfig, MultiNucNet, MultiOutput};
pub use register::{align_burst, register_burst, RegistrationResult};
pub use single::{nuc_single, SingleNucConfig, SingleNucNet, SingleOutput};

use crate::error::{Error, Result};
use crate::graph::{Graph, Var};
use crate::grid::GrayFrame;
use crate::simulator::{radius_map, AmbientTemperature, CameraParams};
use crate::tensor::{Real, Tensor3};
use crate::weights::{ConvSpec, WeightStore};
use crate::{LEAKY_SLOPE, TEMP_RANGE};

/// NUC input frames and each frame's `(dy, dx)` shift onto frame 0.
#[derive(Clone, Debug, PartialEq)]
pub struct PreparedFrames {
    pub frames: Vec<GrayFrame>,
    pub shifts: Vec<(i32, i32)>,
}

impl PreparedFrames {
    pub fn single(frame: GrayFrame) -> Self {
        Self { frames: vec![frame], shifts: vec![(0, 0)] }
    }
}

/// Floor added to every predicted gain so it stays strictly positive.
pub const GAIN_EPS: f64 = 1e-3;

/// `x` with `softplus(x) + GAIN_EPS == 1`.
pub(crate) fn unit_gain_bias() -> f64 {
    ((1.0 - GAIN_EPS).exp() - 1.0).ln()
}

/// Nominal camera response used to bring raw gray levels near °C before the
/// network sees them. The network learns the per-pixel, per-`T_amb` residual.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GrayNorm {
    pub gain_ref: f64,
    pub offset_ref: f64,
    /// Gray levels represented by one unit of the offset head.
    pub offset_span: f64,
}

impl Default for GrayNorm {
    fn default() -> Self {
        Self { gain_ref: 1.0, offset_ref: 0.0, offset_span: 1.0 }
    }
}

impl GrayNorm {
    /// Center-pixel response of `params` at `t_amb`.
    pub fn nominal(params: &CameraParams, t_amb: AmbientTemperature, offset_span: f64) -> Self {
        Self { gain_ref: params.gain(t_amb.value()), offset_ref: params.offset(t_amb.value()), offset_span }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gain_ref > 0.0 && self.offset_span > 0.0 && self.offset_ref.is_finite()) {
            return Err(Error::Params(format!("bad gray normalization {self:?}")));
        }
        Ok(())
    }

    /// Gray level read through the nominal response, °C.
    pub fn naive(&self, level: f64) -> f64 {
        (level - self.offset_ref) / self.gain_ref
    }

    /// [`Self::naive`] mapped to network units.
    pub fn unit(&self, level: f64) -> f64 {
        to_unit(self.naive(level))
    }

    pub(crate) fn store<R: Real>(&self, store: &mut WeightStore<R>) {
        store.set_meta("gain_ref", self.gain_ref);
        store.set_meta("offset_ref", self.offset_ref);
        store.set_meta("offset_span", self.offset_span);
    }

    pub(crate) fn load<R: Real>(store: &WeightStore<R>) -> Result<Self> {
        let n = Self {
            gain_ref: store.meta("gain_ref")?,
            offset_ref: store.meta("offset_ref")?,
            offset_span: store.meta("offset_span")?,
        };
        n.validate().map_err(|e| Error::Load(e.to_string()))?;
        Ok(n)
    }
}

pub(crate) fn span() -> f64 {
    TEMP_RANGE.1 - TEMP_RANGE.0
}

/// °C to network units.
pub(crate) fn to_unit(t: f64) -> f64 {
    (t - TEMP_RANGE.0) / span()
}

/// Planes describing the sensor state: normalized ambient `τ`, squared radius
/// halved into `[0, 1]`, and their product.
pub(crate) fn sensor_planes<R: Real>(h: usize, w: usize, t_amb: AmbientTemperature) -> Vec<Vec<R>> {
    let tau = t_amb.normalized();
    let r2: Vec<f64> = radius_map(h, w).into_iter().map(|r| 0.5 * r * r).collect();
    vec![vec![R::of(tau); h * w], r2.iter().map(|&v| R::of(v)).collect(), r2.iter().map(|&v| R::of(tau * v)).collect()]
}

/// Number of planes returned by [`sensor_planes`].
pub(crate) const SENSOR_PLANES: usize = 3;

pub(crate) fn stack<R: Real>(h: usize, w: usize, planes: Vec<Vec<R>>) -> Result<Tensor3<R>> {
    let c = planes.len();
    Tensor3::new(c, h, w, planes.concat())
}

/// Conv + leaky ReLU for every spec in order.
pub(crate) fn conv_stack<R: Real>(g: &mut Graph<R>, mut x: Var, set: usize, specs: &[ConvSpec]) -> Result<Var> {
    for spec in specs {
        let c = g.conv(x, set, spec)?;
        x = g.leaky_relu(c, LEAKY_SLOPE);
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::softplus;

    #[test]
    fn unit_gain_bias_gives_unit_gain() {
        assert!((softplus(unit_gain_bias()) + GAIN_EPS - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gray_norm_round_trips_through_store() {
        let n = GrayNorm { gain_ref: 4.0, offset_ref: 2000.0, offset_span: 200.0 };
        let mut s = WeightStore::<f32>::new();
        n.store(&mut s);
        assert_eq!(GrayNorm::load(&s).unwrap(), n);
        assert_eq!(n.naive(2120.0), 30.0);
        assert!(GrayNorm::load(&WeightStore::<f32>::new()).is_err());
    }
}
