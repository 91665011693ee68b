//! Single-frame NUC: predict gain and offset maps, then invert the camera model.

use rand::Rng;

use super::{conv_stack, sensor_planes, stack, unit_gain_bias, GrayNorm, GAIN_EPS, SENSOR_PLANES};
use crate::error::{contract, Error, Result};
use crate::graph::{Graph, Var};
use crate::grid::{GrayFrame, Grid2D, Unit};
use crate::simulator::AmbientTemperature;
use crate::tensor::{Real, Tensor3};
use crate::weights::{ConvSpec, ParamTensor, WeightStore};

#[derive(Clone, Debug, PartialEq)]
pub struct SingleNucConfig {
    /// Conv blocks in the trunk.
    pub depth: usize,
    /// Channels of every trunk block.
    pub width: usize,
    pub norm: GrayNorm,
}

impl Default for SingleNucConfig {
    fn default() -> Self {
        Self { depth: 6, width: 32, norm: GrayNorm::default() }
    }
}

/// Graph nodes of one forward pass.
#[derive(Clone, Copy, Debug)]
pub struct SingleOutput {
    /// Estimated temperature, °C.
    pub temperature: Var,
    pub gain: Var,
    pub offset: Var,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SingleNucNet {
    config: SingleNucConfig,
}

impl SingleNucNet {
    /// Input planes: normalized gray, then the sensor planes (ambient
    /// temperature, squared radius, their product).
    pub const INPUTS: usize = 1 + SENSOR_PLANES;

    pub fn new(config: SingleNucConfig) -> Result<Self> {
        if config.depth == 0 || config.width == 0 {
            return Err(Error::Params("single NUC net needs depth and width >= 1".into()));
        }
        config.norm.validate()?;
        Ok(Self { config })
    }

    pub fn config(&self) -> &SingleNucConfig {
        &self.config
    }

    fn trunk(&self) -> Vec<ConvSpec> {
        (0..self.config.depth)
            .map(|i| {
                let cin = if i == 0 { Self::INPUTS } else { self.config.width };
                ConvSpec::new(format!("trunk.{i}"), cin, self.config.width, 3)
            })
            .collect()
    }

    fn gain_head(&self) -> ConvSpec {
        ConvSpec::new("gain_head", self.config.width, 1, 3)
    }

    fn offset_head(&self) -> ConvSpec {
        ConvSpec::new("offset_head", self.config.width, 1, 3)
    }

    fn with_heads(&self, mut store: WeightStore) -> WeightStore {
        self.gain_head().zeros(&mut store);
        self.offset_head().zeros(&mut store);
        store
            .insert(self.gain_head().bias_name(), ParamTensor { dims: vec![1], values: vec![unit_gain_bias() as f32] });
        self.config.norm.store(&mut store);
        store
    }

    /// Random trunk; heads start at `Ĝ = gain_ref`, `D̂ = offset_ref`.
    pub fn init(&self, rng: &mut impl Rng) -> WeightStore {
        let mut store = WeightStore::new();
        for spec in self.trunk() {
            spec.init(&mut store, rng);
        }
        self.with_heads(store)
    }

    /// Zero trunk with the same head start as [`Self::init`].
    pub fn identity_weights(&self) -> WeightStore {
        let mut store = WeightStore::new();
        for spec in self.trunk() {
            spec.zeros(&mut store);
        }
        self.with_heads(store)
    }

    /// Recover the configuration a weight store was built for.
    pub fn from_weights<R: Real>(store: &WeightStore<R>) -> Result<Self> {
        let depth = store.count_layers("trunk", "");
        if depth == 0 {
            return Err(Error::Load("no `trunk.0` layer; not a single-frame NUC store".into()));
        }
        let width = store.dims("trunk.0.weight")?[0];
        let net = Self::new(SingleNucConfig { depth, width, norm: GrayNorm::load(store)? })
            .map_err(|e| Error::Load(e.to_string()))?;
        net.check(store)?;
        Ok(net)
    }

    pub fn check<R: Real>(&self, store: &WeightStore<R>) -> Result<()> {
        for spec in self.trunk().iter().chain([&self.gain_head(), &self.offset_head()]) {
            spec.check(store)?;
        }
        Ok(())
    }

    pub fn input_tensor<R: Real>(&self, frame: &GrayFrame, t_amb: AmbientTemperature) -> Result<Tensor3<R>> {
        let (h, w) = frame.dims();
        let norm = self.config.norm;
        let gray = frame.levels().iter().map(|&l| R::of(norm.unit(l as f64))).collect();
        let mut planes = vec![gray];
        planes.extend(sensor_planes(h, w, t_amb));
        stack(h, w, planes)
    }

    /// Record the forward pass, reading parameters from graph set `set`.
    pub fn forward<R: Real>(
        &self,
        g: &mut Graph<R>,
        set: usize,
        frame: &GrayFrame,
        t_amb: AmbientTemperature,
    ) -> Result<SingleOutput> {
        let (h, w) = frame.dims();
        let norm = self.config.norm;
        let levels = g.leaf(Tensor3::new(1, h, w, frame.levels().iter().map(|&l| R::of(l as f64)).collect())?);
        let x = g.leaf(self.input_tensor(frame, t_amb)?);
        let features = conv_stack(g, x, set, &self.trunk())?;
        let raw_gain = g.conv(features, set, &self.gain_head())?;
        let sp = g.softplus(raw_gain);
        let gain = g.affine(sp, norm.gain_ref, norm.gain_ref * GAIN_EPS);
        let raw_offset = g.conv(features, set, &self.offset_head())?;
        let offset = g.affine(raw_offset, norm.offset_span, norm.offset_ref);
        let signal = g.sub(levels, offset)?;
        let temperature = g.div(signal, gain)?;
        Ok(SingleOutput { temperature, gain, offset })
    }
}

/// Temperature map of one frame, °C.
pub fn nuc_single(frame: &GrayFrame, t_amb: AmbientTemperature, weights: &WeightStore) -> Result<Grid2D> {
    let net = SingleNucNet::from_weights(weights)?;
    let mut g = Graph::new(vec![weights]);
    let out = net.forward(&mut g, 0, frame, t_amb)?;
    let t = g.value(out.temperature);
    if !t.all_finite() {
        return Err(contract("single-frame NUC produced non-finite temperatures"));
    }
    Ok(t.to_grid(0, Unit::Celsius))
}
