//! Multiframe NUC: per-pixel kernel fusion of a registered burst.
//!
//! A linear head estimates the scene mean from burst statistics and the
//! ambient temperature. A calibration trunk reads the centered reference frame
//! and predicts per-pixel gain and offset maps, which are applied to every
//! frame in sensor coordinates so the fixed pattern is removed before the
//! frames move. The calibrated frames are then shifted onto frame 0, centered
//! on the mean estimate and passed, together with the reference, through a
//! shared conv trunk that emits `k²` kernel logits per pixel. One softmax over
//! all `N·k²` logits yields convex fusion weights.

use rand::Rng;

use super::{
    conv_stack, register_burst, sensor_planes, span, stack, unit_gain_bias, GrayNorm, PreparedFrames, GAIN_EPS,
    SENSOR_PLANES,
};
use crate::error::{contract, Error, Result};
use crate::graph::{Graph, Var};
use crate::grid::{GrayFrame, Grid2D, Unit};
use crate::simulator::{AmbientTemperature, Burst};
use crate::tensor::{Real, Tensor3};
use crate::weights::{ConvSpec, ParamTensor, WeightStore};
use crate::TEMP_RANGE;

/// Inputs of the mean head: `[m, mτ, mτ², mτ³, τ, τ², τ³]`.
const MEAN_FEATURES: usize = 7;

/// Initial logit lead of every frame's center tap.
const CENTER_LOGIT: f32 = 6.0;

#[derive(Clone, Debug, PartialEq)]
pub struct MultiNucConfig {
    pub depth: usize,
    pub width: usize,
    /// Fusion kernel size (odd).
    pub k: usize,
    /// Coarsely align frames before fusion.
    pub register: bool,
    pub max_shift: usize,
    pub norm: GrayNorm,
}

impl Default for MultiNucConfig {
    fn default() -> Self {
        Self { depth: 6, width: 32, k: 5, register: true, max_shift: 4, norm: GrayNorm::default() }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct MultiOutput {
    /// Estimated temperature, °C.
    pub temperature: Var,
    /// Softmax fusion weights, `N·k² × h × w`.
    pub weights: Var,
    /// Scene-mean estimate in network units.
    pub mean: Var,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MultiNucNet {
    config: MultiNucConfig,
}

impl MultiNucNet {
    /// Per-frame kernel inputs: centered frame, centered reference, sensor planes.
    pub const INPUTS: usize = 2 + SENSOR_PLANES;
    /// Calibration inputs: centered reference, sensor planes.
    pub const CALIB_INPUTS: usize = 1 + SENSOR_PLANES;

    pub fn new(config: MultiNucConfig) -> Result<Self> {
        if config.depth == 0 || config.width == 0 {
            return Err(Error::Params("multiframe NUC net needs depth and width >= 1".into()));
        }
        if config.k % 2 == 0 {
            return Err(Error::Params(format!("fusion kernel size must be odd, got {}", config.k)));
        }
        config.norm.validate()?;
        Ok(Self { config })
    }

    pub fn config(&self) -> &MultiNucConfig {
        &self.config
    }

    fn stack_specs(&self, prefix: &str, inputs: usize) -> Vec<ConvSpec> {
        (0..self.config.depth)
            .map(|i| {
                let cin = if i == 0 { inputs } else { self.config.width };
                ConvSpec::new(format!("{prefix}.{i}"), cin, self.config.width, 3)
            })
            .collect()
    }

    fn trunk(&self) -> Vec<ConvSpec> {
        self.stack_specs("kernel.trunk", Self::INPUTS)
    }

    fn calib(&self) -> Vec<ConvSpec> {
        self.stack_specs("calib.trunk", Self::CALIB_INPUTS)
    }

    fn logits(&self) -> ConvSpec {
        ConvSpec::new("kernel.logits", self.config.width, self.config.k * self.config.k, 3)
    }

    fn gain_head(&self) -> ConvSpec {
        ConvSpec::new("gain_head", self.config.width, 1, 3)
    }

    fn offset_head(&self) -> ConvSpec {
        ConvSpec::new("offset_head", self.config.width, 1, 3)
    }

    fn with_heads(&self, mut store: WeightStore, center: f32) -> WeightStore {
        let kk = self.config.k * self.config.k;
        self.logits().zeros(&mut store);
        let mut bias = vec![0.0; kk];
        bias[kk / 2] = center;
        store.insert(self.logits().bias_name(), ParamTensor { dims: vec![kk], values: bias });
        self.gain_head().zeros(&mut store);
        store
            .insert(self.gain_head().bias_name(), ParamTensor { dims: vec![1], values: vec![unit_gain_bias() as f32] });
        self.offset_head().zeros(&mut store);
        let mut w = vec![0.0; MEAN_FEATURES];
        w[0] = 1.0;
        store.insert("mean_head.weight", ParamTensor { dims: vec![MEAN_FEATURES], values: w });
        store.insert("mean_head.bias", ParamTensor::zeros(vec![1]));
        self.config.norm.store(&mut store);
        store.set_meta("register", if self.config.register { 1.0 } else { 0.0 });
        store.set_meta("max_shift", self.config.max_shift as f64);
        store
    }

    /// Random trunk; fusion starts near the center taps of every frame with unit gain.
    pub fn init(&self, rng: &mut impl Rng) -> WeightStore {
        let mut store = WeightStore::new();
        for spec in self.trunk().into_iter().chain(self.calib()) {
            spec.init(&mut store, rng);
        }
        self.with_heads(store, CENTER_LOGIT)
    }

    /// Zero trunk, fusion weights a hard delta on each frame's center pixel.
    pub fn identity_weights(&self) -> WeightStore {
        let mut store = WeightStore::new();
        for spec in self.trunk().into_iter().chain(self.calib()) {
            spec.zeros(&mut store);
        }
        self.with_heads(store, 60.0)
    }

    pub fn from_weights<R: Real>(store: &WeightStore<R>) -> Result<Self> {
        let depth = store.count_layers("kernel.trunk", "");
        if depth == 0 {
            return Err(Error::Load("no `kernel.trunk.0` layer; not a multiframe NUC store".into()));
        }
        let width = store.dims("kernel.trunk.0.weight")?[0];
        let kk = store.dims("kernel.logits.weight")?[0];
        let k = (kk as f64).sqrt().round() as usize;
        if k * k != kk {
            return Err(Error::Load(format!("kernel.logits emits {kk} channels, not a square")));
        }
        let config = MultiNucConfig {
            depth,
            width,
            k,
            register: store.meta("register")? != 0.0,
            max_shift: store.meta("max_shift")? as usize,
            norm: GrayNorm::load(store)?,
        };
        let net = Self::new(config).map_err(|e| Error::Load(e.to_string()))?;
        net.check(store)?;
        Ok(net)
    }

    pub fn check<R: Real>(&self, store: &WeightStore<R>) -> Result<()> {
        for spec in
            self.trunk().iter().chain(&self.calib()).chain([&self.logits(), &self.gain_head(), &self.offset_head()])
        {
            spec.check(store)?;
        }
        store.expect("mean_head.weight", &[MEAN_FEATURES])?;
        store.expect("mean_head.bias", &[1])?;
        Ok(())
    }

    fn mean_features(&self, frames: &[GrayFrame], t_amb: AmbientTemperature) -> [f64; MEAN_FEATURES] {
        let n: usize = frames.iter().map(|f| f.levels().len()).sum();
        let total: f64 = frames.iter().flat_map(|f| f.levels()).map(|&l| self.config.norm.unit(l as f64)).sum();
        let m = total / n as f64;
        let t = t_amb.normalized();
        [m, m * t, m * t * t, m * t * t * t, t, t * t, t * t * t]
    }

    /// Raw frames with their shifts onto frame 0 (zero when registration is off).
    pub fn prepare(&self, burst: &Burst) -> Result<PreparedFrames> {
        let shifts = if self.config.register && burst.len() > 1 {
            register_burst(burst, self.config.max_shift)?.shifts
        } else {
            vec![(0, 0); burst.len()]
        };
        Ok(PreparedFrames { frames: burst.frames.clone(), shifts })
    }

    /// Record the forward pass over prepared frames.
    pub fn forward<R: Real>(
        &self,
        g: &mut Graph<R>,
        set: usize,
        input: &PreparedFrames,
        t_amb: AmbientTemperature,
    ) -> Result<MultiOutput> {
        let frames = &input.frames;
        if frames.is_empty() {
            return Err(contract("multiframe NUC needs at least one frame"));
        }
        if input.shifts.len() != frames.len() {
            return Err(contract(format!("{} shifts for {} frames", input.shifts.len(), frames.len())));
        }
        let (h, w) = frames[0].dims();
        if frames.iter().any(|f| f.dims() != (h, w)) {
            return Err(contract("burst frames differ in size"));
        }
        let norm = self.config.norm;
        let feats = self.mean_features(frames, t_amb);
        let feats = g.leaf(Tensor3::new(MEAN_FEATURES, 1, 1, feats.iter().map(|&v| R::of(v)).collect())?);
        let mean = g.linear(feats, set, "mean_head")?;
        let neg_mean = g.affine(mean, -1.0, 0.0);
        let aux = g.leaf(stack(h, w, sensor_planes(h, w, t_amb))?);

        let raw: Vec<Var> = frames
            .iter()
            .map(|f| {
                let plane = f.levels().iter().map(|&l| R::of(norm.unit(l as f64))).collect();
                Tensor3::new(1, h, w, plane).map(|t| g.leaf(t))
            })
            .collect::<Result<_>>()?;
        let reference = g.add_scalar(raw[0], neg_mean)?;
        let x = g.concat(&[reference, aux])?;
        let cf = conv_stack(g, x, set, &self.calib())?;
        let raw_gain = g.conv(cf, set, &self.gain_head())?;
        let sp = g.softplus(raw_gain);
        let gain = g.affine(sp, 1.0, GAIN_EPS);
        let raw_offset = g.conv(cf, set, &self.offset_head())?;
        let offset = g.affine(raw_offset, norm.offset_span / (norm.gain_ref * span()), 0.0);

        let mut centered = Vec::with_capacity(frames.len());
        for (&r, &(dy, dx)) in raw.iter().zip(&input.shifts) {
            let scaled = g.mul(gain, r)?;
            let calibrated = g.add(scaled, offset)?;
            let aligned = g.shift(calibrated, dy, dx);
            centered.push(g.add_scalar(aligned, neg_mean)?);
        }

        let mut logits = Vec::with_capacity(frames.len());
        for &c in &centered {
            let x = g.concat(&[c, centered[0], aux])?;
            let feats = conv_stack(g, x, set, &self.trunk())?;
            logits.push(g.conv(feats, set, &self.logits())?);
        }
        let all = g.concat(&logits)?;
        let weights = g.channel_softmax(all);
        let stacked = g.concat(&centered)?;
        let fused = g.local_fuse(weights, stacked, self.config.k)?;
        let t_unit = g.add_scalar(fused, mean)?;
        let temperature = g.affine(t_unit, span(), TEMP_RANGE.0);
        Ok(MultiOutput { temperature, weights, mean })
    }
}

/// Scene-mean temperature estimate of a burst, °C.
pub fn estimate_mean_temp(burst: &Burst, t_amb: AmbientTemperature, weights: &WeightStore) -> Result<f64> {
    let net = MultiNucNet::from_weights(weights)?;
    let feats = net.mean_features(&burst.frames, t_amb);
    let w = &weights.expect("mean_head.weight", &[MEAN_FEATURES])?.values;
    let b = weights.expect("mean_head.bias", &[1])?.values[0] as f64;
    let unit: f64 = feats.iter().zip(w).map(|(f, w)| f * *w as f64).sum::<f64>() + b;
    Ok(TEMP_RANGE.0 + span() * unit)
}

/// Temperature map seen by frame 0 of the burst, °C.
pub fn nuc_multi(burst: &Burst, t_amb: AmbientTemperature, weights: &WeightStore) -> Result<Grid2D> {
    let net = MultiNucNet::from_weights(weights)?;
    let frames = net.prepare(burst)?;
    let mut g = Graph::new(vec![weights]);
    let out = net.forward(&mut g, 0, &frames, t_amb)?;
    let t = g.value(out.temperature);
    if !t.all_finite() {
        return Err(contract("multiframe NUC produced non-finite temperatures"));
    }
    Ok(t.to_grid(0, Unit::Celsius))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn amb() -> AmbientTemperature {
        AmbientTemperature::new(30.0).unwrap()
    }

    fn frame(seed: u16) -> GrayFrame {
        GrayFrame::new(7, 9, (0..63).map(|v| 20 + ((v * 7 + seed) % 13)).collect(), Some(30.0)).unwrap()
    }

    fn small(register: bool) -> MultiNucNet {
        MultiNucNet::new(MultiNucConfig { depth: 2, width: 4, k: 3, register, ..Default::default() }).unwrap()
    }

    #[test]
    fn delta_kernel_single_frame_is_identity() {
        let net = small(true);
        let w = net.identity_weights();
        let f = frame(0);
        let b = Burst::new(vec![f.clone()], amb()).unwrap();
        let t = nuc_multi(&b, amb(), &w).unwrap();
        for (a, l) in t.values().iter().zip(f.levels()) {
            assert!((a - *l as f32).abs() < 1e-4, "{a} vs {l}");
        }
    }

    #[test]
    fn fusion_weights_are_normalized_and_convex() {
        let net = small(false);
        let w = net.init(&mut ChaCha8Rng::seed_from_u64(2));
        let b = Burst::new(vec![frame(0), frame(3), frame(5)], amb()).unwrap();
        let mut g = Graph::new(vec![&w]);
        let out = net.forward(&mut g, 0, &net.prepare(&b).unwrap(), amb()).unwrap();
        let wt = g.value(out.weights);
        let (c, h, ww) = wt.shape();
        for p in 0..h * ww {
            let s: f64 = (0..c).map(|ch| wt.data()[ch * h * ww + p] as f64).sum();
            assert!((s - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn duplicate_frames_do_not_change_output() {
        let net = small(false);
        let w = net.init(&mut ChaCha8Rng::seed_from_u64(4));
        let one = Burst::new(vec![frame(1)], amb()).unwrap();
        let many = Burst::new(vec![frame(1); 5], amb()).unwrap();
        let a = nuc_multi(&one, amb(), &w).unwrap();
        let b = nuc_multi(&many, amb(), &w).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() < 1e-4);
        }
    }

    #[test]
    fn mean_head_contract() {
        let net = small(true);
        let mut w = net.init(&mut ChaCha8Rng::seed_from_u64(0));
        let b = Burst::new(vec![frame(0), frame(2)], amb()).unwrap();
        let naive: f64 = b.frames.iter().flat_map(|f| f.levels()).map(|&l| l as f64).sum::<f64>() / 126.0;
        assert!((estimate_mean_temp(&b, amb(), &w).unwrap() - naive).abs() < 1e-4);
        w.get_mut("mean_head.weight").unwrap().values.iter_mut().for_each(|v| *v = 0.0);
        w.get_mut("mean_head.bias").unwrap().values[0] = 0.25;
        let est = estimate_mean_temp(&b, amb(), &w).unwrap();
        assert!((est - (TEMP_RANGE.0 + span() * 0.25)).abs() < 1e-9);
        let swapped = Burst::new(vec![frame(2), frame(0)], amb()).unwrap();
        assert_eq!(estimate_mean_temp(&swapped, amb(), &w).unwrap(), est);
    }

    #[test]
    fn config_is_recovered_from_weights() {
        let net = small(false);
        let w = net.identity_weights();
        assert_eq!(MultiNucNet::from_weights(&w).unwrap(), net);
    }
}
