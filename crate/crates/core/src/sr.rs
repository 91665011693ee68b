//! ×2 / ×4 super resolution of temperature maps.
//!
//! Features extracted at low resolution go through two lanes: residual blocks
//! then pixel shuffle, and pixel shuffle directly. The lanes are concatenated,
//! fused to one channel, and added to the bicubic upscale of the input. The
//! network works on maps normalized over [`TEMP_RANGE`]; the skip stays in °C
//! so all-zero weights reproduce bicubic upscaling exactly.

use rand::Rng;

use crate::error::{contract, Error, Result};
use crate::graph::{Graph, Var};
use crate::grid::{Grid2D, Unit};
use crate::ops::{conv2d, leaky_relu, ConvKernel};
use crate::tensor::{Real, Tensor3};
use crate::weights::{ConvSpec, WeightStore};
use crate::{LEAKY_SLOPE, TEMP_RANGE};

#[derive(Clone, Debug, PartialEq)]
pub struct SrConfig {
    /// Upscaling factor, 2 or 4.
    pub scale: usize,
    /// Feature channels `C`; divisible by `scale²`.
    pub channels: usize,
    /// Residual blocks `R`.
    pub blocks: usize,
}

impl SrConfig {
    pub fn new(scale: usize) -> Self {
        Self { scale, channels: 32, blocks: 4 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SrNet {
    config: SrConfig,
}

impl SrNet {
    pub fn new(config: SrConfig) -> Result<Self> {
        if !matches!(config.scale, 2 | 4) {
            return Err(Error::Params(format!("scale must be 2 or 4, got {}", config.scale)));
        }
        let s2 = config.scale * config.scale;
        if config.channels == 0 || config.channels % s2 != 0 {
            return Err(Error::Params(format!("channels {} not a positive multiple of {s2}", config.channels)));
        }
        Ok(Self { config })
    }

    pub fn config(&self) -> &SrConfig {
        &self.config
    }

    pub fn scale(&self) -> usize {
        self.config.scale
    }

    fn extractor(&self) -> ConvSpec {
        ConvSpec::new("fe", 1, self.config.channels, 3)
    }

    fn block(&self, i: usize) -> [ConvSpec; 2] {
        let c = self.config.channels;
        [ConvSpec::new(format!("res.{i}.a"), c, c, 3), ConvSpec::new(format!("res.{i}.b"), c, c, 3)]
    }

    fn fusion(&self) -> ConvSpec {
        let s2 = self.config.scale * self.config.scale;
        ConvSpec::new("fusion", 2 * self.config.channels / s2, 1, 3)
    }

    fn specs(&self) -> Vec<ConvSpec> {
        let mut v = vec![self.extractor()];
        for i in 0..self.config.blocks {
            v.extend(self.block(i));
        }
        v.push(self.fusion());
        v
    }

    /// Random layers with a zero fusion conv, so the untrained net is bicubic.
    pub fn init(&self, rng: &mut impl Rng) -> WeightStore {
        let mut store = WeightStore::new();
        for spec in self.specs() {
            spec.init(&mut store, rng);
        }
        self.fusion().zeros(&mut store);
        store
    }

    pub fn zero_weights(&self) -> WeightStore {
        let mut store = WeightStore::new();
        for spec in self.specs() {
            spec.zeros(&mut store);
        }
        store
    }

    pub fn from_weights<R: Real>(store: &WeightStore<R>) -> Result<Self> {
        let fe = store.dims("fe.weight")?;
        let channels = fe[0];
        let fusion_in = store.dims("fusion.weight")?[1];
        let ratio = if fusion_in > 0 { 2 * channels / fusion_in } else { 0 };
        let scale = match ratio {
            4 if 2 * channels == 4 * fusion_in => 2,
            16 if 2 * channels == 16 * fusion_in => 4,
            _ => return Err(Error::Load(format!("fusion input {fusion_in} fits no scale for {channels} channels"))),
        };
        let blocks = store.count_layers("res", ".a");
        let net = Self::new(SrConfig { scale, channels, blocks }).map_err(|e| Error::Load(e.to_string()))?;
        net.check(store)?;
        Ok(net)
    }

    pub fn check<R: Real>(&self, store: &WeightStore<R>) -> Result<()> {
        for spec in self.specs() {
            spec.check(store)?;
        }
        Ok(())
    }

    /// Record the forward pass on a `1×h×w` temperature node (°C).
    pub fn forward<R: Real>(&self, g: &mut Graph<R>, set: usize, t_map: Var) -> Result<Var> {
        let (c, h, w) = g.value(t_map).shape();
        if c != 1 {
            return Err(contract("SR input must be a single-channel map"));
        }
        let s = self.config.scale;
        let span = TEMP_RANGE.1 - TEMP_RANGE.0;
        let x = g.affine(t_map, 1.0 / span, -TEMP_RANGE.0 / span);
        let fe = g.conv(x, set, &self.extractor())?;
        let features = g.leaky_relu(fe, LEAKY_SLOPE);
        let mut r = features;
        for i in 0..self.config.blocks {
            let [a, b] = self.block(i);
            let ya = g.conv(r, set, &a)?;
            let ya = g.leaky_relu(ya, LEAKY_SLOPE);
            let yb = g.conv(ya, set, &b)?;
            r = g.add(r, yb)?;
        }
        let lane_a = g.pixel_shuffle(r, s)?;
        let lane_b = g.pixel_shuffle(features, s)?;
        let both = g.concat(&[lane_a, lane_b])?;
        let fused = g.conv(both, set, &self.fusion())?;
        let residual = g.affine(fused, span, 0.0);
        let skip = g.resample(t_map, s * h, s * w);
        g.add(residual, skip)
    }
}

/// Super-resolve a temperature map by `s`.
pub fn sr_forward(t_map: &Grid2D, weights: &WeightStore, s: usize) -> Result<Grid2D> {
    let net = SrNet::from_weights(weights)?;
    if net.scale() != s {
        return Err(Error::Load(format!("weights are for x{}, asked for x{s}", net.scale())));
    }
    let mut g = Graph::new(vec![weights]);
    let x = g.leaf(Tensor3::from_grid(t_map));
    let y = net.forward(&mut g, 0, x)?;
    let out = g.value(y);
    if !out.all_finite() {
        return Err(contract("SR produced non-finite temperatures"));
    }
    Ok(out.to_grid(0, Unit::Celsius))
}

/// `x + conv_b(act(conv_a(x)))`.
pub fn residual_block<R: Real>(
    input: &Tensor3<R>,
    conv_a: &ConvKernel<R>,
    conv_b: &ConvKernel<R>,
) -> Result<Tensor3<R>> {
    let c = input.channels();
    if conv_a.in_channels() != c || conv_b.out_channels() != c || conv_a.out_channels() != conv_b.in_channels() {
        return Err(contract(format!("residual block convs do not map {c} channels back to {c}")));
    }
    let y = conv2d(&leaky_relu(&conv2d(input, conv_a)?, R::of(LEAKY_SLOPE)), conv_b)?;
    let (c, h, w) = input.shape();
    Tensor3::new(c, h, w, input.data().iter().zip(y.data()).map(|(&a, &b)| a + b).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::bicubic_resample;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn map(h: usize, w: usize) -> Grid2D {
        Grid2D::from_fn(h, w, Unit::Celsius, |y, x| 15.0 + ((y * 5 + x * 3) % 9) as f32 * 1.7)
    }

    #[test]
    fn zero_weights_are_bicubic() {
        for s in [2, 4] {
            let net = SrNet::new(SrConfig { scale: s, channels: 16, blocks: 2 }).unwrap();
            let t = map(5, 7);
            let out = sr_forward(&t, &net.zero_weights(), s).unwrap();
            assert_eq!(out, bicubic_resample(&t, s as f64).unwrap());
        }
    }

    #[test]
    fn branch_accounts_for_the_difference() {
        let net = SrNet::new(SrConfig { scale: 2, channels: 8, blocks: 1 }).unwrap();
        let mut w = net.init(&mut ChaCha8Rng::seed_from_u64(3));
        for v in &mut w.get_mut("fusion.weight").unwrap().values {
            *v = 0.05;
        }
        let t = map(6, 6);
        let out = sr_forward(&t, &w, 2).unwrap();
        assert_eq!(out.dims(), (12, 12));
        let mut g = Graph::new(vec![&w]);
        let x = g.leaf(Tensor3::from_grid(&t));
        let y = net.forward(&mut g, 0, x).unwrap();
        assert_eq!(g.value(y).to_grid(0, Unit::Celsius), out);
        let bic = bicubic_resample(&t, 2.0).unwrap();
        assert!(out.values().iter().zip(bic.values()).any(|(a, b)| (a - b).abs() > 1e-3));
    }

    #[test]
    fn scale_mismatch_is_a_load_error() {
        let net = SrNet::new(SrConfig { scale: 2, channels: 16, blocks: 1 }).unwrap();
        assert!(matches!(sr_forward(&map(4, 4), &net.zero_weights(), 4), Err(Error::Load(_))));
        let net4 =
            SrNet::from_weights(&SrNet::new(SrConfig { scale: 4, channels: 16, blocks: 3 }).unwrap().zero_weights())
                .unwrap();
        assert_eq!(net4.config(), &SrConfig { scale: 4, channels: 16, blocks: 3 });
        assert!(SrNet::new(SrConfig { scale: 4, channels: 8, blocks: 1 }).is_err());
        assert!(SrNet::new(SrConfig { scale: 3, channels: 9, blocks: 1 }).is_err());
    }

    #[test]
    fn zero_residual_blocks_are_identity() {
        let x = Tensor3::new(3, 4, 4, (0..48).map(|v| v as f32 * 0.1 - 2.0).collect()).unwrap();
        let z = ConvKernel::zeros(3, 3, 3);
        let mut y = x.clone();
        for _ in 0..3 {
            y = residual_block(&y, &z, &z).unwrap();
        }
        assert_eq!(y, x);
        assert!(residual_block(&x, &ConvKernel::zeros(3, 2, 3), &z).is_err());
    }
}
