//! Synthetic training pairs: ground truth downscaled, then run through the camera model.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::NucMode;
use crate::error::{contract, Error, Result};
use crate::grid::Grid2D;
use crate::ops::downscale_gt;
use crate::pipeline::NucInput;
use crate::simulator::{simulate_frame, synth_burst, AmbientTemperature, CameraParams, MotionConfig};

const AMBIENT_SALT: u64 = 0x616d_6269_656e_74;

/// How ground-truth maps become network inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct DataConfig {
    pub scale: usize,
    pub mode: NucMode,
    pub params: CameraParams,
    /// Burst geometry; only the multiframe mode reads it.
    pub motion: MotionConfig,
    /// `T_amb` drawn uniformly from this range when a scene carries none, °C.
    pub ambient: (f64, f64),
    /// Keys ambient draws and the train/validation split.
    pub seed: u64,
    pub val_fraction: f64,
}

impl DataConfig {
    pub fn new(scale: usize, mode: NucMode, params: CameraParams) -> Self {
        Self {
            scale,
            mode,
            params,
            motion: MotionConfig::translations(4, 3),
            ambient: (0.0, 45.0),
            seed: 0,
            val_fraction: 0.2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !matches!(self.scale, 2 | 4) {
            return Err(Error::Params(format!("scale must be 2 or 4, got {}", self.scale)));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(Error::Params(format!("validation fraction {} not in (0, 1)", self.val_fraction)));
        }
        AmbientTemperature::new(self.ambient.0)?;
        AmbientTemperature::new(self.ambient.1)?;
        if self.ambient.0 > self.ambient.1 {
            return Err(Error::Params(format!("empty ambient range {:?}", self.ambient)));
        }
        Ok(())
    }

    /// Ambient temperature of scene `index` when the scene does not fix one.
    pub fn ambient_for(&self, index: u64) -> AmbientTemperature {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ AMBIENT_SALT);
        rng.set_stream(index);
        let (lo, hi) = self.ambient;
        let v = if hi > lo { rng.random_range(lo..=hi) } else { lo };
        AmbientTemperature::new(v).expect("range validated")
    }
}

/// Ground-truth map with the ambient temperature it was captured at, if known.
#[derive(Clone, Debug, PartialEq)]
pub struct GtScene {
    pub map: Grid2D,
    pub t_amb: Option<AmbientTemperature>,
}

/// One training example.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub input: NucInput,
    pub t_amb: AmbientTemperature,
    /// Clean temperature at input resolution (what NUC should output), °C.
    pub lr_target: Grid2D,
    /// High-resolution target, °C.
    pub target: Grid2D,
}

/// Downscale `gt` by the configured scale and simulate the camera on it.
/// `index` keys the sensor noise and burst motion. In multiframe mode the
/// targets are the center crop seen by frame 0.
pub fn make_training_pair(gt: &Grid2D, t_amb: AmbientTemperature, cfg: &DataConfig, index: u64) -> Result<Sample> {
    let s = cfg.scale;
    let lr = downscale_gt(gt, s)?;
    match cfg.mode {
        NucMode::Single => {
            let frame = simulate_frame(&lr, t_amb, &cfg.params, index)?.frame;
            Ok(Sample { input: NucInput::Frame(frame), t_amb, lr_target: lr, target: gt.clone() })
        }
        NucMode::Multi(n) => {
            let burst = synth_burst(&lr, t_amb, n, &cfg.motion, &cfg.params, index)?;
            let (h, w) = burst.dims();
            let target = gt.center_crop(h * s, w * s)?;
            let lr_target = burst.true_map.clone().ok_or_else(|| contract("synthetic burst lost its true map"))?;
            Ok(Sample { input: NucInput::Burst(burst), t_amb, lr_target, target })
        }
    }
}

/// Training and validation samples built from disjoint source maps.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub train: Vec<Sample>,
    pub val: Vec<Sample>,
    /// Source-map index of every validation sample.
    pub val_indices: Vec<usize>,
}

impl Dataset {
    pub fn build(scenes: &[GtScene], cfg: &DataConfig) -> Result<Self> {
        cfg.validate()?;
        if scenes.len() < 2 {
            return Err(contract("a dataset needs at least two scenes"));
        }
        let samples: Vec<Sample> = scenes
            .par_iter()
            .enumerate()
            .map(|(i, sc)| {
                let t_amb = sc.t_amb.unwrap_or_else(|| cfg.ambient_for(i as u64));
                make_training_pair(&sc.map, t_amb, cfg, i as u64)
            })
            .collect::<Result<_>>()?;
        let (train_idx, val_idx) = split(scenes.len(), cfg.val_fraction, cfg.seed);
        let mut slots: Vec<Option<Sample>> = samples.into_iter().map(Some).collect();
        let mut take =
            |idx: &[usize]| -> Vec<Sample> { idx.iter().map(|&i| slots[i].take().expect("disjoint split")).collect() };
        let train = take(&train_idx);
        let val = take(&val_idx);
        Ok(Self { train, val, val_indices: val_idx })
    }
}

/// Sorted train and validation indices; validation gets `round(n·fraction)`
/// maps, at least one, leaving at least one for training.
pub fn split(n: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let n_val = ((n as f64 * fraction).round() as usize).clamp(1, n.saturating_sub(1).max(1));
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut val = order[..n_val].to_vec();
    let mut train = order[n_val..].to_vec();
    val.sort_unstable();
    train.sort_unstable();
    (train, val)
}
