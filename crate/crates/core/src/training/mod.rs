//! Pretraining and end-to-end fine-tuning of the NUC and SR networks.
//!
//! Per-sample forward/backward passes run in parallel; gradients are summed in
//! batch order, so a run is a deterministic function of its seed regardless of
//! the thread count.

mod data;
mod log;
mod optim;

pub use data::{make_training_pair, split, DataConfig, Dataset, GtScene, Sample};
pub use log::{LogRow, TrainLog, LOG_HEADER};
pub use optim::{AdamW, PlateauScheduler};

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{contract, Error, Result};
use crate::graph::{Gradients, Graph, Var};
use crate::grid::{Grid2D, Unit};
use crate::metrics::{self, SsimParams};
use crate::nuc::{GrayNorm, MultiNucConfig, MultiNucNet, PreparedFrames, SingleNucConfig, SingleNucNet};
use crate::pipeline::{NucStage, Pipeline};
use crate::sr::{SrConfig, SrNet};
use crate::tensor::{Real, Tensor3};
use crate::weights::WeightStore;
use crate::TEMP_RANGE;

/// Weight of the SSIM term in the reconstruction loss.
pub const SSIM_WEIGHT: f64 = 1e-3;

/// Weight of the scene-mean term added for multiframe NUC, per °C of error.
pub const MEAN_AUX_WEIGHT: f64 = 0.5;

/// Single-frame or `N`-frame NUC.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NucMode {
    Single,
    Multi(usize),
}

impl NucMode {
    pub fn is_multi(self) -> bool {
        matches!(self, Self::Multi(_))
    }
}

impl fmt::Display for NucMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Single => write!(f, "single"),
            Self::Multi(n) => write!(f, "multi{n}"),
        }
    }
}

impl FromStr for NucMode {
    type Err = Error;

    /// `single`, `multi` (7 frames) or `multiN`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" => Ok(Self::Single),
            "multi" => Ok(Self::Multi(7)),
            _ => match s.strip_prefix("multi").map(str::parse::<usize>) {
                Some(Ok(n)) if n >= 1 => Ok(Self::Multi(n)),
                _ => Err(Error::Params(format!("unknown NUC mode `{s}`; use single, multi or multiN"))),
            },
        }
    }
}

/// Network sizes used when training starts from scratch.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub nuc_depth: usize,
    pub nuc_width: usize,
    /// Multiframe fusion kernel size.
    pub fusion_k: usize,
    pub register: bool,
    pub max_shift: usize,
    pub norm: GrayNorm,
    pub sr_channels: usize,
    pub sr_blocks: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            nuc_depth: 6,
            nuc_width: 32,
            fusion_k: 5,
            register: true,
            max_shift: 4,
            norm: GrayNorm::default(),
            sr_channels: 32,
            sr_blocks: 4,
        }
    }
}

impl ModelConfig {
    pub fn nuc_stage(&self, mode: NucMode) -> Result<NucStage> {
        Ok(match mode {
            NucMode::Single => NucStage::Single(SingleNucNet::new(SingleNucConfig {
                depth: self.nuc_depth,
                width: self.nuc_width,
                norm: self.norm,
            })?),
            NucMode::Multi(_) => NucStage::Multi(MultiNucNet::new(MultiNucConfig {
                depth: self.nuc_depth,
                width: self.nuc_width,
                k: self.fusion_k,
                register: self.register,
                max_shift: self.max_shift,
                norm: self.norm,
            })?),
        })
    }

    pub fn sr_net(&self, scale: usize) -> Result<SrNet> {
        SrNet::new(SrConfig { scale, channels: self.sr_channels, blocks: self.sr_blocks })
    }

    /// Fresh weights for both stages.
    pub fn init(&self, mode: NucMode, scale: usize, seed: u64) -> Result<PipelineWeights> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nuc = match self.nuc_stage(mode)? {
            NucStage::Single(n) => n.init(&mut rng),
            NucStage::Multi(n) => n.init(&mut rng),
        };
        let sr = self.sr_net(scale)?.init(&mut rng);
        Ok(PipelineWeights { nuc, sr })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub scale: usize,
    pub nuc_mode: NucMode,
    pub lr_sr: f64,
    pub lr_nuc: f64,
    pub plateau_factor: f64,
    pub plateau_patience: usize,
    /// Validation MAE improvement (°C) that resets the plateau count.
    pub plateau_threshold: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub weight_decay: f64,
    /// Keys initialization and data order.
    pub seed: u64,
    pub model: ModelConfig,
}

impl TrainConfig {
    pub fn new(scale: usize, nuc_mode: NucMode) -> Self {
        Self {
            scale,
            nuc_mode,
            lr_sr: 1e-4,
            lr_nuc: 4e-5,
            plateau_factor: 0.5,
            plateau_patience: 3,
            plateau_threshold: 1e-4,
            batch_size: 8,
            epochs: 60,
            weight_decay: 1e-2,
            seed: 0,
            model: ModelConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Params(m));
        if !matches!(self.scale, 2 | 4) {
            return bad(format!("scale must be 2 or 4, got {}", self.scale));
        }
        for (name, lr) in [("lr_sr", self.lr_sr), ("lr_nuc", self.lr_nuc)] {
            if !(lr > 0.0 && lr.is_finite()) {
                return bad(format!("{name} must be > 0, got {lr}"));
            }
        }
        if !(self.plateau_factor > 0.0 && self.plateau_factor < 1.0) {
            return bad(format!("plateau factor {} not in (0, 1)", self.plateau_factor));
        }
        if self.plateau_patience == 0 || self.batch_size == 0 || self.epochs == 0 {
            return bad("patience, batch size and epochs must be >= 1".into());
        }
        if !(self.weight_decay >= 0.0) || !(self.plateau_threshold >= 0.0) {
            return bad("weight decay and plateau threshold must be >= 0".into());
        }
        if let NucMode::Multi(0) = self.nuc_mode {
            return bad("multiframe mode needs at least one frame".into());
        }
        Ok(())
    }
}

/// Weights of the two stages.
#[derive(Clone, Debug, PartialEq)]
pub struct PipelineWeights {
    pub nuc: WeightStore,
    pub sr: WeightStore,
}

/// Result of a training run.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome<W> {
    pub final_weights: W,
    /// Weights after the epoch with the lowest validation MAE.
    pub best_weights: W,
    pub best_val_mae: f64,
    pub best_epoch: usize,
    pub log: TrainLog,
}

impl<W> TrainOutcome<W> {
    fn map<V>(self, f: impl Fn(W) -> V) -> TrainOutcome<V> {
        TrainOutcome {
            final_weights: f(self.final_weights),
            best_weights: f(self.best_weights),
            best_val_mae: self.best_val_mae,
            best_epoch: self.best_epoch,
            log: self.log,
        }
    }
}

/// Module trained in isolation by [`pretrain_module`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Module {
    Nuc,
    Sr,
}

impl FromStr for Module {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nuc" => Ok(Self::Nuc),
            "sr" => Ok(Self::Sr),
            _ => Err(Error::Params(format!("unknown module `{s}`; use nuc or sr"))),
        }
    }
}

fn norm_params() -> (f64, f64) {
    let span = TEMP_RANGE.1 - TEMP_RANGE.0;
    (1.0 / span, -TEMP_RANGE.0 / span)
}

/// SSIM settings of the loss: maps normalized over [`TEMP_RANGE`], unit range.
pub fn loss_ssim_params() -> SsimParams {
    SsimParams::new(11, 1.5, 0.01, 0.03, 1.0)
}

/// Record `MAE(sr, gt) + 1e-3·(1 − SSIM)/2` with SSIM on normalized maps.
pub fn loss_node<R: Real>(g: &mut Graph<R>, sr: Var, gt: Var) -> Result<Var> {
    let (a, b) = norm_params();
    let mae = g.mae(sr, gt)?;
    let ns = g.affine(sr, a, b);
    let ng = g.affine(gt, a, b);
    let ssim = g.ssim_loss(ns, ng, loss_ssim_params())?;
    let ssim = g.affine(ssim, SSIM_WEIGHT, 0.0);
    g.add(mae, ssim)
}

/// Reconstruction loss of an SR output against ground truth, both °C.
pub fn loss(sr: &Grid2D, gt: &Grid2D) -> Result<f64> {
    if sr.dims() != gt.dims() {
        return Err(contract(format!("loss dims differ: {:?} vs {:?}", sr.dims(), gt.dims())));
    }
    let mut g = Graph::<f64>::new(Vec::new());
    let x = g.leaf(Tensor3::<f64>::from_grid(sr));
    let y = g.leaf(Tensor3::<f64>::from_grid(gt));
    let l = loss_node(&mut g, x, y)?;
    Ok(g.scalar(l))
}

fn grid_leaf<R: Real>(g: &mut Graph<R>, grid: &Grid2D) -> Var {
    g.leaf(Tensor3::from_grid(grid))
}

/// `loss + MEAN_AUX_WEIGHT·|T̄ − mean(target)|` when the stage estimates a scene mean.
fn with_mean_term<R: Real>(g: &mut Graph<R>, loss: Var, mean: Option<Var>, lr_target: &Grid2D) -> Result<Var> {
    let Some(mean) = mean else { return Ok(loss) };
    let span = TEMP_RANGE.1 - TEMP_RANGE.0;
    let m = g.affine(mean, span, TEMP_RANGE.0);
    let t = g.leaf(Tensor3::filled(1, 1, 1, R::of(lr_target.mean())));
    let err = g.mae(m, t)?;
    let err = g.affine(err, MEAN_AUX_WEIGHT, 0.0);
    g.add(loss, err)
}

fn check_dataset(cfg: &TrainConfig, data: &Dataset) -> Result<()> {
    if data.train.is_empty() || data.val.is_empty() {
        return Err(contract("dataset needs training and validation samples"));
    }
    for s in data.train.iter().chain(&data.val) {
        let (h, w) = s.lr_target.dims();
        if s.input.dims() != (h, w) || s.target.dims() != (h * cfg.scale, w * cfg.scale) {
            return Err(contract(format!(
                "sample dims {:?} -> {:?} do not match scale {}",
                s.input.dims(),
                s.target.dims(),
                cfg.scale
            )));
        }
    }
    Ok(())
}

fn prepare_all(stage: &NucStage, samples: &[Sample]) -> Result<Vec<PreparedFrames>> {
    samples.par_iter().map(|s| stage.prepare(&s.input)).collect()
}

fn mean_in_order(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn check_mode(cfg: &TrainConfig, stage: &NucStage) -> Result<()> {
    if stage.is_multi() != cfg.nuc_mode.is_multi() {
        return Err(Error::Load(format!("NUC weights do not match mode {}", cfg.nuc_mode)));
    }
    Ok(())
}

fn check_scale(cfg: &TrainConfig, sr: &SrNet) -> Result<()> {
    if sr.scale() != cfg.scale {
        return Err(Error::Load(format!("SR weights are for x{}, config asks for x{}", sr.scale(), cfg.scale)));
    }
    Ok(())
}

#[derive(Clone, Copy, PartialEq)]
enum Role {
    Nuc,
    Sr,
}

/// Shared epoch loop over `n_train` samples.
fn fit<L, V>(
    cfg: &TrainConfig,
    mut stores: Vec<WeightStore>,
    roles: &[Role],
    n_train: usize,
    sample_loss: L,
    validate: V,
) -> Result<TrainOutcome<Vec<WeightStore>>>
where
    L: Fn(&[&WeightStore], usize) -> Result<(f64, Gradients)> + Sync,
    V: Fn(&[&WeightStore]) -> Result<f64>,
{
    let base = |r: Role| if r == Role::Nuc { cfg.lr_nuc } else { cfg.lr_sr };
    let mut opts: Vec<AdamW> =
        stores.iter().zip(roles).map(|(s, &r)| AdamW::new(base(r), cfg.weight_decay, s)).collect::<Result<_>>()?;
    let mut sched = PlateauScheduler::new(cfg.plateau_factor, cfg.plateau_patience, cfg.plateau_threshold)?;
    let mut log = TrainLog::new();
    let mut best = (f64::INFINITY, 0, stores.clone());
    let mut order: Vec<usize> = (0..n_train).collect();

    for epoch in 1..=cfg.epochs {
        let scale = sched.scale();
        for (o, &r) in opts.iter_mut().zip(roles) {
            o.lr = base(r) * scale;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(epoch as u64);
        order.sort_unstable();
        order.shuffle(&mut rng);

        let mut epoch_losses = Vec::with_capacity(n_train);
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let refs: Vec<&WeightStore> = stores.iter().collect();
            let results: Vec<(f64, Gradients)> =
                batch.par_iter().map(|&i| sample_loss(&refs, i)).collect::<Result<_>>()?;
            let mut total = Gradients::zeros(&refs);
            let mut batch_loss = 0.0;
            for (l, gr) in &results {
                batch_loss += l;
                total.accumulate(gr);
            }
            if !batch_loss.is_finite() || !total.all_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: b + 1 });
            }
            total.scale(1.0 / batch.len() as f64);
            for (k, (store, opt)) in stores.iter_mut().zip(&mut opts).enumerate() {
                opt.step(store, total.set(k))?;
            }
            epoch_losses.extend(results.iter().map(|r| r.0));
        }

        let refs: Vec<&WeightStore> = stores.iter().collect();
        let val = validate(&refs)?;
        let train_loss = mean_in_order(&epoch_losses);
        log.push(LogRow { epoch, train_loss, val_mae: val, lr_sr: cfg.lr_sr * scale, lr_nuc: cfg.lr_nuc * scale })?;
        ::log::info!("epoch {epoch}: train loss {train_loss:.5}, val MAE {val:.4} °C");
        if !val.is_finite() {
            return Err(Error::NonFiniteLoss { epoch, batch: 0 });
        }
        if val < best.0 {
            best = (val, epoch, stores.clone());
        }
        if sched.observe(val) {
            ::log::info!("plateau after epoch {epoch}: learning rates x{}", cfg.plateau_factor);
        }
    }
    Ok(TrainOutcome { final_weights: stores, best_weights: best.2, best_val_mae: best.0, best_epoch: best.1, log })
}

fn par_val(n: usize, f: impl Fn(usize) -> Result<f64> + Sync + Send) -> Result<f64> {
    let v: Vec<f64> = (0..n).into_par_iter().map(f).collect::<Result<_>>()?;
    Ok(mean_in_order(&v))
}

/// Train one module alone. NUC learns gray → LR temperature under MAE; SR
/// learns clean LR temperature → HR under the reconstruction loss.
pub fn pretrain_module(
    which: Module,
    cfg: &TrainConfig,
    data: &Dataset,
    init: Option<WeightStore>,
) -> Result<TrainOutcome<WeightStore>> {
    cfg.validate()?;
    check_dataset(cfg, data)?;
    let fresh = || cfg.model.init(cfg.nuc_mode, cfg.scale, cfg.seed);
    match which {
        Module::Nuc => {
            let store = match init {
                Some(s) => s,
                None => fresh()?.nuc,
            };
            let stage = NucStage::from_weights(&store)?;
            check_mode(cfg, &stage)?;
            let train_in = prepare_all(&stage, &data.train)?;
            let val_in = prepare_all(&stage, &data.val)?;
            let sample_loss = |sets: &[&WeightStore], i: usize| {
                let s = &data.train[i];
                let mut g = Graph::new(sets.to_vec());
                let out = stage.forward(&mut g, 0, &train_in[i], s.t_amb)?;
                let t = grid_leaf(&mut g, &s.lr_target);
                let l = g.mae(out.temperature, t)?;
                let l = with_mean_term(&mut g, l, out.mean, &s.lr_target)?;
                Ok((g.scalar(l).f64(), g.backward(l)?))
            };
            let validate = |sets: &[&WeightStore]| {
                par_val(data.val.len(), |i| {
                    let mut g = Graph::new(sets.to_vec());
                    let out = stage.forward(&mut g, 0, &val_in[i], data.val[i].t_amb)?;
                    metrics::mae(&g.value(out.temperature).to_grid(0, Unit::Celsius), &data.val[i].lr_target)
                })
            };
            let out = fit(cfg, vec![store], &[Role::Nuc], data.train.len(), sample_loss, validate)?;
            Ok(out.map(|mut v| v.remove(0)))
        }
        Module::Sr => {
            let store = match init {
                Some(s) => s,
                None => fresh()?.sr,
            };
            let net = SrNet::from_weights(&store)?;
            check_scale(cfg, &net)?;
            let run = |g: &mut Graph<f32>, s: &Sample| -> Result<Var> {
                let x = grid_leaf(g, &s.lr_target);
                net.forward(g, 0, x)
            };
            let sample_loss = |sets: &[&WeightStore], i: usize| {
                let s = &data.train[i];
                let mut g = Graph::new(sets.to_vec());
                let y = run(&mut g, s)?;
                let t = grid_leaf(&mut g, &s.target);
                let l = loss_node(&mut g, y, t)?;
                Ok((g.scalar(l).f64(), g.backward(l)?))
            };
            let validate = |sets: &[&WeightStore]| {
                par_val(data.val.len(), |i| {
                    let mut g = Graph::new(sets.to_vec());
                    let y = run(&mut g, &data.val[i])?;
                    metrics::mae(&g.value(y).to_grid(0, Unit::Celsius), &data.val[i].target)
                })
            };
            let out = fit(cfg, vec![store], &[Role::Sr], data.train.len(), sample_loss, validate)?;
            Ok(out.map(|mut v| v.remove(0)))
        }
    }
}

/// Train NUC and SR jointly through the full pipeline, each with its own
/// optimizer and learning rate.
pub fn train_end_to_end(
    cfg: &TrainConfig,
    data: &Dataset,
    pretrained: Option<PipelineWeights>,
) -> Result<TrainOutcome<PipelineWeights>> {
    cfg.validate()?;
    check_dataset(cfg, data)?;
    let weights = match pretrained {
        Some(w) => w,
        None => cfg.model.init(cfg.nuc_mode, cfg.scale, cfg.seed)?,
    };
    let pipe = Pipeline::from_weights(&weights.nuc, &weights.sr)?;
    check_mode(cfg, &pipe.nuc)?;
    check_scale(cfg, &pipe.sr)?;
    let train_in = prepare_all(&pipe.nuc, &data.train)?;
    let val_in = prepare_all(&pipe.nuc, &data.val)?;
    let sample_loss = |sets: &[&WeightStore], i: usize| {
        let s = &data.train[i];
        let mut g = Graph::new(sets.to_vec());
        let out = pipe.forward(&mut g, &train_in[i], s.t_amb)?;
        let t = grid_leaf(&mut g, &s.target);
        let l = loss_node(&mut g, out.sr, t)?;
        let l = with_mean_term(&mut g, l, out.nuc.mean, &s.lr_target)?;
        Ok((g.scalar(l).f64(), g.backward(l)?))
    };
    let validate = |sets: &[&WeightStore]| {
        par_val(data.val.len(), |i| {
            let mut g = Graph::new(sets.to_vec());
            let out = pipe.forward(&mut g, &val_in[i], data.val[i].t_amb)?;
            metrics::mae(&g.value(out.sr).to_grid(0, Unit::Celsius), &data.val[i].target)
        })
    };
    let out = fit(cfg, vec![weights.nuc, weights.sr], &[Role::Nuc, Role::Sr], data.train.len(), sample_loss, validate)?;
    Ok(out.map(|mut v| {
        let sr = v.pop().expect("two stores");
        PipelineWeights { nuc: v.pop().expect("two stores"), sr }
    }))
}
