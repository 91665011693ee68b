//! `pretrain` and `train`.

use std::path::Path;

use anyhow::Result;
use thermopipe::formats::{read_weights, write_atomic, write_weights};
use thermopipe::nuc::GrayNorm;
use thermopipe::simulator::AmbientTemperature;
use thermopipe::training::{
    pretrain_module, train_end_to_end, DataConfig, Dataset, ModelConfig, Module, PipelineWeights, TrainConfig, TrainLog,
};

use super::simulate::{data_config, read_gt_dir};
use crate::args::{PretrainArgs, TrainArgs, TrainOpts};
use crate::files::ensure_dir;
use crate::Outcome;

pub fn train_config(o: &TrainOpts, data: &DataConfig) -> Result<TrainConfig> {
    let mut cfg = TrainConfig::new(o.sim.scale, o.sim.mode);
    cfg.lr_sr = o.lr_sr;
    cfg.lr_nuc = o.lr_nuc;
    cfg.plateau_factor = o.plateau_factor;
    cfg.plateau_patience = o.plateau_patience;
    cfg.plateau_threshold = o.plateau_threshold;
    cfg.batch_size = o.batch_size;
    cfg.epochs = o.epochs;
    cfg.weight_decay = o.weight_decay;
    cfg.seed = o.sim.seed;
    let mid = AmbientTemperature::new(0.5 * (data.ambient.0 + data.ambient.1))?;
    cfg.model = ModelConfig {
        nuc_depth: o.nuc_depth,
        nuc_width: o.nuc_width,
        fusion_k: o.fusion_k,
        max_shift: o.sim.max_shift,
        norm: GrayNorm::nominal(&data.params, mid, o.offset_span),
        sr_channels: o.sr_channels,
        sr_blocks: o.sr_blocks,
        ..ModelConfig::default()
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Simulated training and validation samples; unreadable maps are reported and skipped.
fn dataset(o: &TrainOpts) -> Result<(TrainConfig, Dataset, Outcome)> {
    let mut dc = data_config(&o.sim)?;
    dc.val_fraction = o.val_fraction;
    dc.validate()?;
    let cfg = train_config(o, &dc)?;
    let (scenes, outcome) = super::collect(read_gt_dir(&o.gt)?);
    let scenes: Vec<_> = scenes.into_iter().map(|(_, s)| s).collect();
    if scenes.len() < 2 {
        anyhow::bail!("need at least 2 readable ground-truth maps, found {}", scenes.len());
    }
    let data = Dataset::build(&scenes, &dc)?;
    log::info!("{} training and {} validation samples", data.train.len(), data.val.len());
    Ok((cfg, data, outcome))
}

fn write_log(log: &TrainLog, path: &Path) -> Result<()> {
    write_atomic(path, log.to_csv_string().as_bytes())?;
    Ok(())
}

fn module_name(m: Module) -> &'static str {
    match m {
        Module::Nuc => "nuc",
        Module::Sr => "sr",
    }
}

pub fn pretrain(a: &PretrainArgs) -> Result<Outcome> {
    let (cfg, data, outcome) = dataset(&a.opts)?;
    let init = a.init.as_deref().map(read_weights).transpose()?;
    let result = pretrain_module(a.module, &cfg, &data, init)?;
    let name = module_name(a.module);
    ensure_dir(&a.opts.out)?;
    write_weights(&result.best_weights, a.opts.out.join(format!("{name}.twt")))?;
    write_log(&result.log, &a.opts.out.join(format!("{name}_log.csv")))?;
    println!("{name}: best val MAE {:.4} °C at epoch {}", result.best_val_mae, result.best_epoch);
    Ok(outcome)
}

pub fn train(a: &TrainArgs) -> Result<Outcome> {
    let (cfg, data, outcome) = dataset(&a.opts)?;
    let init = match &a.init {
        Some(p) => Some(PipelineWeights { nuc: read_weights(&p.nuc)?, sr: read_weights(&p.sr)? }),
        None => None,
    };
    let result = train_end_to_end(&cfg, &data, init)?;
    ensure_dir(&a.opts.out)?;
    write_weights(&result.best_weights.nuc, a.opts.out.join("nuc.twt"))?;
    write_weights(&result.best_weights.sr, a.opts.out.join("sr.twt"))?;
    write_log(&result.log, &a.opts.out.join("train_log.csv"))?;
    println!("end to end: best val MAE {:.4} °C at epoch {}", result.best_val_mae, result.best_epoch);
    Ok(outcome)
}
