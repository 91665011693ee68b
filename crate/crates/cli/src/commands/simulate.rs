//! `simulate`: ground-truth maps to raw frames, targets and a manifest.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rayon::prelude::*;
use thermopipe::formats::FrameFile;
use thermopipe::grid::Grid2D;
use thermopipe::pipeline::NucInput;
use thermopipe::simulator::{AmbientTemperature, MotionConfig};
use thermopipe::training::{make_training_pair, DataConfig, GtScene};

use crate::args::{SimArgs, SimulateArgs};
use crate::camera::read_camera;
use crate::files::{
    burst_frame_name, ensure_dir, frame_id, frame_name, list_frames, INPUTS_DIR, MANIFEST, TARGETS_DIR,
};
use crate::Outcome;

pub const MANIFEST_HEADER: [&str; 8] =
    ["id", "mode", "t_amb", "frames", "input_height", "input_width", "inputs", "target"];

pub fn data_config(a: &SimArgs) -> Result<DataConfig> {
    let mut cfg = DataConfig::new(a.scale, a.mode, read_camera(&a.camera_params)?);
    cfg.ambient = (a.ambient.0, a.ambient.1);
    cfg.motion = MotionConfig::translations(a.margin, a.max_shift);
    cfg.seed = a.seed;
    cfg.validate()?;
    Ok(cfg)
}

/// Read one ground-truth map; the header's ambient temperature is kept when present.
pub fn read_gt(path: &Path) -> Result<GtScene> {
    let (map, t_amb) = FrameFile::read(path)?.into_temperature()?;
    let t_amb = t_amb.map(|t| AmbientTemperature::new(t as f64)).transpose()?;
    Ok(GtScene { map, t_amb })
}

/// Every frame file under `dir` read as ground truth, with per-file results.
pub fn read_gt_dir(dir: &Path) -> Result<Vec<(String, Result<GtScene>)>> {
    let paths = list_frames(dir)?;
    if paths.is_empty() {
        anyhow::bail!("no .tir files in {}", dir.display());
    }
    Ok(paths
        .par_iter()
        .map(|p| (frame_id(p), read_gt(p).with_context(|| format!("reading {}", p.display()))))
        .collect())
}

struct Row {
    t_amb: f64,
    frames: usize,
    dims: (usize, usize),
    inputs: Vec<String>,
    target: String,
}

fn simulate_one(
    id: &str,
    index: usize,
    gt: &Grid2D,
    t_amb: AmbientTemperature,
    cfg: &DataConfig,
    out: &Path,
) -> Result<Row> {
    let sample = make_training_pair(gt, t_amb, cfg, index as u64)?;
    let t = Some(t_amb.value() as f32);
    let mut inputs = Vec::new();
    match &sample.input {
        NucInput::Frame(f) => {
            let name = frame_name(id);
            FrameFile::Gray(f.clone().with_t_amb(t)).write(out.join(INPUTS_DIR).join(&name))?;
            inputs.push(format!("{INPUTS_DIR}/{name}"));
        }
        NucInput::Burst(b) => {
            for (k, f) in b.frames.iter().enumerate() {
                let name = burst_frame_name(id, k);
                FrameFile::Gray(f.clone().with_t_amb(t)).write(out.join(INPUTS_DIR).join(&name))?;
                inputs.push(format!("{INPUTS_DIR}/{name}"));
            }
        }
    }
    let target = frame_name(id);
    FrameFile::temperature(sample.target.clone(), t).write(out.join(TARGETS_DIR).join(&target))?;
    Ok(Row {
        t_amb: t_amb.value(),
        frames: inputs.len(),
        dims: sample.input.dims(),
        inputs,
        target: format!("{TARGETS_DIR}/{target}"),
    })
}

pub fn run(a: &SimulateArgs) -> Result<Outcome> {
    let cfg = data_config(&a.sim)?;
    let scenes = read_gt_dir(&a.gt)?;
    ensure_dir(&a.out.join(INPUTS_DIR))?;
    ensure_dir(&a.out.join(TARGETS_DIR))?;
    let results: Vec<(String, Result<Row>)> = scenes
        .par_iter()
        .enumerate()
        .map(|(i, (id, gt))| {
            let r = match gt {
                Ok(s) => {
                    let t = s.t_amb.unwrap_or_else(|| cfg.ambient_for(i as u64));
                    simulate_one(id, i, &s.map, t, &cfg, &a.out)
                }
                Err(e) => Err(anyhow::anyhow!("{e:#}")),
            };
            (id.clone(), r)
        })
        .collect();
    let (rows, outcome) = super::collect(results);
    write_manifest(&a.out.join(MANIFEST), &cfg, &rows)?;
    println!("simulated {} of {} maps into {}", outcome.processed, scenes.len(), a.out.display());
    Ok(outcome)
}

fn write_manifest(path: &PathBuf, cfg: &DataConfig, rows: &[(String, Row)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(MANIFEST_HEADER)?;
    for (id, r) in rows {
        w.write_record([
            id.clone(),
            cfg.mode.to_string(),
            format!("{}", r.t_amb),
            r.frames.to_string(),
            r.dims.0.to_string(),
            r.dims.1.to_string(),
            r.inputs.join(";"),
            r.target.clone(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?;
    thermopipe::formats::write_atomic(path, &bytes)?;
    Ok(())
}
