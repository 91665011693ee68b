//! `pipeline`: raw frames to super-resolved temperature maps.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use thermopipe::formats::{read_weights, FrameFile};
use thermopipe::grid::GrayFrame;
use thermopipe::pipeline::{run_pipeline, NucInput, Pipeline};
use thermopipe::simulator::{AmbientTemperature, Burst};
use thermopipe::training::NucMode;
use thermopipe::weights::WeightStore;

use crate::args::{PipelineArgs, Tamb};
use crate::files::{ensure_dir, expand_inputs, frame_id, frame_name, group_bursts};
use crate::Outcome;

fn read_gray(path: &PathBuf) -> Result<GrayFrame> {
    FrameFile::read(path).and_then(FrameFile::into_gray).with_context(|| format!("reading {}", path.display()))
}

pub fn ambient(tamb: Tamb, header: Option<f32>) -> Result<AmbientTemperature> {
    let v = match (tamb, header) {
        (Tamb::Value(v), _) => v,
        (Tamb::Auto, Some(t)) => t as f64,
        (Tamb::Auto, None) => bail!("no ambient temperature in the frame header; pass --tamb"),
    };
    Ok(AmbientTemperature::new(v)?)
}

/// Items to process: one frame each in single mode, one burst each in multiframe mode.
fn items(a: &PipelineArgs) -> Result<Vec<(String, Vec<PathBuf>)>> {
    let files = expand_inputs(&a.input)?;
    if files.is_empty() {
        bail!("no input frames");
    }
    Ok(match a.mode {
        NucMode::Single => files.into_iter().map(|p| (frame_id(&p), vec![p])).collect(),
        NucMode::Multi(_) => group_bursts(&files),
    })
}

fn process(a: &PipelineArgs, paths: &[PathBuf], nuc: &WeightStore, sr: &WeightStore) -> Result<(FrameFile, FrameFile)> {
    let frames = paths.iter().map(read_gray).collect::<Result<Vec<_>>>()?;
    let t_amb = ambient(a.tamb, frames[0].t_amb())?;
    let input = match a.mode {
        NucMode::Single => NucInput::Frame(frames.into_iter().next().expect("one path per item")),
        NucMode::Multi(n) => {
            if frames.len() != n {
                bail!("burst has {} frames, mode {} expects {n}", frames.len(), a.mode);
            }
            NucInput::Burst(Burst::new(frames, t_amb)?)
        }
    };
    let out = run_pipeline(&input, t_amb, nuc, sr)?;
    let t = Some(t_amb.value() as f32);
    Ok((FrameFile::temperature(out.sr, t), FrameFile::temperature(out.nuc, t)))
}

pub fn run(a: &PipelineArgs) -> Result<Outcome> {
    let nuc = read_weights(&a.weights.nuc)?;
    let sr = read_weights(&a.weights.sr)?;
    let pipe = Pipeline::from_weights(&nuc, &sr)?;
    if pipe.scale() != a.scale {
        bail!("SR weights are for x{}, --scale is {}", pipe.scale(), a.scale);
    }
    if pipe.nuc.is_multi() != a.mode.is_multi() {
        bail!("NUC weights do not match --mode {}", a.mode);
    }
    let items = items(a)?;
    ensure_dir(&a.out)?;
    if a.save_nuc {
        ensure_dir(&a.out.join("nuc"))?;
    }
    let results: Vec<_> = items
        .par_iter()
        .map(|(id, paths)| {
            let r = process(a, paths, &nuc, &sr).and_then(|(sr_out, nuc_out)| {
                sr_out.write(a.out.join(frame_name(id)))?;
                if a.save_nuc {
                    nuc_out.write(a.out.join("nuc").join(frame_name(id)))?;
                }
                Ok(())
            });
            (id.clone(), r)
        })
        .collect();
    let (_, outcome) = super::collect(results);
    println!("wrote {} of {} outputs to {}", outcome.processed, items.len(), a.out.display());
    Ok(outcome)
}
