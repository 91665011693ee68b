//! `scenes`: synthetic canopy ground truth.

use anyhow::Result;
use rayon::prelude::*;
use thermopipe::formats::FrameFile;
use thermopipe::scenes::canopy_scenes;

use crate::args::ScenesArgs;
use crate::files::{ensure_dir, frame_name};
use crate::Outcome;

pub fn scene_id(i: usize) -> String {
    format!("scene_{i:04}")
}

pub fn run(a: &ScenesArgs) -> Result<Outcome> {
    let scenes = canopy_scenes(a.count, a.size.height, a.size.width, (a.ambient.0, a.ambient.1), a.seed)?;
    ensure_dir(&a.out)?;
    let results: Vec<_> = scenes
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let id = scene_id(i);
            let file = FrameFile::temperature(s.map.clone(), s.t_amb.map(|t| t.value() as f32));
            let r = file.write(a.out.join(frame_name(&id))).map_err(anyhow::Error::from);
            (id, r)
        })
        .collect();
    let (_, outcome) = super::collect(results);
    println!("wrote {} scenes to {}", outcome.processed, a.out.display());
    Ok(outcome)
}
