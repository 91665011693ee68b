//! Frame file discovery and naming.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

pub const FRAME_EXT: &str = "tir";
pub const INPUTS_DIR: &str = "inputs";
pub const TARGETS_DIR: &str = "targets";
pub const MANIFEST: &str = "manifest.csv";

/// Frame files directly inside `dir`, sorted by name.
pub fn list_frames(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let p = entry?.path();
        if p.is_file() && p.extension().is_some_and(|e| e == FRAME_EXT) {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

/// Files as given, directories replaced by their frame files.
pub fn expand_inputs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            out.extend(list_frames(p)?);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

/// File stem used as the item id.
pub fn frame_id(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

pub fn frame_name(id: &str) -> String {
    format!("{id}.{FRAME_EXT}")
}

/// Name of frame `k` of burst `id`.
pub fn burst_frame_name(id: &str, k: usize) -> String {
    format!("{id}_f{k}.{FRAME_EXT}")
}

/// Split `scene_0001_f3` into `("scene_0001", 3)`.
pub fn split_burst_stem(stem: &str) -> Option<(&str, usize)> {
    let (id, k) = stem.rsplit_once("_f")?;
    if id.is_empty() || k.is_empty() || !k.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    Some((id, k.parse().ok()?))
}

/// Files grouped into bursts by id, frames ordered by index.
/// Files without a frame suffix form one-frame bursts.
pub fn group_bursts(paths: &[PathBuf]) -> Vec<(String, Vec<PathBuf>)> {
    let mut groups: BTreeMap<String, Vec<(usize, PathBuf)>> = BTreeMap::new();
    for p in paths {
        let stem = frame_id(p);
        let (id, k) = match split_burst_stem(&stem) {
            Some((id, k)) => (id.to_owned(), k),
            None => (stem, 0),
        };
        groups.entry(id).or_default().push((k, p.clone()));
    }
    groups
        .into_iter()
        .map(|(id, mut v)| {
            v.sort();
            (id, v.into_iter().map(|(_, p)| p).collect())
        })
        .collect()
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn burst_names() {
        assert_eq!(split_burst_stem("scene_0001_f3"), Some(("scene_0001", 3)));
        assert_eq!(split_burst_stem("scene_0001"), None);
        assert_eq!(split_burst_stem("a_fx"), None);
        let paths: Vec<PathBuf> = ["b_f10.tir", "b_f2.tir", "a.tir", "b_f0.tir"].iter().map(PathBuf::from).collect();
        let g = group_bursts(&paths);
        assert_eq!(g[0], ("a".into(), vec![PathBuf::from("a.tir")]));
        assert_eq!(g[1].1, vec![PathBuf::from("b_f0.tir"), PathBuf::from("b_f2.tir"), PathBuf::from("b_f10.tir")]);
        assert_eq!(burst_frame_name("x", 4), "x_f4.tir");
    }
}
