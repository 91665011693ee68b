//! `eval`: per-frame metrics and dataset means.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use thermopipe::formats::{write_atomic, FrameFile};
use thermopipe::grid::Grid2D;
use thermopipe::metrics::{self, cwsi, MetricsConfig};

use super::pipeline::ambient;
use crate::args::{EvalArgs, Tamb};
use crate::files::{frame_id, frame_name, list_frames};
use crate::Outcome;

pub const EVAL_HEADER: [&str; 8] = ["id", "mae", "psnr", "ssim", "emd", "cwsi_gt", "cwsi_pred", "cwsi_error"];
/// Id of the summary row.
pub const MEAN_ROW: &str = "mean";

#[derive(Clone, Debug, PartialEq)]
pub struct EvalRow {
    pub id: String,
    pub mae: f64,
    pub psnr: f64,
    pub ssim: f64,
    pub emd: f64,
    pub cwsi_gt: f64,
    pub cwsi_pred: f64,
    /// Percentage points.
    pub cwsi_error: f64,
}

impl EvalRow {
    fn values(&self) -> [f64; 7] {
        [self.mae, self.psnr, self.ssim, self.emd, self.cwsi_gt, self.cwsi_pred, self.cwsi_error]
    }

    fn record(&self) -> Vec<String> {
        std::iter::once(self.id.clone()).chain(self.values().iter().map(|v| format!("{v}"))).collect()
    }

    fn from_record(r: &csv::StringRecord) -> Result<Self> {
        if r.len() != EVAL_HEADER.len() {
            bail!("eval row has {} columns, expected {}", r.len(), EVAL_HEADER.len());
        }
        let v = |i: usize| r[i].trim().parse::<f64>().with_context(|| format!("bad number `{}`", &r[i]));
        Ok(Self {
            id: r[0].to_owned(),
            mae: v(1)?,
            psnr: v(2)?,
            ssim: v(3)?,
            emd: v(4)?,
            cwsi_gt: v(5)?,
            cwsi_pred: v(6)?,
            cwsi_error: v(7)?,
        })
    }
}

/// Column means over the rows, ignoring non-finite entries except infinite PSNR.
pub fn mean_row(rows: &[EvalRow]) -> EvalRow {
    let mean = |f: fn(&EvalRow) -> f64| {
        let v: Vec<f64> = rows.iter().map(f).filter(|x| !x.is_nan()).collect();
        if v.is_empty() {
            f64::NAN
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    };
    EvalRow {
        id: MEAN_ROW.into(),
        mae: mean(|r| r.mae),
        psnr: mean(|r| r.psnr),
        ssim: mean(|r| r.ssim),
        emd: mean(|r| r.emd),
        cwsi_gt: mean(|r| r.cwsi_gt),
        cwsi_pred: mean(|r| r.cwsi_pred),
        cwsi_error: mean(|r| r.cwsi_error),
    }
}

pub fn read_eval_csv(path: &Path) -> Result<Vec<EvalRow>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    if !r.headers()?.iter().eq(EVAL_HEADER) {
        bail!("{} does not have the eval header", path.display());
    }
    r.records().map(|rec| EvalRow::from_record(&rec?)).collect()
}

pub fn eval_csv(rows: &[EvalRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(EVAL_HEADER)?;
    for r in rows.iter().cloned().chain(std::iter::once(mean_row(rows))) {
        w.write_record(r.record())?;
    }
    w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))
}

pub fn read_temperature(path: &Path) -> Result<(Grid2D, Option<f32>)> {
    FrameFile::read(path).and_then(FrameFile::into_temperature).with_context(|| format!("reading {}", path.display()))
}

fn read_mask(path: &Path) -> Result<Vec<bool>> {
    let f = FrameFile::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(match f {
        FrameFile::Gray(g) => g.levels().iter().map(|&v| v != 0).collect(),
        FrameFile::Temperature { map, .. } => map.values().iter().map(|&v| v != 0.0).collect(),
    })
}

/// Metrics of one prediction against its ground truth.
pub fn evaluate(id: &str, pred: &Grid2D, gt: &Grid2D, t_amb: f64, mask: Option<&[bool]>) -> Result<EvalRow> {
    let cfg = MetricsConfig::default();
    let cwsi_gt = cwsi(gt, t_amb, mask)?;
    let cwsi_pred = cwsi(pred, t_amb, mask)?;
    Ok(EvalRow {
        id: id.to_owned(),
        mae: metrics::mae(pred, gt)?,
        psnr: metrics::psnr(pred, gt, &cfg)?,
        ssim: metrics::ssim(pred, gt, &cfg)?,
        emd: metrics::emd(pred, gt, &cfg)?,
        cwsi_gt,
        cwsi_pred,
        cwsi_error: 100.0 * (cwsi_gt - cwsi_pred).abs(),
    })
}

fn eval_one(id: &str, pred: &Path, gt: &Path, mask_dir: Option<&PathBuf>, tamb: Tamb) -> Result<EvalRow> {
    let (p, p_t) = read_temperature(pred)?;
    let (g, g_t) = read_temperature(gt)?;
    let t = ambient(tamb, g_t.or(p_t))?;
    let mask = mask_dir.map(|d| read_mask(&d.join(frame_name(id)))).transpose()?;
    evaluate(id, &p, &g, t.value(), mask.as_deref())
}

fn by_id(dir: &Path) -> Result<BTreeMap<String, PathBuf>> {
    Ok(list_frames(dir)?.into_iter().map(|p| (frame_id(&p), p)).collect())
}

pub fn run(a: &EvalArgs) -> Result<Outcome> {
    let preds = by_id(&a.pred)?;
    let gts = by_id(&a.gt)?;
    let mut unmatched: Vec<&String> = preds.keys().filter(|k| !gts.contains_key(*k)).collect();
    unmatched.extend(gts.keys().filter(|k| !preds.contains_key(*k)));
    unmatched.sort();
    for id in &unmatched {
        eprintln!("error: {id}: no matching prediction/ground-truth pair; excluded");
    }
    let pairs: Vec<(&String, &PathBuf, &PathBuf)> =
        preds.iter().filter_map(|(id, p)| gts.get(id).map(|g| (id, p, g))).collect();
    let results: Vec<_> =
        pairs.par_iter().map(|(id, p, g)| ((*id).clone(), eval_one(id, p, g, a.mask.as_ref(), a.tamb))).collect();
    let (rows, mut outcome) = super::collect(results);
    outcome.failed += unmatched.len();
    let rows: Vec<EvalRow> = rows.into_iter().map(|(_, r)| r).collect();
    write_atomic(&a.out, &eval_csv(&rows)?)?;
    let m = mean_row(&rows);
    println!(
        "{} frames: MAE {:.4} °C, PSNR {:.2} dB, SSIM {:.4}, EMD {:.4}, CWSI error {:.2} pts",
        rows.len(),
        m.mae,
        m.psnr,
        m.ssim,
        m.emd,
        m.cwsi_error
    );
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use thermopipe::grid::Unit;

    #[test]
    fn identical_maps() {
        let g = Grid2D::from_fn(16, 16, Unit::Celsius, |y, x| 20.0 + (y * 3 + x) as f32 * 0.1);
        let r = evaluate("a", &g, &g, 25.0, None).unwrap();
        assert_eq!(r.mae, 0.0);
        assert_eq!(r.psnr, f64::INFINITY);
        assert!((r.ssim - 1.0).abs() < 1e-12);
        assert_eq!(r.emd, 0.0);
        assert_eq!(r.cwsi_error, 0.0);
        let bytes = eval_csv(&[r.clone()]).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        assert_eq!(text.lines().next().unwrap().split(',').count(), 8);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        std::fs::write(&p, text).unwrap();
        let back = read_eval_csv(&p).unwrap();
        assert_eq!(back[0], r);
        assert_eq!(back[1].id, MEAN_ROW);
    }
}
