//! `report`: SVG line profiles, error maps and a summary table.

use anyhow::Result;
use thermopipe::formats::write_atomic;

use super::eval::{read_eval_csv, read_temperature, MEAN_ROW};
use crate::args::ReportArgs;
use crate::files::{ensure_dir, frame_name};
use crate::svg;
use crate::Outcome;

pub fn run(a: &ReportArgs) -> Result<Outcome> {
    let rows = read_eval_csv(&a.eval)?;
    ensure_dir(&a.out)?;
    let mut outcome = Outcome::default();
    let mut table = vec![["id", "MAE °C", "PSNR dB", "SSIM", "EMD", "CWSI err pts"].map(String::from).to_vec()];
    for r in &rows {
        table.push(vec![
            r.id.clone(),
            format!("{:.4}", r.mae),
            format!("{:.2}", r.psnr),
            format!("{:.4}", r.ssim),
            format!("{:.4}", r.emd),
            format!("{:.2}", r.cwsi_error),
        ]);
        if r.id == MEAN_ROW {
            continue;
        }
        let pred = read_temperature(&a.pred.join(frame_name(&r.id)));
        let gt = read_temperature(&a.gt.join(frame_name(&r.id)));
        let (Ok((pred, _)), Ok((gt, _))) = (pred, gt) else {
            log::warn!("{}: prediction or ground truth missing; skipped", r.id);
            eprintln!("warning: {}: prediction or ground truth missing; skipped", r.id);
            continue;
        };
        if pred.dims() != gt.dims() {
            log::warn!("{}: dims differ; skipped", r.id);
            eprintln!(
                "warning: {}: prediction {:?} and ground truth {:?} differ; skipped",
                r.id,
                pred.dims(),
                gt.dims()
            );
            continue;
        }
        write_atomic(&a.out.join(format!("{}_profile.svg", r.id)), svg::line_profile(&r.id, &gt, &pred).as_bytes())?;
        write_atomic(&a.out.join(format!("{}_error.svg", r.id)), svg::error_map(&r.id, &gt, &pred).as_bytes())?;
        outcome.processed += 1;
    }
    write_atomic(&a.out.join("summary.svg"), svg::table("Evaluation summary", &table).as_bytes())?;
    println!("rendered {} frames into {}", outcome.processed, a.out.display());
    Ok(outcome)
}
