//! `bench`: frames per second of NUC, SR and the full pipeline.

use anyhow::{bail, Result};
use thermopipe::formats::{read_weights, write_atomic};
use thermopipe::throughput::{
    bench_weights, outputs_match_across_threads, run_bench_weights, BenchConfig, BenchReport, REPORT_HEADER,
};
use thermopipe::training::PipelineWeights;

use crate::args::BenchArgs;
use crate::Outcome;

/// Result of a bench run.
#[derive(Clone, Debug)]
pub struct BenchRun {
    pub report: BenchReport,
    /// Thread counts compared and whether their outputs were bit-identical.
    pub determinism: Option<(Vec<usize>, bool)>,
}

/// Time the pipeline and, if asked, compare outputs across thread counts.
pub fn measure(a: &BenchArgs, threads: Option<usize>) -> Result<BenchRun> {
    let mut cfg = BenchConfig::new(a.size.height, a.size.width, a.scale, a.mode);
    cfg.reps = a.reps;
    cfg.seed = a.seed;
    cfg.validate()?;
    let weights = match &a.weights {
        Some(p) => PipelineWeights { nuc: read_weights(&p.nuc)?, sr: read_weights(&p.sr)? },
        None => bench_weights(&cfg)?,
    };
    let report = run_bench_weights(&cfg, &weights)?;
    let determinism = if a.check_threads.is_empty() {
        None
    } else {
        let mut counts = a.check_threads.clone();
        counts.extend(threads);
        if counts.contains(&0) {
            bail!("thread counts must be at least 1");
        }
        let same = outputs_match_across_threads(&cfg, &weights, &counts)?;
        Some((counts, same))
    };
    Ok(BenchRun { report, determinism })
}

pub fn run(a: &BenchArgs, threads: Option<usize>) -> Result<Outcome> {
    let r = measure(a, threads)?;
    print!("{}", r.report.text());
    if let Some(path) = &a.csv {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(REPORT_HEADER)?;
        w.write_record(r.report.csv_row())?;
        write_atomic(path, &w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?)?;
    }
    let mut outcome = Outcome { processed: 1, failed: 0 };
    match r.determinism {
        Some((counts, true)) => println!("outputs identical across thread counts {counts:?}"),
        Some((counts, false)) => {
            eprintln!("error: outputs differ across thread counts {counts:?}");
            outcome.failed += 1;
        }
        None => {}
    }
    Ok(outcome)
}
