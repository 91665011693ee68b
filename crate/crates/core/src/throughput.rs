//! Frames-per-second measurement of the NUC, SR and full pipeline passes.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::grid::{Grid2D, Unit};
use crate::nuc::GrayNorm;
use crate::pipeline::{NucInput, NucStage, Pipeline};
use crate::scenes::canopy_scene;
use crate::simulator::{simulate_frame, synth_burst, AmbientTemperature, CameraParams, MotionConfig};
use crate::sr::SrNet;
use crate::tensor::Tensor3;
use crate::training::{ModelConfig, NucMode, PipelineWeights};

#[derive(Clone, Debug, PartialEq)]
pub struct BenchConfig {
    /// Output frame height, pixels; divisible by `scale`.
    pub height: usize,
    /// Output frame width, pixels; divisible by `scale`.
    pub width: usize,
    pub scale: usize,
    pub mode: NucMode,
    /// Timed repetitions per stage, at least 3.
    pub reps: usize,
    pub model: ModelConfig,
    pub seed: u64,
}

impl BenchConfig {
    pub fn new(height: usize, width: usize, scale: usize, mode: NucMode) -> Self {
        Self { height, width, scale, mode, reps: 5, model: ModelConfig::default(), seed: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps < 3 {
            return Err(Error::Params(format!("need at least 3 reps, got {}", self.reps)));
        }
        if !matches!(self.scale, 2 | 4) {
            return Err(Error::Params(format!("scale must be 2 or 4, got {}", self.scale)));
        }
        if self.height == 0 || self.width == 0 || self.height % self.scale != 0 || self.width % self.scale != 0 {
            return Err(Error::Params(format!(
                "{}x{} is not a positive multiple of {}",
                self.height, self.width, self.scale
            )));
        }
        Ok(())
    }

    /// Size of the raw frames fed to the NUC.
    pub fn input_dims(&self) -> (usize, usize) {
        (self.height / self.scale, self.width / self.scale)
    }
}

/// Median wall time of one stage.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StageTiming {
    pub median_secs: f64,
}

impl StageTiming {
    pub fn fps(&self) -> f64 {
        1.0 / self.median_secs
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchReport {
    pub config: BenchConfig,
    pub threads: usize,
    pub nuc: StageTiming,
    pub sr: StageTiming,
    pub end_to_end: StageTiming,
    /// Full-pipeline output of the last repetition.
    pub output: Grid2D,
}

pub const REPORT_HEADER: [&str; 9] =
    ["height", "width", "scale", "mode", "threads", "reps", "nuc_fps", "sr_fps", "end_to_end_fps"];

impl BenchReport {
    pub fn csv_row(&self) -> [String; 9] {
        let c = &self.config;
        [
            c.height.to_string(),
            c.width.to_string(),
            c.scale.to_string(),
            c.mode.to_string(),
            self.threads.to_string(),
            c.reps.to_string(),
            format!("{:.4}", self.nuc.fps()),
            format!("{:.4}", self.sr.fps()),
            format!("{:.4}", self.end_to_end.fps()),
        ]
    }

    pub fn text(&self) -> String {
        let c = &self.config;
        let (h, w) = c.input_dims();
        format!(
            "{h}x{w} -> {}x{} x{} {} ({} threads, median of {})\n  nuc        {:>9.3} fps  {:>9.4} s/frame\n  sr         {:>9.3} fps  {:>9.4} s/frame\n  end-to-end {:>9.3} fps  {:>9.4} s/frame\n",
            c.height,
            c.width,
            c.scale,
            c.mode,
            self.threads,
            c.reps,
            self.nuc.fps(),
            self.nuc.median_secs,
            self.sr.fps(),
            self.sr.median_secs,
            self.end_to_end.fps(),
            self.end_to_end.median_secs,
        )
    }
}

fn bench_camera() -> CameraParams {
    CameraParams {
        gain_poly: vec![4.0, 0.004],
        offset_poly: vec![1800.0, 6.0],
        radial_profile: vec![1.0, 0.0, -0.05],
        noise_sigma: 2.0,
        seed: 7,
        gray_depth: 14,
    }
}

/// Random weights with a nonzero SR fusion layer, so every conv affects the output.
pub fn bench_weights(cfg: &BenchConfig) -> Result<PipelineWeights> {
    let mut model = cfg.model.clone();
    model.norm = GrayNorm::nominal(&bench_camera(), AmbientTemperature::new(25.0)?, model.norm.offset_span);
    let mut w = model.init(cfg.mode, cfg.scale, cfg.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
    for v in &mut w.sr.get_mut("fusion.weight").ok_or_else(|| Error::Load("no fusion.weight".into()))?.values {
        *v = rng.random_range(-0.01..0.01);
    }
    Ok(w)
}

/// Raw camera input of the configured size.
pub fn bench_input(cfg: &BenchConfig) -> Result<(NucInput, AmbientTemperature)> {
    let t_amb = AmbientTemperature::new(25.0)?;
    let (h, w) = cfg.input_dims();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let cam = bench_camera();
    let input = match cfg.mode {
        NucMode::Single => NucInput::Frame(simulate_frame(&canopy_scene(h, w, t_amb, &mut rng), t_amb, &cam, 0)?.frame),
        NucMode::Multi(n) => {
            let motion = MotionConfig::translations(cfg.model.max_shift.max(1), cfg.model.max_shift);
            let m = motion.margin;
            let gt = canopy_scene(h + 2 * m, w + 2 * m, t_amb, &mut rng);
            NucInput::Burst(synth_burst(&gt, t_amb, n, &motion, &cam, 0)?)
        }
    };
    Ok((input, t_amb))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn time_reps<T>(reps: usize, mut f: impl FnMut() -> Result<T>) -> Result<(StageTiming, T)> {
    let mut secs = Vec::with_capacity(reps);
    let mut last = None;
    for _ in 0..reps {
        let t0 = Instant::now();
        let out = f()?;
        secs.push(t0.elapsed().as_secs_f64());
        last = Some(out);
    }
    Ok((StageTiming { median_secs: median(secs) }, last.expect("reps >= 1")))
}

/// Time NUC only, SR only and the full pipeline with random weights.
pub fn run_bench(cfg: &BenchConfig) -> Result<BenchReport> {
    cfg.validate()?;
    run_bench_weights(cfg, &bench_weights(cfg)?)
}

/// Time NUC only, SR only and the full pipeline on the current rayon pool.
pub fn run_bench_weights(cfg: &BenchConfig, weights: &PipelineWeights) -> Result<BenchReport> {
    cfg.validate()?;
    let pipe = Pipeline::from_weights(&weights.nuc, &weights.sr)?;
    if pipe.scale() != cfg.scale || pipe.nuc.is_multi() != cfg.mode.is_multi() {
        let kind = if pipe.nuc.is_multi() { "multiframe" } else { "single-frame" };
        return Err(Error::Load(format!(
            "weights are {kind} x{}, bench asks for {} x{}",
            pipe.scale(),
            cfg.mode,
            cfg.scale
        )));
    }
    let (input, t_amb) = bench_input(cfg)?;
    let nuc_only = |stage: &NucStage| -> Result<Grid2D> {
        let frames = stage.prepare(&input)?;
        let mut g = Graph::new(vec![&weights.nuc]);
        let out = stage.forward(&mut g, 0, &frames, t_amb)?;
        Ok(g.value(out.temperature).to_grid(0, Unit::Celsius))
    };
    let (nuc, lr) = time_reps(cfg.reps, || nuc_only(&pipe.nuc))?;
    let sr_only = |net: &SrNet| -> Result<Grid2D> {
        let mut g = Graph::new(vec![&weights.sr]);
        let x = g.leaf(Tensor3::from_grid(&lr));
        let y = net.forward(&mut g, 0, x)?;
        Ok(g.value(y).to_grid(0, Unit::Celsius))
    };
    let (sr, _) = time_reps(cfg.reps, || sr_only(&pipe.sr))?;
    let (end_to_end, output) = time_reps(cfg.reps, || {
        let frames = pipe.nuc.prepare(&input)?;
        let mut g = Graph::new(vec![&weights.nuc, &weights.sr]);
        let out = pipe.forward(&mut g, &frames, t_amb)?;
        Ok(g.value(out.sr).to_grid(0, Unit::Celsius))
    })?;
    Ok(BenchReport { config: cfg.clone(), threads: rayon::current_num_threads(), nuc, sr, end_to_end, output })
}

/// [`run_bench_weights`] inside a pool of `threads` workers.
pub fn run_bench_with_threads(cfg: &BenchConfig, weights: &PipelineWeights, threads: usize) -> Result<BenchReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Params(format!("thread pool: {e}")))?;
    pool.install(|| run_bench_weights(cfg, weights))
}

/// Whether the full-pipeline output is bit-identical for every thread count.
pub fn outputs_match_across_threads(cfg: &BenchConfig, weights: &PipelineWeights, threads: &[usize]) -> Result<bool> {
    let mut cfg = cfg.clone();
    cfg.reps = 3;
    let mut first: Option<Vec<u32>> = None;
    for &t in threads {
        let bits: Vec<u32> =
            run_bench_with_threads(&cfg, weights, t)?.output.values().iter().map(|v| v.to_bits()).collect();
        match &first {
            None => first = Some(bits),
            Some(f) if *f != bits => return Ok(false),
            Some(_) => {}
        }
    }
    Ok(true)
}
