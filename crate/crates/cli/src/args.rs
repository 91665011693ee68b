//! Command-line arguments.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use thermopipe::training::{Module, NucMode};

#[derive(Debug, Parser)]
#[command(name = "thermopipe", version, about = "Thermal IR simulation, correction, super resolution and evaluation")]
pub struct Cli {
    /// Worker threads; falls back to THERMOPIPE_THREADS, then all cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write synthetic canopy temperature maps.
    Scenes(ScenesArgs),
    /// Turn ground-truth maps into raw camera frames and targets.
    Simulate(SimulateArgs),
    /// Train the NUC or the SR network on its own.
    Pretrain(PretrainArgs),
    /// Fine-tune NUC and SR end to end.
    Train(TrainArgs),
    /// Run NUC then SR on raw frames.
    Pipeline(PipelineArgs),
    /// Score predicted temperature maps against ground truth.
    Eval(EvalArgs),
    /// Measure frames per second.
    Bench(BenchArgs),
    /// Render line profiles, error maps and a summary as SVG.
    Report(ReportArgs),
}

/// `HxW`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dims {
    pub height: usize,
    pub width: usize,
}

impl FromStr for Dims {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (h, w) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected HxW, got `{s}`"))?;
        let parse = |v: &str| v.trim().parse::<usize>().map_err(|_| format!("bad dimension `{v}` in `{s}`"));
        let (height, width) = (parse(h)?, parse(w)?);
        if height == 0 || width == 0 {
            return Err(format!("dimensions must be positive, got `{s}`"));
        }
        Ok(Self { height, width })
    }
}

impl fmt::Display for Dims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.height, self.width)
    }
}

/// `lo,hi` in °C.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Range(pub f64, pub f64);

impl FromStr for Range {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (a, b) = s.split_once(',').ok_or_else(|| format!("expected lo,hi, got `{s}`"))?;
        let parse = |v: &str| v.trim().parse::<f64>().map_err(|_| format!("bad number `{v}` in `{s}`"));
        let (lo, hi) = (parse(a)?, parse(b)?);
        if !(lo <= hi) {
            return Err(format!("empty range `{s}`"));
        }
        Ok(Self(lo, hi))
    }
}

/// Ambient temperature source.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Tamb {
    /// Read it from the frame header.
    Auto,
    Value(f64),
}

impl FromStr for Tamb {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "auto" {
            return Ok(Self::Auto);
        }
        s.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .map(Self::Value)
            .ok_or_else(|| format!("expected `auto` or a temperature, got `{s}`"))
    }
}

/// `nuc.twt,sr.twt`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeightPair {
    pub nuc: PathBuf,
    pub sr: PathBuf,
}

impl FromStr for WeightPair {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (a, b) = s.split_once(',').ok_or_else(|| format!("expected nuc.twt,sr.twt, got `{s}`"))?;
        Ok(Self { nuc: a.into(), sr: b.into() })
    }
}

#[derive(Clone, Debug, Args)]
pub struct ScenesArgs {
    #[arg(long)]
    pub count: usize,
    #[arg(long, default_value = "64x64")]
    pub size: Dims,
    /// Ambient range drawn per scene, °C.
    #[arg(long, default_value = "0,45")]
    pub ambient: Range,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Camera and burst settings shared by simulation and training.
#[derive(Clone, Debug, Args)]
pub struct SimArgs {
    /// TOML file with the camera model.
    #[arg(long)]
    pub camera_params: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub scale: usize,
    /// `single`, `multi` (7 frames) or `multiN`.
    #[arg(long, default_value = "single")]
    pub mode: NucMode,
    /// Ambient range for maps whose header carries none, °C.
    #[arg(long, default_value = "0,45")]
    pub ambient: Range,
    /// Pixels cropped from every side of a burst source map.
    #[arg(long, default_value_t = 4)]
    pub margin: usize,
    /// Largest frame-to-frame translation of a burst.
    #[arg(long, default_value_t = 3)]
    pub max_shift: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Clone, Debug, Args)]
pub struct SimulateArgs {
    /// Directory of ground-truth temperature frames.
    #[arg(long)]
    pub gt: PathBuf,
    #[command(flatten)]
    pub sim: SimArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Debug, Args)]
pub struct TrainOpts {
    /// Directory of ground-truth temperature frames.
    #[arg(long)]
    pub gt: PathBuf,
    #[command(flatten)]
    pub sim: SimArgs,
    #[arg(long, default_value_t = 0.2)]
    pub val_fraction: f64,
    #[arg(long, default_value_t = 60)]
    pub epochs: usize,
    #[arg(long, default_value_t = 8)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub lr_sr: f64,
    #[arg(long, default_value_t = 4e-5)]
    pub lr_nuc: f64,
    #[arg(long, default_value_t = 1e-2)]
    pub weight_decay: f64,
    #[arg(long, default_value_t = 0.5)]
    pub plateau_factor: f64,
    #[arg(long, default_value_t = 3)]
    pub plateau_patience: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub plateau_threshold: f64,
    #[arg(long, default_value_t = 6)]
    pub nuc_depth: usize,
    #[arg(long, default_value_t = 32)]
    pub nuc_width: usize,
    /// Multiframe fusion kernel size.
    #[arg(long, default_value_t = 5)]
    pub fusion_k: usize,
    #[arg(long, default_value_t = 32)]
    pub sr_channels: usize,
    #[arg(long, default_value_t = 4)]
    pub sr_blocks: usize,
    /// Gray levels covered by one unit of the offset head.
    #[arg(long, default_value_t = 200.0)]
    pub offset_span: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Debug, Args)]
pub struct PretrainArgs {
    /// `nuc` or `sr`.
    #[arg(long)]
    pub module: Module,
    /// Start from these weights instead of a fresh initialization.
    #[arg(long)]
    pub init: Option<PathBuf>,
    #[command(flatten)]
    pub opts: TrainOpts,
}

#[derive(Clone, Debug, Args)]
pub struct TrainArgs {
    /// Pretrained `nuc.twt,sr.twt`.
    #[arg(long)]
    pub init: Option<WeightPair>,
    #[command(flatten)]
    pub opts: TrainOpts,
}

#[derive(Clone, Debug, Args)]
pub struct PipelineArgs {
    /// Raw frame files or directories of them.
    #[arg(long, num_args = 1.., required = true)]
    pub input: Vec<PathBuf>,
    #[arg(long, default_value = "auto")]
    pub tamb: Tamb,
    /// `nuc.twt,sr.twt`.
    #[arg(long)]
    pub weights: WeightPair,
    #[arg(long, default_value_t = 2)]
    pub scale: usize,
    #[arg(long, default_value = "single")]
    pub mode: NucMode,
    /// Also write the NUC output under `<out>/nuc`.
    #[arg(long)]
    pub save_nuc: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    /// Canopy masks; nonzero pixels count as plants.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    #[arg(long, default_value = "auto")]
    pub tamb: Tamb,
    /// Metrics CSV path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Debug, Args)]
pub struct BenchArgs {
    /// Output frame size.
    #[arg(long, default_value = "240x320")]
    pub size: Dims,
    #[arg(long, default_value_t = 2)]
    pub scale: usize,
    #[arg(long, default_value = "single")]
    pub mode: NucMode,
    #[arg(long, default_value_t = 5)]
    pub reps: usize,
    /// Benchmark these weights instead of random ones (`nuc.twt,sr.twt`).
    #[arg(long)]
    pub weights: Option<WeightPair>,
    /// Also check that these thread counts give identical outputs, e.g. `1,4`.
    #[arg(long, value_delimiter = ',')]
    pub check_threads: Vec<usize>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Clone, Debug, Args)]
pub struct ReportArgs {
    /// Metrics CSV written by `eval`.
    #[arg(long)]
    pub eval: PathBuf,
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn value_parsers() {
        assert_eq!("240x320".parse::<Dims>().unwrap(), Dims { height: 240, width: 320 });
        assert!("240".parse::<Dims>().is_err());
        assert!("0x4".parse::<Dims>().is_err());
        assert_eq!("0,45".parse::<Range>().unwrap(), Range(0.0, 45.0));
        assert!("5,1".parse::<Range>().is_err());
        assert_eq!("auto".parse::<Tamb>().unwrap(), Tamb::Auto);
        assert_eq!("21.5".parse::<Tamb>().unwrap(), Tamb::Value(21.5));
        assert!("nan".parse::<Tamb>().is_err());
        assert_eq!("a.twt,b.twt".parse::<WeightPair>().unwrap().sr, PathBuf::from("b.twt"));
    }

    #[test]
    fn cli_parses() {
        let c =
            Cli::try_parse_from(["thermopipe", "--threads", "2", "bench", "--mode", "multi5", "--reps", "3"]).unwrap();
        assert_eq!(c.threads, Some(2));
        match c.command {
            Command::Bench(b) => {
                assert_eq!(b.mode, NucMode::Multi(5));
                assert_eq!(b.size, Dims { height: 240, width: 320 });
            }
            _ => panic!("wrong subcommand"),
        }
    }
}
