//! Batch front end: dataset synthesis, training, inference, evaluation,
//! benchmarking and reports. Every command works on files and directories.

pub mod args;
pub mod camera;
pub mod commands;
pub mod files;
pub mod svg;

use anyhow::Result;
use clap::Parser;

pub use args::{Cli, Command};

/// Environment variable read when `--threads` is not given.
pub const THREADS_ENV: &str = "THERMOPIPE_THREADS";

/// Result of a command that processes several items.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Outcome {
    pub processed: usize,
    pub failed: usize,
}

impl Outcome {
    pub fn success(&self) -> bool {
        self.failed == 0
    }

    pub fn exit_code(&self) -> i32 {
        i32::from(!self.success())
    }
}

/// `--threads`, else `THERMOPIPE_THREADS`, else all cores.
pub fn resolve_threads(flag: Option<usize>) -> Result<Option<usize>> {
    if let Some(t) = flag {
        return Ok(Some(t));
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => {
            let t: usize = v.trim().parse().map_err(|_| anyhow::anyhow!("{THREADS_ENV}={v} is not a thread count"))?;
            Ok(Some(t))
        }
        _ => Ok(None),
    }
}

pub fn run(cli: Cli) -> Result<Outcome> {
    let threads = resolve_threads(cli.threads)?;
    if threads == Some(0) {
        anyhow::bail!("thread count must be at least 1");
    }
    if let Some(t) = threads {
        if rayon::ThreadPoolBuilder::new().num_threads(t).build_global().is_err() {
            log::debug!("global thread pool already initialized");
        }
    }
    match cli.command {
        Command::Scenes(a) => commands::scenes::run(&a),
        Command::Simulate(a) => commands::simulate::run(&a),
        Command::Pretrain(a) => commands::train::pretrain(&a),
        Command::Train(a) => commands::train::train(&a),
        Command::Pipeline(a) => commands::pipeline::run(&a),
        Command::Eval(a) => commands::eval::run(&a),
        Command::Bench(a) => commands::bench::run(&a, threads),
        Command::Report(a) => commands::report::run(&a),
    }
}

/// Parse `args` and run; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(o) => o.exit_code(),
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}
