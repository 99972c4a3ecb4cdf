use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use gan_singular::harness::{run, ExperimentConfig, Mode};
use gan_singular::par::with_threads;
use gan_singular::rng::Seed;
use gan_singular::Error;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    Rates,
    Gan,
    Mle,
    Fano,
    OtBench,
    Audit,
}

impl From<Cmd> for Mode {
    fn from(c: Cmd) -> Mode {
        match c {
            Cmd::Rates => Mode::Rates,
            Cmd::Gan => Mode::Gan,
            Cmd::Mle => Mode::Mle,
            Cmd::Fano => Mode::Fano,
            Cmd::OtBench => Mode::OtBench,
            Cmd::Audit => Mode::Audit,
        }
    }
}

/// Runs one experiment and writes CSV tables, an SVG plot and summary.json.
///
/// Exit status: 0 on success, 2 on a configuration error, 3 on a numerical
/// failure.
#[derive(Debug, Parser)]
#[command(name = "lab", version)]
struct Args {
    /// Experiment to run; overrides the config's `mode`.
    mode: Cmd,
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: u64,
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = ExperimentConfig::load(&args.config).and_then(|mut cfg| {
        cfg.mode = args.mode.into();
        if args.threads == Some(0) {
            return Err(Error::config("--threads", "must be >= 1"));
        }
        with_threads(args.threads, || run(&cfg, Seed(args.seed), &args.out))
    });
    match result {
        Ok(out) => {
            for f in &out.files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 3 })
        }
    }
}
