//! `momentum`: batch runner for momentum-method experiments.
//!
//! Exit codes: 0 when every requested check passes, 2 on a check failure,
//! 1 on configuration or runtime errors.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod output;
mod run;
mod saddle;
mod setup;
mod sweep;
mod track;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use momentum_core::problems::Problem;

use crate::config::Loaded;
use crate::output::{OutDir, Provenance};

#[derive(Parser)]
#[command(name = "momentum", version, about = "Certified momentum-method experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Certified run: trace.csv, certificate.json, report.json.
    Run(Common),
    /// Tracking error against the gradient flow: tracking.csv.
    Track(Common),
    /// Critical-point classification and escape trials: saddle_report.json.
    Saddle(Common),
    /// Parameter grid: sweep.csv.
    Sweep(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, env = "MOMENTUM_OUT_DIR", default_value = "out")]
    out: PathBuf,
    /// Master seed; overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for trials and sweep cells (default: logical cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Fixed step size, overriding `params.alpha`.
    #[arg(long)]
    alpha: Option<f64>,
    /// Only errors on stderr, nothing on stdout.
    #[arg(long)]
    quiet: bool,
}

pub struct Context {
    pub loaded: Loaded,
    pub seed: u64,
    pub alpha: Option<f64>,
    pub quiet: bool,
    pub out: OutDir,
}

impl Context {
    pub fn provenance(&self, p: &dyn Problem<f64>) -> Provenance {
        Provenance {
            config_sha256: self.loaded.sha256.clone(),
            seed: self.seed,
            problem_seed: p.seed(),
            tool_version: env!("CARGO_PKG_VERSION"),
        }
    }
}

fn execute(command: Command) -> Result<bool> {
    let (args, f): (Common, fn(&Context) -> Result<bool>) = match command {
        Command::Run(a) => (a, run::cmd_run),
        Command::Track(a) => (a, track::cmd_track),
        Command::Saddle(a) => (a, saddle::cmd_saddle),
        Command::Sweep(a) => (a, sweep::cmd_sweep),
    };
    let level = if args.quiet { "error" } else { "warn" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    if let Some(n) = args.workers {
        if n == 0 {
            anyhow::bail!("--workers: must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let loaded = config::load(&args.config)?;
    let seed = args.seed.unwrap_or(loaded.config.seed);
    let ctx = Context {
        seed,
        alpha: args.alpha,
        quiet: args.quiet,
        out: OutDir::create(&args.out)?,
        loaded,
    };
    f(&ctx)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: one or more requested checks failed");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
