//! `mbprecode`: batch runs of the multibeam precoding simulator.

mod config;
mod runner;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use config::FileConfig;
use runner::Job;

#[derive(Parser)]
#[command(name = "mbprecode", version, about = "Monte Carlo evaluation of two-stage multicast multibeam precoders")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Check a config and print the execution plan.
    Validate(Common),
    /// Run every scenario over the power sweep.
    Run(Common),
    /// Repeat the run for each value in the config's [sweep] table.
    Sweep(Common),
    /// Write CSI-sharing overhead for the gateway scenarios, no simulation.
    Overhead(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment file (TOML). Transmit powers are given in dBW.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Cap on worker threads.
    #[arg(long)]
    threads: Option<usize>,
    /// Validate and print the plan without computing.
    #[arg(long)]
    dry_run: bool,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count)]
    verbose: u8,
}

impl Common {
    fn job(&self) -> Result<Job> {
        let mut cfg = FileConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(t) = self.threads {
            cfg.threads = Some(cfg.threads.map_or(t, |c| c.min(t)));
        }
        let base_dir = self.config.parent().map(PathBuf::from).unwrap_or_default();
        Ok(Job { cfg, base_dir, out_dir: self.out.clone(), dry_run: self.dry_run })
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, action): (&Common, fn(&Job) -> Result<()>) = match &cli.verb {
        Verb::Validate(c) => (c, runner::validate),
        Verb::Run(c) => (c, runner::run),
        Verb::Sweep(c) => (c, runner::sweep),
        Verb::Overhead(c) => (c, runner::overhead),
    };
    let level = match common.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();
    match common.job().and_then(|job| action(&job)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
