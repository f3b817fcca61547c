use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use mahc_cli::commands;
use mahc_cli::config::{load_config, ExperimentConfig};
use mahc_core::allocators::Scheme;
use mahc_core::marl::TrainedPolicy;

#[derive(Parser)]
#[command(
    name = "mahc",
    version,
    about = "Coded distributed computing on mobile workers: simulate, train, compare"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train MADDPG allocation agents.
    Train {
        #[command(flatten)]
        common: Common,
        /// Also write an SVG of the learning curve.
        #[arg(long)]
        svg: bool,
    },
    /// Evaluate one scheme over independent episodes.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "uniform")]
        scheme: Scheme,
        #[arg(long, default_value_t = 20)]
        episodes: usize,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Compare schemes on paired episodes.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Comma-separated scheme list.
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "uniform,load-balanced,hcmm"
        )]
        scheme: Vec<Scheme>,
        #[arg(long, default_value_t = 20)]
        episodes: usize,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        svg: bool,
    },
    /// Evaluate one scheme at several batch sizes.
    SweepBatch {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "marl")]
        scheme: Scheme,
        /// Comma-separated batch sizes.
        #[arg(long, value_delimiter = ',', required = true)]
        batch_sizes: Vec<usize>,
        #[arg(long, default_value_t = 20)]
        episodes: usize,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        svg: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in scenario, instead of a config file.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    straggler: Option<Switch>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

impl Common {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => load_config(path)?,
            (None, Some(name)) => ExperimentConfig::preset(name)?,
            (None, None) => bail!("pass --config PATH or --preset NAME"),
        };
        if let Some(seed) = self.seed {
            cfg.scenario.seed = seed;
        }
        if let Some(s) = self.straggler {
            cfg.scenario.straggler.enabled = matches!(s, Switch::On);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn policy(
    cfg: &ExperimentConfig,
    schemes: &[Scheme],
    checkpoint: &Option<PathBuf>,
) -> Result<Option<TrainedPolicy>> {
    match checkpoint {
        Some(path) => Ok(Some(commands::load_policy(path, &cfg.scenario)?)),
        None if schemes.contains(&Scheme::Marl) => {
            bail!("scheme `marl` needs a trained policy; pass --checkpoint")
        }
        None => Ok(None),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { common, svg } => {
            let cfg = common.resolve()?;
            let report = commands::train(&cfg, &common.out, svg, true)?;
            println!(
                "wrote {} and {}",
                report.checkpoint.display(),
                report.curve.display()
            );
        }
        Command::Evaluate {
            common,
            scheme,
            episodes,
            checkpoint,
        } => {
            let cfg = common.resolve()?;
            let pol = policy(&cfg, &[scheme], &checkpoint)?;
            let r = commands::evaluate(&cfg, scheme, episodes, pol.as_ref(), &common.out)?;
            println!(
                "{scheme}: mean total time {:.6} s (std {:.6}) over {episodes} episodes; wrote {}",
                r.summary.mean,
                r.summary.std,
                r.csv.display()
            );
        }
        Command::Compare {
            common,
            scheme,
            episodes,
            checkpoint,
            svg,
        } => {
            let cfg = common.resolve()?;
            let pol = policy(&cfg, &scheme, &checkpoint)?;
            let r = commands::compare(&cfg, &scheme, episodes, pol.as_ref(), &common.out, svg)?;
            for (s, sum) in r.schemes.iter().zip(&r.summaries) {
                println!(
                    "{s:>14}: {:.6} s  [{:.6}, {:.6}]",
                    sum.mean, sum.ci95_low, sum.ci95_high
                );
            }
        }
        Command::SweepBatch {
            common,
            scheme,
            batch_sizes,
            episodes,
            checkpoint,
            svg,
        } => {
            let cfg = common.resolve()?;
            let pol = policy(&cfg, &[scheme], &checkpoint)?;
            let rows = commands::sweep_batch(
                &cfg,
                scheme,
                &batch_sizes,
                episodes,
                pol.as_ref(),
                &common.out,
                svg,
            )?;
            for r in rows {
                println!("b = {:>6}: {:.6} s", r.batch_size, r.summary.mean);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
