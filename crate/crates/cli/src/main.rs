//! `qsource`: entropy traces, high-probability subspace sweeps and coding
//! experiments for finitely correlated sources.
//!
//! Exit codes: 0 success, 1 an exact inequality failed its self-check,
//! 2 configuration or input error.

mod cache;
mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use qsource::{Units, DEFAULT_SIZE_CAP};

use crate::cache::EigenCache;
use crate::commands::{Context, Status};
use crate::config::{check_block_lengths, check_delta, check_eps, resolve_source, FileConfig, Format};

#[derive(Parser)]
#[command(name = "qsource", version, about = "Finitely correlated source experiments")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Source document (JSON Kraus source or tagged source model)
    #[arg(long, global = true)]
    source: Option<PathBuf>,
    /// Built-in source: example1, maxmixed(d) or diag(p1,...)
    #[arg(long, global = true)]
    preset: Option<String>,
    /// TOML file with defaults for any of these options
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file; `-` or absent means standard output
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Directory for cached eigensystems
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    /// Largest block dimension d^n allowed
    #[arg(long, global = true)]
    cap: Option<usize>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Report entropies and log-dimensions in bits instead of nats
    #[arg(long, global = true)]
    bits: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Block entropies S_1..S_N and mean-entropy estimates
    Entropy {
        #[arg(long = "n-max", visible_alias = "n")]
        n_max: Option<usize>,
    },
    /// High-probability subspace dimensions over n and ε
    Hps {
        #[arg(long = "n-max", visible_alias = "n")]
        n_max: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        eps: Vec<f64>,
    },
    /// Direct coding experiment over a grid of (n, ε, mixer seed)
    Theorem1 {
        #[arg(long, value_delimiter = ',')]
        n: Vec<usize>,
        #[arg(long, value_delimiter = ',')]
        eps: Vec<f64>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        seed: Vec<u64>,
    },
    /// Converse experiment over a grid of (n, seed)
    Theorem2 {
        #[arg(long, value_delimiter = ',')]
        n: Vec<usize>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        seed: Vec<u64>,
    },
    /// Check Kraus relations, stationarity and marginal compatibility
    Validate {
        #[arg(long = "n-max", visible_alias = "n")]
        n_max: Option<usize>,
    },
}

const DEFAULT_N_MAX: usize = 5;
const DEFAULT_N: usize = 4;
const DEFAULT_EPS: f64 = 0.1;
const DEFAULT_DELTA: f64 = 0.1;
const DEFAULT_TRIALS: usize = 40;

/// Flag value if given, else the config file's, else `default`.
fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

fn pick_list<T: Clone>(flag: Vec<T>, file: Option<Vec<T>>, default: Vec<T>) -> Vec<T> {
    if !flag.is_empty() {
        flag
    } else {
        file.unwrap_or(default)
    }
}

fn run(cli: Cli) -> Result<Status> {
    let c = cli.common;
    let file = match &c.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let (source_path, preset) = if c.source.is_some() || c.preset.is_some() {
        (c.source, c.preset)
    } else {
        (file.source.clone(), file.preset.clone())
    };
    let source = resolve_source(source_path.as_deref(), preset.as_deref())?;
    let cache = match c.cache_dir.or(file.cache_dir.clone()) {
        Some(dir) => Some(EigenCache::open(&dir, &source.model)?),
        None => None,
    };
    let ctx = Context {
        source,
        cap: pick(c.cap, file.cap, DEFAULT_SIZE_CAP),
        cache,
        format: pick(c.format, file.format, Format::Csv),
        units: if c.bits || file.bits.unwrap_or(false) { Units::Bits } else { Units::Nats },
        out: c.out.or(file.out.clone()).filter(|p| p.as_os_str() != "-"),
    };

    let n_max = |flag: Option<usize>| -> Result<usize> {
        let n = pick(flag, file.n_max, DEFAULT_N_MAX);
        check_block_lengths(&[n])?;
        Ok(n)
    };
    match cli.command {
        Command::Entropy { n_max: flag } => commands::entropy(&ctx, n_max(flag)?),
        Command::Hps { n_max: flag, eps } => {
            let eps = pick_list(eps, file.eps.clone(), vec![DEFAULT_EPS]);
            check_eps(&eps)?;
            commands::hps(&ctx, n_max(flag)?, eps)
        }
        Command::Theorem1 { n, eps, delta, seed } => {
            let n = pick_list(n, file.n.clone(), vec![DEFAULT_N]);
            let eps = pick_list(eps, file.eps.clone(), vec![DEFAULT_EPS]);
            let delta = pick(delta, file.delta, DEFAULT_DELTA);
            let seeds = pick_list(seed, file.seeds.clone(), vec![0]);
            check_block_lengths(&n)?;
            check_eps(&eps)?;
            check_delta(delta)?;
            commands::theorem1(&ctx, n, eps, delta, seeds)
        }
        Command::Theorem2 { n, delta, trials, seed } => {
            let n = pick_list(n, file.n.clone(), vec![DEFAULT_N]);
            let delta = pick(delta, file.delta, DEFAULT_DELTA);
            let trials = pick(trials, file.trials, DEFAULT_TRIALS);
            let seeds = pick_list(seed, file.seeds.clone(), vec![0]);
            check_block_lengths(&n)?;
            check_delta(delta)?;
            anyhow::ensure!(trials >= 1, "--trials must be at least 1");
            commands::theorem2(&ctx, n, delta, trials, seeds)
        }
        Command::Validate { n_max: flag } => commands::validate(&ctx, pick(flag, file.n_max, 3)),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Violation) => ExitCode::from(1),
        Ok(Status::InvalidSource) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
