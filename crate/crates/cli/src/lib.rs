//! Command-line driver: configuration, experiment dispatch and report files.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use skeleton_control::ARTIFACT_VERSION;

use config::{locate_key, Config, OutputFormat};
use error::CliError;
use report::{write_outputs, Payload, Report, Table, Timing};

#[derive(Debug, Parser)]
#[command(name = "skeleton-control", version, about = "Skeleton-based stochastic control experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// TOML configuration file; defaults are used for anything it omits.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Master seed. Falls back to SKELCTL_SEED, then to the config file.
    #[arg(long, env = "SKELCTL_SEED", value_name = "U64")]
    pub seed: Option<u64>,
    /// Worker threads; defaults to one per core.
    #[arg(long, value_name = "N")]
    pub threads: Option<usize>,
    /// Output directory, created if missing.
    #[arg(long, value_name = "DIR", default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample the skeleton and check its distributional properties.
    SkeletonStats(CommonArgs),
    /// Solve the dynamic program for the configured model.
    Solve(CommonArgs),
    /// Hedge a European call and compare the premium with Black–Scholes.
    #[command(name = "hedge-table1")]
    HedgeTable1 {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        k: Option<u32>,
        #[arg(long = "n-mc")]
        n_mc: Option<usize>,
    },
    /// Sweep the level k and record the convergence series.
    Convergence {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long = "k-min")]
        k_min: Option<u32>,
        #[arg(long = "k-max")]
        k_max: Option<u32>,
    },
}

const DEFAULT_SEED: u64 = 0;

impl Command {
    fn common(&self) -> &CommonArgs {
        match self {
            Command::SkeletonStats(c) | Command::Solve(c) => c,
            Command::HedgeTable1 { common, .. } | Command::Convergence { common, .. } => common,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Command::SkeletonStats(_) => "skeleton-stats",
            Command::Solve(_) => "solve",
            Command::HedgeTable1 { .. } => "hedge-table1",
            Command::Convergence { .. } => "convergence",
        }
    }

    /// Command-line overrides of configuration keys.
    fn apply_overrides(&self, cfg: &mut Config) {
        match *self {
            Command::HedgeTable1 { k, n_mc, .. } => {
                if let Some(k) = k {
                    cfg.hedging.k = k;
                }
                if let Some(n) = n_mc {
                    cfg.hedging.n_mc = n;
                }
            }
            Command::Convergence { k_min, k_max, .. } => {
                if let Some(k) = k_min {
                    cfg.convergence.k_min = k;
                }
                if let Some(k) = k_max {
                    cfg.convergence.k_max = k;
                }
            }
            _ => {}
        }
    }
}

/// Loads, overrides and validates the configuration.
pub fn prepare(command: &Command) -> Result<(Config, u64), CliError> {
    let common = command.common();
    let (mut cfg, source, origin) = match &common.config {
        Some(path) => {
            let (cfg, text) = Config::load(path)?;
            (cfg, text, path.display().to_string())
        }
        None => (Config::default(), String::new(), "<defaults>".to_string()),
    };
    command.apply_overrides(&mut cfg);
    cfg.validate().map_err(|e| CliError::Invalid {
        line: locate_key(&source, e.section, e.key),
        origin,
        section: e.section,
        key: e.key,
        message: e.message,
    })?;
    let seed = common.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED);
    let mut cfg = cfg.resolve();
    cfg.seed = Some(seed);
    Ok((cfg, seed))
}

fn finish<R: Serialize>(
    command: &Command,
    cfg: Config,
    seed: u64,
    results: R,
    tables: Vec<Table>,
    started: Instant,
) -> Result<PathBuf, CliError> {
    let (files, series, written) = match cfg.output.format {
        OutputFormat::Csv => (tables.iter().map(|t| t.file).collect(), Vec::new(), tables),
        OutputFormat::Json => (Vec::new(), tables, Vec::new()),
    };
    let report = Report {
        payload: Payload {
            artifact_version: ARTIFACT_VERSION,
            subcommand: command.name(),
            seed,
            config: cfg,
            results,
            files,
            series,
        },
        timing: Timing {
            runtime_seconds: started.elapsed().as_secs_f64(),
            threads: rayon::current_num_threads(),
        },
    };
    write_outputs(&command.common().out, &report, &written)
}

fn dispatch(command: &Command, cfg: Config, seed: u64) -> Result<PathBuf, CliError> {
    let started = Instant::now();
    match command {
        Command::SkeletonStats(_) => {
            let (r, t) = commands::skeleton_stats(&cfg, seed)?;
            finish(command, cfg, seed, r, t, started)
        }
        Command::Solve(_) => {
            let (r, t) = commands::solve_model(&cfg, seed)?;
            finish(command, cfg, seed, r, t, started)
        }
        Command::HedgeTable1 { .. } => {
            let (r, t) = commands::hedge_table1(&cfg, seed)?;
            finish(command, cfg, seed, r, t, started)
        }
        Command::Convergence { .. } => {
            let (r, t) = commands::convergence(&cfg, seed)?;
            finish(command, cfg, seed, r, t, started)
        }
    }
}

/// Runs one subcommand and returns the path of its report.
pub fn run(cli: &Cli) -> Result<PathBuf, CliError> {
    let (cfg, seed) = prepare(&cli.command)?;
    match cli.command.common().threads {
        None => dispatch(&cli.command, cfg, seed),
        Some(0) => Err(CliError::Threads("must be at least 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Threads(e.to_string()))?;
            pool.install(|| dispatch(&cli.command, cfg, seed))
        }
    }
}
