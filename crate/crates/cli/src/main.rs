//! `ordex` — Monte-Carlo experiments and asymptotic checks for extremes of
//! order-statistic processes built from self-similar Gaussian and
//! skew-Gaussian processes.

mod commands;
mod config;

use clap::{Parser, Subcommand};
use config::{ConfigError, RunConfig};
use std::path::PathBuf;
use std::process::ExitCode;

const WORKERS_ENV: &str = "ORDEX_WORKERS";

#[derive(Parser)]
#[command(name = "ordex", version, about = "Extremes of order-statistic processes: simulation and asymptotics")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Configuration file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (the ORDEX_WORKERS environment variable overrides).
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Output directory.
    #[arg(long, global = true, default_value = "ordex-out")]
    out: PathBuf,

    /// Exit with code 3 when any probed condition fails.
    #[arg(long, global = true)]
    strict: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate ensembles or sojourn samples and dump them as text.
    Simulate,
    /// Estimate supremum probabilities and tabulate them against a
    /// prediction source.
    EstimateP,
    /// Estimate the limit-cluster occupation tail and its derivative at 0.
    Theta,
    /// Run the hypothesis probes (A, B, C, C*).
    CheckConditions,
    /// Check the sojourn excess integral against the occupation-tail band.
    Prop2,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config_path = match &cli.config {
        Some(p) => p.clone(),
        None => {
            eprintln!("config error: --config PATH is required");
            return ExitCode::from(2);
        }
    };
    let text = match std::fs::read_to_string(&config_path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("config error: cannot read {}: {e}", config_path.display());
            return ExitCode::from(2);
        }
    };
    let config = match RunConfig::from_str(&text) {
        Ok(c) => c,
        Err(ConfigError(msg)) => {
            eprintln!("{msg}");
            return ExitCode::from(2);
        }
    };
    let seed = cli.seed.unwrap_or(config.mc.seed);
    let workers = std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .or(cli.workers)
        .unwrap_or_else(num_threads_default);

    if let Err(e) = std::fs::create_dir_all(&cli.out) {
        eprintln!("runtime error: cannot create {}: {e}", cli.out.display());
        return ExitCode::from(1);
    }

    let pool = match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("runtime error: worker pool: {e}");
            return ExitCode::from(1);
        }
    };

    let ctx = commands::Context {
        config,
        seed,
        workers,
        out: cli.out.clone(),
        strict: cli.strict,
    };
    let result = pool.install(|| match cli.command {
        Command::Simulate => commands::simulate(&ctx),
        Command::EstimateP => commands::estimate_p(&ctx),
        Command::Theta => commands::theta(&ctx),
        Command::CheckConditions => commands::check_conditions(&ctx),
        Command::Prop2 => commands::prop2(&ctx),
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("runtime error: {e}");
            ExitCode::from(1)
        }
    }
}

fn num_threads_default() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}
