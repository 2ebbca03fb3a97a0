use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use impctl_cli::{load_config, resolve_workers, run_subcommand, with_seed, CliError, RunOptions, Subcommand};

/// Degenerate heat equation experiments: spectrum, evolution, observability
/// checks, constants, impulse synthesis and sweeps.
#[derive(Debug, Parser)]
#[command(name = "impctl", version)]
struct Args {
    #[arg(value_enum)]
    command: Subcommand,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to the config's `outputs`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Sweep worker cap (overrides IMPCTL_WORKERS).
    #[arg(long)]
    workers: Option<usize>,
    /// Replaces the first configured seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn run(args: Args) -> Result<i32, CliError> {
    let cfg = with_seed(load_config(&args.config)?, args.seed)?;
    let opts = RunOptions {
        out: args.out.unwrap_or_else(|| PathBuf::from(&cfg.outputs)),
        workers: resolve_workers(args.workers),
    };
    let outcome = run_subcommand(args.command, &cfg, &opts)?;
    for path in &outcome.artifacts {
        println!("{}", path.display());
    }
    Ok(outcome.exit_code())
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
