//! Config-driven driver around `impctl-core`: one subcommand per experiment,
//! deterministic artifacts on disk, JSON errors.

pub mod artifacts;
pub mod commands;
pub mod error;
pub mod sweep;

use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use impctl_core::config::{parse_config, RunConfig};

use artifacts::ArtifactDir;
pub use error::{CliError, CliResult, EXIT_CHECK_FAILED};

/// Environment variable overriding the default worker count.
pub const WORKERS_ENV: &str = "IMPCTL_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Subcommand {
    Spectrum,
    Evolve,
    Observe,
    Constants,
    Synthesize,
    Sweep,
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out: PathBuf,
    pub workers: usize,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub passed: bool,
    pub artifacts: Vec<PathBuf>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            EXIT_CHECK_FAILED
        }
    }
}

pub fn load_config(path: &Path) -> CliResult<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Ok(parse_config(&text)?)
}

/// Applies a `--seed` override to the first seed and re-validates.
pub fn with_seed(mut cfg: RunConfig, seed: Option<u64>) -> CliResult<RunConfig> {
    if let Some(s) = seed {
        match cfg.seeds.first_mut() {
            Some(first) => *first = s,
            None => cfg.seeds.push(s),
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Worker cap: explicit value, else the environment override, else the
/// available parallelism.
pub fn resolve_workers(flag: Option<usize>) -> usize {
    flag.or_else(|| std::env::var(WORKERS_ENV).ok().and_then(|v| v.parse().ok()))
        .or_else(|| std::thread::available_parallelism().ok().map(|n| n.get()))
        .unwrap_or(1)
        .max(1)
}

/// Runs one subcommand, writing `config.json` plus the subcommand's
/// artifacts into `opts.out`.
pub fn run_subcommand(cmd: Subcommand, cfg: &RunConfig, opts: &RunOptions) -> CliResult<RunOutcome> {
    let mut out = ArtifactDir::create(&opts.out, cfg.hash())?;
    out.text("config.json", &(cfg.emit() + "\n"))?;
    let passed = match cmd {
        Subcommand::Spectrum => commands::spectrum(cfg, &mut out)?,
        Subcommand::Evolve => commands::evolve(cfg, &mut out)?,
        Subcommand::Observe => commands::observe(cfg, &mut out)?,
        Subcommand::Constants => commands::constants(cfg, &mut out)?,
        Subcommand::Synthesize => commands::synthesize_cmd(cfg, &mut out)?,
        Subcommand::Sweep => sweep::sweep(cfg, opts.workers, &mut out)?,
    };
    Ok(RunOutcome {
        passed,
        artifacts: out.into_written(),
    })
}
