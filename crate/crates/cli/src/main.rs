//! `tweezer`: derive parameters, propagate, sweep, check and optimize
//! number-selective tweezer loading protocols.
//!
//! Exit codes: 0 success, 1 validity warning, 2 config error, 3 numerical failure.

mod commands;
mod config;
mod failure;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::Context;
use crate::config::{resolve, RunConfig};
use crate::failure::Failure;
use crate::output::OutDir;

#[derive(Parser)]
#[command(name = "tweezer", version, about = "Number-selective atom transfer into an optical tweezer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Named preset; overrides the preset named in the config.
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads for sweeps; all cores if absent.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed of the optimizer's random start.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Record wall-clock times in sweep outputs (makes them run-dependent).
    #[arg(long, global = true)]
    timing: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Print and export the derived model parameters.
    Params,
    /// Propagate the configured protocol and export the trajectory.
    Propagate,
    /// Evaluate the protocol on a parameter grid.
    Sweep,
    /// Report validity margins; exits 1 unless every margin is strong.
    Check,
    /// Maximize the transfer probability over bounded parameters.
    Optimize,
}

fn run(cli: &Cli) -> Result<i32, Failure> {
    let (cfg, raw) = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))?;
            let cfg = RunConfig::from_json(&text)?;
            let raw: serde_json::Value = serde_json::from_str(&text).map_err(|e| Failure::config(e.to_string()))?;
            (cfg, raw)
        }
        None if cli.preset.is_some() => (RunConfig::default(), serde_json::Value::Null),
        None => return Err(Failure::config("give --config or --preset")),
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::config("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::config(e.to_string()))?;
    }
    let resolved = resolve(&cfg, cli.preset.as_deref(), cli.seed)?;
    let ctx = Context {
        raw: &raw,
        resolved,
        out: OutDir::create(&cli.out)?,
        timing: cli.timing,
    };
    match cli.command {
        Command::Params => commands::params(&ctx),
        Command::Propagate => commands::propagate_cmd(&ctx),
        Command::Sweep => commands::sweep(&ctx),
        Command::Check => commands::check(&ctx),
        Command::Optimize => commands::optimize(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code as u8)
        }
    }
}
