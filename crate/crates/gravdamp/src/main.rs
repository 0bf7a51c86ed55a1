use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use gravdamp::{run, Format, RunOptions, ScenarioConfig, Subcommand};

/// Gravitational decoherence and radiation damping of a bound mass.
#[derive(Debug, Parser)]
#[command(version)]
struct Cli {
    #[arg(value_enum)]
    subcommand: Subcommand,
    /// Scenario file (TOML); optional for `verify`.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, overriding `[output] directory`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for ensembles (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match &cli.config {
        Some(path) => match ScenarioConfig::load(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        },
        None if cli.subcommand == Subcommand::Verify => ScenarioConfig::default(),
        None => {
            eprintln!("error: --config is required for `{}`", cli.subcommand.name());
            return ExitCode::from(2);
        }
    };
    let opts = RunOptions {
        out_dir: cli.out,
        format: cli.format,
        seed: cli.seed,
        threads: cli.threads,
    };
    match run(cli.subcommand, &config, &opts) {
        Ok(report) => {
            for c in &report.checks {
                println!("{}", c.line());
            }
            println!("output: {}", report.out_dir.display());
            if report.all_passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
