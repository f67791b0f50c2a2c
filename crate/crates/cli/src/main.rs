use std::path::PathBuf;
use std::process::ExitCode;

use cgo_cli::run::{execute, Command, Options};
use clap::Parser;

/// Fixed-energy inverse scattering experiments driven by TOML scenarios.
///
/// Outputs go to --out, else the scenario's `output`, else
/// $CGO_OUT_ROOT/<name>, else out/<name>. Exit status: 0 success,
/// 1 verification failure, 2 configuration error, 3 numerical failure.
#[derive(Parser)]
#[command(name = "cgo", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// Scenario file (TOML).
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to the number of physical cores.
    #[arg(long)]
    workers: Option<usize>,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let opts = Options {
        scenario: cli.scenario,
        out: cli.out,
        workers: cli.workers,
        seed: cli.seed,
    };
    match execute(cli.command, &opts) {
        Ok(outcome) => {
            println!("{}: {}", cli.command.name(), outcome.summary);
            println!("wrote {} files to {}", outcome.files.len(), outcome.out_dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("cgo {}: {e}", cli.command.name());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
