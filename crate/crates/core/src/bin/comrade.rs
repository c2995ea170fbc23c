use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use comrade::cli;

#[derive(Parser)]
#[command(name = "comrade", version, about = "Byzantine-robust one-round distributed Newton simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (`key = value` lines).
    #[arg(long)]
    config: PathBuf,
    /// Output file; defaults to the config's `output` (run only) or stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured algorithm and write the per-iteration trace CSV.
    Run(Common),
    /// Print every bound constant for the configured problem.
    Bounds(Common),
    /// Monte-Carlo sketch checks and compressor contract checks.
    Validate(Common),
}

fn main() -> ExitCode {
    let args = match Cli::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            // usage errors are config errors; 2 is reserved for bad data
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &args.command {
        Command::Run(c) => cli::cmd_run(&c.config, c.out.as_deref()),
        Command::Bounds(c) => cli::cmd_bounds(&c.config, c.out.as_deref()),
        Command::Validate(c) => cli::cmd_validate(&c.config, c.out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
