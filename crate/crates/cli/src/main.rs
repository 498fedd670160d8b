use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dbar_cli::{execute, exit, RunSpec};

/// Spectral solver for the semiclassical D-bar problem.
#[derive(Parser)]
#[command(version)]
struct Args {
    #[command(subcommand)]
    command: Command,

    /// Log progress (repeat for more detail); overridden by RUST_LOG.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
}

#[derive(Subcommand)]
enum Command {
    /// Solve as described by a spec file and write the requested outputs.
    Run { spec: PathBuf },
    /// Print a spec file in canonical form, with every default filled in.
    Canonical { spec: PathBuf },
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(args) => args,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::ERROR as u8 } else { 0 });
        }
    };
    let level = match args.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match &args.command {
        Command::Run { spec } => RunSpec::from_file(spec).and_then(|s| execute(&s)).map(|r| r.exit_code),
        Command::Canonical { spec } => RunSpec::from_file(spec).map(|s| {
            print!("{}", s.to_canonical());
            exit::SUCCESS
        }),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit::ERROR as u8)
        }
    }
}
