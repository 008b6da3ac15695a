//! Command-line surface: generation, training, inference, diagnostics and
//! the benchmark grid, with reproducible CSV and JSON outputs.

pub mod args;
pub mod commands;
pub mod error;
pub mod manifest;

use clap::Parser;

use args::{Cli, Command};
use error::CliError;

pub use manifest::RunManifest;

/// Parses `argv`, runs the command and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { 2 } else { 0 };
            let _ = err.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("delu: {err}");
            err.exit_code()
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Generate(args) => {
            let out = args.out.clone();
            let digest = commands::run_generate(args)?;
            println!("sha256 {digest}  {}", out.display());
        }
        Command::Train(args) => {
            let mse = commands::run_train(args)?;
            println!("final mse {mse}");
        }
        Command::Infer(args) => {
            commands::run_infer(args)?;
        }
        Command::Diagnose(args) => {
            commands::run_diagnose(args)?;
        }
        Command::Bench(args) => {
            let out = args.out.clone();
            let rows = commands::run_bench(args)?;
            let failed = rows.iter().filter(|r| !r.error.is_empty()).count();
            println!("{} rows written to {} ({failed} with errors)", rows.len(), out.display());
        }
    }
    Ok(())
}
