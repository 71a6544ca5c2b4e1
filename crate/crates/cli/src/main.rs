use std::process::ExitCode;

use clap::Parser;
use ndcal_cli::Cli;

fn main() -> ExitCode {
    match ndcal_cli::run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
