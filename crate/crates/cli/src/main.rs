use std::process::ExitCode;

use clap::Parser;
use stn_cli::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match stn_cli::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("stnchain: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
