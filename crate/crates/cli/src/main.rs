use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    ExitCode::from(evapflow_cli::main_with(evapflow_cli::Args::parse()))
}
