use std::process::ExitCode;

use clap::Parser;
use qdist_cli::commands::{execute, Cli};

fn main() -> ExitCode {
    ExitCode::from(execute(&Cli::parse()))
}
