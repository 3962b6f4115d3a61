use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    ExitCode::from(greenmono_cli::execute(greenmono_cli::Cli::parse()))
}
