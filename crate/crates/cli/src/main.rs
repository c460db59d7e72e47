mod cli;
mod commands;
mod exit;
mod model;
mod report;

use std::process::ExitCode;

use clap::Parser;

use crate::cli::{Cli, Command};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() {
                exit::Code::Usage as u8
            } else {
                0
            });
        }
    };
    let res = match &cli.command {
        Command::Analyze(a) => commands::analyze::run(a),
        Command::Bound(a) => commands::bound::run(a),
        Command::Simulate(a) => commands::simulate::run(a),
        Command::Verify(a) => commands::verify::run(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
