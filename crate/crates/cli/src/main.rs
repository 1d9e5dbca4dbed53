mod args;
mod commands;
mod presets;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};
use commands::EXIT_USAGE;

fn main() -> ExitCode {
    let argv = match presets::expand(std::env::args().collect()) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Solve(a) => commands::run_solve(a),
        Command::Order(a) => commands::run_order(a),
        Command::Basin(a) => commands::run_basin(a),
        Command::Scan(a) => commands::run_scan(a),
        Command::Compare(a) => commands::run_compare(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
