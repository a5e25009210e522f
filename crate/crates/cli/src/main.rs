use std::process::ExitCode;

use clap::Parser;

use eitsim_cli::app::{execute, Cli};

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(report) => {
            for a in &report.artifacts {
                println!("{}", a.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
