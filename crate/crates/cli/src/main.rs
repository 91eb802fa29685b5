//! `bicm`: curve data for shaped CM, MLC and BICM on the AWGN channel.
//!
//! Exit codes: 0 on success, 1 on I/O failure, 2 on a usage error and 3
//! when a numerical check failed (the rows that were computed are still
//! written).

mod args;
mod commands;
mod output;

use std::process::ExitCode;

use args::Command;

#[derive(Debug)]
pub enum Failure {
    Clap(clap::Error),
    Usage(String),
    Io(std::io::Error),
    Numeric(bicm_core::Error),
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e)
    }
}

impl From<bicm_core::Error> for Failure {
    fn from(e: bicm_core::Error) -> Self {
        Failure::Numeric(e)
    }
}

/// Numerical checks that failed while the output was still written.
pub struct Outcome {
    pub flags: Vec<String>,
}

fn run() -> Result<Outcome, Failure> {
    let cli = args::parse(std::env::args().collect())?;
    match &cli.command {
        Command::Capacity(a) => commands::capacity(a),
        Command::Exponent(a) => commands::exponent(a),
        Command::Wideband(a) => commands::wideband(a),
        Command::Optimize(a) => commands::optimize_one(a),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(o) if o.flags.is_empty() => ExitCode::SUCCESS,
        Ok(o) => {
            for f in &o.flags {
                eprintln!("bicm: warning: {f}");
            }
            ExitCode::from(3)
        }
        Err(Failure::Clap(e)) => {
            let _ = e.print();
            ExitCode::from(e.exit_code() as u8)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("bicm: error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Io(e)) => {
            eprintln!("bicm: I/O error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Numeric(e)) => {
            eprintln!("bicm: numerical failure: {e}");
            ExitCode::from(3)
        }
    }
}
