//! Command-line front end for `memn-core`: matrices, payoffs, fields,
//! trajectories and the verification battery.

pub mod battery;
pub mod cli;
pub mod commands;
pub mod error;
pub mod input;
pub mod report;
pub mod tolerances;

#[cfg(test)]
mod e2e_tests;

use std::ffi::OsString;

use clap::Parser;

pub use error::CliError;

/// Stamp written into every output file.
pub const VERSION: &str = concat!("memn ", env!("CARGO_PKG_VERSION"));

/// Exit code of a completed command.
pub fn run(cli: cli::Cli) -> Result<i32, CliError> {
    use cli::{Command, VerifyTarget};
    match &cli.command {
        Command::Matrix(a) => commands::cmd_matrix(a).map(|_| 0),
        Command::Payoff(a) => commands::cmd_payoff(a).map(|_| 0),
        Command::Field(a) => commands::cmd_field(a).map(|_| 0),
        Command::Integrate(a) => commands::cmd_integrate(a).map(|_| 0),
        Command::Verify(v) => match &v.target {
            Some(VerifyTarget::Symmetry(s)) => commands::cmd_verify_symmetry(s),
            None => commands::cmd_verify(&v.battery),
        },
    }
}

/// Parse, run, report errors on stderr; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match cli::Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("memn: {e}");
            e.exit_code()
        }
    }
}
