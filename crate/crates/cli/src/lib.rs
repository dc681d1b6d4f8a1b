//! Command-line driver for `strongwalk-core`: subcommands for each part of
//! the library and a convergence study that fits empirical rates.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod args;
pub mod catalog;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod study;

use std::fs::File;
use std::io::{BufWriter, Write};

pub use args::Cli;
pub use error::CliError;

/// Runs a parsed command line and writes its output.
pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let (doc, format) = commands::run(cli)?;
    match &cli.out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            doc.write(format, &mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            doc.write(format, &mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}
