//! Command-line front end for `dvao-core`: config files, run directories,
//! CSV and JSON artifacts.

#![forbid(unsafe_code)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod artifacts;
pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod formats;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::Parser;

pub use cli::{Cli, Command, Fault};
pub use config::RunConfig;
pub use error::CliError;

/// Reads `--config` (or the defaults) and applies the command-line overrides.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut config = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            RunConfig::parse(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(m) = cli.combiner {
        config.train.combiner = m;
    }
    if let Some(seed) = cli.seed {
        match cli.command {
            Command::Verify { .. } => config.verify_seed = seed,
            _ => config.train.seed = seed,
        }
    }
    Ok(config)
}

pub fn output_dir(cli: &Cli) -> PathBuf {
    cli.out
        .clone()
        .unwrap_or_else(|| cli.output_root.join(cli.command.name()))
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let out = output_dir(cli);
    if let Command::Report { run } = &cli.command {
        commands::report(run, &out, cli.force)?;
        return Ok(());
    }
    let config = resolve_config(cli)?;
    match &cli.command {
        Command::Verify { fault } => {
            let report = commands::verify(&config, *fault, &out, cli.force)?;
            if !report.passed {
                return Err(CliError::Failed("one or more suites failed".into()));
            }
        }
        Command::Train { wall_clock } => {
            commands::train(&config, *wall_clock, &out, cli.force)?;
        }
        Command::Sweep => {
            commands::sweep(&config, &out, cli.force)?;
        }
        Command::Sensitivity { group } => {
            commands::sensitivity(&config, group, &out, cli.force)?;
        }
        Command::Report { .. } => unreachable!("handled above"),
    }
    Ok(())
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
