//! `dnls`: command-line front end for the thermodynamics library.

mod commands;
mod config;
mod error;
mod grid;
mod output;

use clap::{CommandFactory, Parser};
use config::Cli;
use error::CliError;
use std::process::ExitCode;

fn main() -> ExitCode {
    if std::env::args_os().len() <= 1 {
        Cli::command().print_help().ok();
        println!();
        return ExitCode::SUCCESS;
    }
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match drive(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn drive(cli: &Cli) -> Result<ExitCode, CliError> {
    let (cfg, prov) = config::resolve(cli)?;
    if cfg.jobs > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cfg.jobs).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    log::info!("running {} with seed {}", cfg.command.name(), cfg.seed);
    let out = commands::run(&cfg)?;
    output::emit(&cfg, &prov, &out)?;
    let failed = out.failed_checks();
    if failed.is_empty() {
        return Ok(ExitCode::SUCCESS);
    }
    for c in &failed {
        eprintln!("check failed: {}: {}", c.name, c.detail);
    }
    Err(CliError::CheckFailed(format!("{} check(s) failed", failed.len())))
}
