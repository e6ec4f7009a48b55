mod cli;
mod config;
mod run;

use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches};

use centroid_sec::exec::configure_threads;
use centroid_sec::Execution;

use crate::cli::{Cli, THREADS_ENV};

fn try_parse(argv: &[String]) -> Result<Cli, u8> {
    let m = Cli::command().try_get_matches_from(argv).map_err(|e| {
        let _ = e.print();
        if e.use_stderr() {
            2
        } else {
            0
        }
    })?;
    Cli::from_arg_matches(&m).map_err(|e| {
        let _ = e.print();
        2
    })
}

const VALUE_GLOBALS: [&str; 2] = ["threads", "config"];

/// Parse argv, folding in the config file if one is named.
fn parse(argv: &[String]) -> Result<Cli, u8> {
    let root = Cli::command();
    let (config, active) = config::prescan(argv, &VALUE_GLOBALS, &root);
    let Some(path) = config else {
        return try_parse(argv);
    };
    let fail = |msg: String| {
        eprintln!("error: config {path}: {msg}");
        2u8
    };
    let text = std::fs::read_to_string(&path).map_err(|e| fail(e.to_string()))?;
    let entries = config::parse(&text).map_err(fail)?;
    let active: Vec<&str> = active.iter().map(String::as_str).collect();
    let skip: &[&str] = if std::env::var_os(THREADS_ENV).is_some() {
        &["threads"]
    } else {
        &[]
    };
    let inj = config::inject(&root, &entries, &active, skip).map_err(fail)?;
    try_parse(&config::splice(argv, &active, &VALUE_GLOBALS, &inj))
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match parse(&argv) {
        Ok(c) => c,
        Err(code) => return ExitCode::from(code),
    };
    if let Some(t) = cli.threads {
        configure_threads(t as usize);
    }
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    match run::dispatch(&cli.command, exec) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
