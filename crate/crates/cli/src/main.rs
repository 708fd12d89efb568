mod args;
mod commands;
mod config;
mod output;

use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches};
use surfshape::ShapeError;

use args::Cli;

const THREADS_ENV: &str = "SURFSHAPE_THREADS";

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn fail(kind: &str, message: &str, code: u8) -> ExitCode {
    eprintln!("error: kind={kind} message={}", one_line(message));
    ExitCode::from(code)
}

fn shape_failure(e: &ShapeError) -> ExitCode {
    fail(e.kind(), &e.to_string(), if e.is_numerical() { 3 } else { 2 })
}

fn configure_threads() -> Result<(), ShapeError> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| {
            ShapeError::InvalidArgument(format!("{THREADS_ENV} must be a positive integer, got {value:?}"))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| ShapeError::InvalidArgument(e.to_string()))
}

fn main() -> ExitCode {
    let raw: Vec<_> = std::env::args_os().collect();
    let expanded = match config::expand(raw) {
        Ok(a) => a,
        Err(e) => return shape_failure(&e),
    };
    let command = Cli::command().mut_subcommands(|s| s.args_override_self(true));
    let matches = match command.try_get_matches_from(expanded) {
        Ok(m) => m,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let rendered = e.render().to_string();
            let first = rendered
                .lines()
                .next()
                .unwrap_or("")
                .trim_start_matches("error: ");
            return fail("usage", first, 2);
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => return fail("usage", &e.to_string(), 2),
    };
    if let Err(e) = configure_threads() {
        return shape_failure(&e);
    }
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => shape_failure(&e),
    }
}
