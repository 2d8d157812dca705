//! Command-line front end for `rmwave-core`.
//!
//! Exit codes: 0 on success, 1 when the numerics fail (a JSON diagnostic goes
//! to stderr and no artifacts are left behind), 2 on a usage error.

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::io::Write;

use serde_json::json;

pub use commands::{run, Failure};
pub use config::{parse_args, Command, Format, RunConfig, Usage};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Parses, runs and reports; returns the process exit code.
pub fn main_with<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cfg = match parse_args(argv) {
        Ok(cfg) => cfg,
        Err(Usage::Info(text)) => {
            print!("{text}");
            return EXIT_OK;
        }
        Err(Usage::Error(line)) => {
            eprintln!("rmwave: {line}");
            return EXIT_USAGE;
        }
    };
    match run(&cfg) {
        Ok(paths) => {
            let mut stdout = std::io::stdout().lock();
            for p in paths {
                let _ = writeln!(stdout, "{}", p.display());
            }
            EXIT_OK
        }
        Err(Failure::Usage(line)) => {
            eprintln!("rmwave: {line}");
            EXIT_USAGE
        }
        Err(Failure::Numerical { kind, message }) => {
            diagnostic(&cfg, kind, &message);
            EXIT_FAILURE
        }
        Err(Failure::Io(e)) => {
            diagnostic(&cfg, "io", &e.to_string());
            EXIT_FAILURE
        }
    }
}

fn diagnostic(cfg: &RunConfig, kind: &str, message: &str) {
    let d = json!({
        "status": "error",
        "command": cfg.command.name(),
        "kind": kind,
        "message": message,
    });
    eprintln!("{d}");
}
