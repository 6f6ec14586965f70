//! Command-line pipelines: synthesize degraded corpora, estimate degradation
//! parameters, restore and enhance images, and score results.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
//! Failures print one machine-readable JSON line to stderr and remove any
//! output files the failed run created. Every command is deterministic for a
//! fixed configuration; randomness flows only from `--seed`.

mod commands;
mod opts;
mod outputs;

use std::panic::AssertUnwindSafe;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use crate::opts::Cli;
use crate::outputs::OutputTracker;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };

    // The default hook would splatter a multi-line panic report on stderr;
    // failures must stay a single JSON line.
    std::panic::set_hook(Box::new(|_| {}));

    let mut outputs = OutputTracker::default();
    let result = std::panic::catch_unwind(AssertUnwindSafe(|| {
        commands::run(cli.command, &mut outputs)
    }));
    match result {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(err)) => {
            outputs.remove_created();
            emit_error(&format!("{err:#}"));
            ExitCode::from(2)
        }
        Err(payload) => {
            outputs.remove_created();
            emit_error(&format!("internal error: {}", panic_text(payload.as_ref())));
            ExitCode::from(3)
        }
    }
}

fn panic_text(payload: &(dyn std::any::Any + Send)) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        (*s).to_string()
    } else if let Some(s) = payload.downcast_ref::<String>() {
        s.clone()
    } else {
        "unknown panic".to_string()
    }
}

/// One line of JSON on stderr; the only failure output a run produces.
fn emit_error(message: &str) {
    let line = serde_json::json!({ "error": message });
    eprintln!("{line}");
}
