mod args;
mod commands;
mod output;

use std::process::ExitCode;

use anyhow::Result;
use clap::error::ErrorKind;
use clap::Parser;
use serde_json::json;

use args::{Cli, Command, Format};
use output::emit;

const EXIT_PRECONDITION: u8 = 2;
const EXIT_INVARIANT: u8 = 3;

/// Error tag and exit code for a failed run.
fn classify(err: &anyhow::Error) -> (&'static str, u8) {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<pavlab::Error>() {
            let code = match e {
                pavlab::Error::Precondition(_) | pavlab::Error::DimensionMismatch { .. } | pavlab::Error::Format(_) => {
                    EXIT_PRECONDITION
                }
                pavlab::Error::Invariant(_) => EXIT_INVARIANT,
                _ => 1,
            };
            return (e.kind(), code);
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return ("io", 1);
        }
    }
    ("error", 1)
}

fn report_error(kind: &str, message: &str) {
    eprintln!("{}", json!({"error": kind, "message": message}));
}

fn run(cli: &Cli) -> Result<Vec<String>> {
    if let Some(n) = cli.global.threads {
        if n == 0 {
            return Err(pavlab::Error::Precondition("thread count must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let watch = pavlab::report::Stopwatch::start();
    let mut result = match &cli.command {
        Command::Pave(a) => commands::pave(a),
        Command::PaveExact(a) => commands::pave_exact(a),
        Command::Curve(a) => commands::curve(a),
        Command::Indep(a) => commands::indep(a),
        Command::Free(a) => commands::free(a),
        Command::Reduce(a) => commands::reduce(a),
        Command::Dixmier(a) => commands::dixmier(a),
        Command::Calibrate(a) => commands::calibrate(a),
    }?;
    let format = cli.global.format.unwrap_or(match cli.command {
        Command::Curve(_) => Format::Csv,
        _ => Format::Json,
    });
    let manifest = json!({
        "tool": "pavlab",
        "version": env!("CARGO_PKG_VERSION"),
        "core_version": pavlab::VERSION,
        "command": cli.command.name(),
        "format": format,
        "config": cli,
        "seeds": result.seeds,
        "violations": result.violations,
        "elapsed_ms": watch.elapsed_ms(),
    });
    emit(&mut result, format, cli.global.out.as_ref(), manifest, cli.global.no_timing)?;
    Ok(result.violations)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = e.print();
                    ExitCode::SUCCESS
                }
                _ => {
                    report_error("usage", e.to_string().trim_end());
                    ExitCode::from(EXIT_PRECONDITION)
                }
            };
        }
    };
    match run(&cli) {
        Ok(violations) if violations.is_empty() => ExitCode::SUCCESS,
        Ok(violations) => {
            report_error("invariant", &violations.join("; "));
            ExitCode::from(EXIT_INVARIANT)
        }
        Err(e) => {
            let (kind, code) = classify(&e);
            report_error(kind, &format!("{e:#}"));
            ExitCode::from(code)
        }
    }
}
