use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use nonarch::cli::{execute, Cli};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let outcome = execute(&cli);
    if let Some(m) = &outcome.message {
        eprintln!("{m}");
    }
    if let Some(text) = &outcome.report {
        let written = match &cli.common.out {
            Some(path) => std::fs::write(path, text),
            None => std::io::stdout().write_all(text.as_bytes()),
        };
        if let Err(e) = written {
            eprintln!("cannot write report: {e}");
            return ExitCode::from(3);
        }
    }
    ExitCode::from(outcome.exit_code as u8)
}
