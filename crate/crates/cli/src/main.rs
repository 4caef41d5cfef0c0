use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use cmj_cli::{io::write_output, run, Cli};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let outcome = match run(&cli) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    let written = match &outcome.out {
        Some(path) => {
            let argv: Vec<String> = std::env::args().collect();
            write_output(path, outcome.payload.as_bytes(), &argv)
        }
        None => std::io::stdout().lock().write_all(outcome.payload.as_bytes()),
    };
    if let Err(e) = written {
        eprintln!("error: writing output: {e}");
        return ExitCode::from(1);
    }
    ExitCode::from(if outcome.failed { 2 } else { 0 })
}
