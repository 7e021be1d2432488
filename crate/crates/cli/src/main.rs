use std::process::ExitCode;

use canon_hjb_cli::{configure_threads, run, Args};
use clap::Parser;

fn main() -> ExitCode {
    let args = Args::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    ExitCode::from(run(&args))
}
