//! Command-line front end: spec loading, dispatch and report files.

pub mod commands;
pub mod config;
pub mod problem;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Parser;

pub use commands::{dispatch, CliError, Command, Flags, Format, Method, Outcome};
pub use config::{load_spec, parse_spec, ConfigError, ProblemSpec};

#[derive(Debug, Parser)]
#[command(name = "canon-hjb", version, about = "Canonical shifts and convexification certificates for first-order HJB equations")]
pub struct Args {
    #[arg(value_enum)]
    pub command: Command,
    pub spec: PathBuf,
    /// Shift used by verify-shift, conjugacy and the action identity check.
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    /// Directory for report.json and command-specific files.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "grid")]
    pub method: Method,
    /// Also write gnuplot-friendly .dat files.
    #[arg(long)]
    pub plot: bool,
    /// Corollary family: 1 adds α x·p, 2 subtracts α|x|²/2.
    #[arg(long, default_value_t = 2)]
    pub variant: u8,
    /// Pass/fail tolerance for verify-shift and conjugacy.
    #[arg(long)]
    pub tol: Option<f64>,
}

impl Args {
    pub fn flags(&self) -> Flags {
        Flags {
            alpha: self.alpha,
            format: self.format,
            out: self.out.clone(),
            method: self.method,
            plot: self.plot,
            variant: self.variant,
            tol: self.tol,
        }
    }
}

fn write_outputs(dir: &Path, outcome: &Outcome, seconds: f64) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let body = serde_json::to_string_pretty(&outcome.report).expect("report serialises") + "\n";
    std::fs::write(dir.join("report.json"), body)?;
    let timing = serde_json::json!({ "wallTimeSeconds": seconds });
    std::fs::write(dir.join("timing.json"), timing.to_string() + "\n")?;
    for (name, contents) in &outcome.files {
        std::fs::write(dir.join(name), contents)?;
    }
    Ok(())
}

/// Runs one command and returns the process exit code.
pub fn run(args: &Args) -> u8 {
    let start = Instant::now();
    let spec = match load_spec(&args.spec) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let flags = args.flags();
    let outcome = match dispatch(args.command, &spec, &flags) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let seconds = start.elapsed().as_secs_f64();
    match flags.format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&outcome.report).expect("report serialises")),
        Format::Csv => print!("{}", commands::to_csv(&outcome.report)),
    }
    if let Some(dir) = &flags.out {
        if let Err(e) = write_outputs(dir, &outcome, seconds) {
            eprintln!("error: cannot write to {}: {e}", dir.display());
            return 2;
        }
    }
    eprintln!("{} finished in {seconds:.3} s", args.command.name());
    outcome.exit_code
}

/// Caps rayon's pool at `CANON_HJB_THREADS` when set.
pub fn configure_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("CANON_HJB_THREADS") else { return Ok(()) };
    let n: usize = v.trim().parse().map_err(|_| format!("CANON_HJB_THREADS must be a positive integer, got {v:?}"))?;
    if n == 0 {
        return Err("CANON_HJB_THREADS must be positive".into());
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}
