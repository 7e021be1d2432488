use std::path::PathBuf;

use canon_hjb::certificate::{
    alpha_interval, build_samples, check_wellposedness, corollary_threshold, joint_convexity_min_eig,
    terminal_min_eig, CertificateError, CorollaryVariant, SampleSet, Verdict, DISCLAIMER,
};
use canon_hjb::characteristics::{first_conjugate_time, solve_terminal_bvp, verify_conjugacy, FlowError, ShootingOptions};
use canon_hjb::model::{Hamiltonian, ModelError};
use canon_hjb::value::{
    minimize_action, profile_to_csv, profile_to_gnuplot, semiconcavity_profile, solve_grid, verify_value_shift,
    ActionOptions, GridSetup, ValueError,
};
use serde_json::{json, Value};
use thiserror::Error;

use crate::config::{Dynamics, ProblemSpec};
use crate::problem::Problem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Certify,
    AlphaInterval,
    Solve,
    VerifyShift,
    SingularityScan,
    Conjugacy,
    CorollaryThreshold,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Certify => "certify",
            Command::AlphaInterval => "alpha-interval",
            Command::Solve => "solve",
            Command::VerifyShift => "verify-shift",
            Command::SingularityScan => "singularity-scan",
            Command::Conjugacy => "conjugacy",
            Command::CorollaryThreshold => "corollary-threshold",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Method {
    Grid,
    Characteristics,
    Action,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Flags {
    pub alpha: Option<f64>,
    pub format: Format,
    pub out: Option<PathBuf>,
    pub method: Method,
    pub plot: bool,
    /// 1: `H + α x·p`, 2: `H − α|x|²/2`.
    pub variant: u8,
    pub tol: Option<f64>,
}

impl Default for Flags {
    fn default() -> Self {
        Flags { alpha: None, format: Format::Json, out: None, method: Method::Grid, plot: false, variant: 2, tol: None }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("input error: {0}")]
    Input(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<CertificateError> for CliError {
    fn from(e: CertificateError) -> Self {
        match e {
            CertificateError::Input(_) => CliError::Input(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<ValueError> for CliError {
    fn from(e: ValueError) -> Self {
        match e {
            ValueError::Input(_) => CliError::Input(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<FlowError> for CliError {
    fn from(e: FlowError) -> Self {
        match e {
            FlowError::Input(_) => CliError::Input(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Parse(_) | ModelError::WrongFamilies(_) | ModelError::Dimension { .. } => {
                CliError::Input(e.to_string())
            }
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

/// Everything a command produced. `report` is deterministic; timing lives
/// outside it.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub report: Value,
    /// Extra files for `--out`, as (name, contents).
    pub files: Vec<(String, String)>,
    pub exit_code: u8,
}

fn report(command: Command, spec: &ProblemSpec, outputs: Value) -> Value {
    json!({
        "command": command.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "specHash": spec.hash,
        "outputs": outputs,
        "disclaimer": DISCLAIMER,
    })
}

fn samples(spec: &ProblemSpec) -> Result<SampleSet, CliError> {
    let c = &spec.certificate;
    Ok(build_samples(&spec.xbox, &spec.pbox, c.samples, c.directions, c.seed)?)
}

fn grid_setup(spec: &ProblemSpec) -> Result<GridSetup, CliError> {
    if spec.dimension > 2 {
        return Err(CliError::Input(format!("grid commands need dimension 1 or 2, got {}", spec.dimension)));
    }
    Ok(GridSetup {
        bounds: spec.grid.bounds.clone(),
        nodes: spec.grid.nodes.clone(),
        horizon: spec.horizon,
        cfl: spec.grid.cfl,
        max_speed: spec.grid.max_speed,
    })
}

/// `--alpha` if given, else the certified shift.
fn resolve_alpha(flags: &Flags, spec: &ProblemSpec, problem: &Problem) -> Result<f64, CliError> {
    if let Some(a) = flags.alpha {
        return Ok(a);
    }
    let r = check_wellposedness(&problem.hamiltonian, &problem.terminal, &samples(spec)?, spec.certificate.mu_min)?;
    r.chosen_alpha.ok_or_else(|| {
        CliError::Input(format!("no --alpha given and the problem is {}; pass --alpha explicitly", r.verdict.as_str()))
    })
}

pub fn dispatch(command: Command, spec: &ProblemSpec, flags: &Flags) -> Result<Outcome, CliError> {
    let problem = Problem::build(spec)?;
    let (outputs, files, exit_code) = match command {
        Command::Certify => certify(spec, &problem)?,
        Command::AlphaInterval => interval(spec, &problem)?,
        Command::Solve => solve(spec, &problem, flags)?,
        Command::VerifyShift => shift(spec, &problem, flags)?,
        Command::SingularityScan => singularity(spec, &problem)?,
        Command::Conjugacy => conjugacy(spec, &problem, flags)?,
        Command::CorollaryThreshold => corollary(spec, &problem, flags)?,
    };
    Ok(Outcome { report: report(command, spec, outputs), files, exit_code })
}

type Produced = (Value, Vec<(String, String)>, u8);

fn certify(spec: &ProblemSpec, problem: &Problem) -> Result<Produced, CliError> {
    let s = samples(spec)?;
    let r = check_wellposedness(&problem.hamiltonian, &problem.terminal, &s, spec.certificate.mu_min)?;
    let admissible = r.admissible_interval();
    let mut out = json!({
        "verdict": r.verdict.as_str(),
        "chosenAlpha": r.chosen_alpha,
        "alphaLower": admissible.map(|a| a.0),
        "alphaUpper": admissible.map(|a| a.1),
        "lemmaLower": r.interval.as_ref().map(|iv| iv.lower),
        "lemmaUpper": r.interval.as_ref().map(|iv| iv.upper),
        "interval": r.interval,
        "spectral": r.spectral,
        "theorem": r.theorem,
        "conditions": r.conditions,
        "samples": s.len(),
        "directions": spec.certificate.directions,
        "seed": spec.certificate.seed,
    });
    if let Dynamics::Lagrangian(_) = spec.dynamics {
        let vs = build_samples(&spec.xbox, &spec.vbox, spec.certificate.samples, 1, spec.certificate.seed)?;
        out["jointConvexityMinEig"] = json!(joint_convexity_min_eig(&problem.lagrangian, &vs)?);
    }
    let code = if r.verdict == Verdict::Certified { 0 } else { 1 };
    Ok((out, vec![], code))
}

fn interval(spec: &ProblemSpec, problem: &Problem) -> Result<Produced, CliError> {
    let s = samples(spec)?;
    let iv = alpha_interval(&problem.hamiltonian, &s, spec.certificate.mu_min)?;
    let lambda_g = terminal_min_eig(&problem.terminal, &s)?;
    let lower = iv.lower.max(-lambda_g);
    let out = json!({
        "lemmaLower": iv.lower,
        "lemmaUpper": iv.upper,
        "feasible": iv.feasible,
        "lambdaG": lambda_g,
        "alphaLower": lower,
        "alphaUpper": iv.upper,
        "admissible": lower <= iv.upper,
        "lowerWitness": iv.lower_witness,
        "upperWitness": iv.upper_witness,
    });
    Ok((out, vec![], if iv.feasible { 0 } else { 1 }))
}

fn solve(spec: &ProblemSpec, problem: &Problem, flags: &Flags) -> Result<Produced, CliError> {
    let (h, g) = (&problem.hamiltonian, &problem.terminal);
    let x0 = &spec.integrator.x0;
    match flags.method {
        Method::Grid => {
            let mut grid = grid_setup(spec)?.build(h, g)?;
            grid = grid.clone().recording_every(grid.steps.div_ceil(spec.grid.slices.max(1)));
            let field = solve_grid(h, g, &grid)?;
            let profile = semiconcavity_profile(&field);
            let value = field.interpolate(field.slices.len() - 1, x0);
            let min_d2 = profile.iter().map(|r| r.min_d2).fold(f64::INFINITY, f64::min);
            let max_d2 = profile.iter().map(|r| r.max_d2).fold(f64::NEG_INFINITY, f64::max);
            let out = json!({
                "method": "grid",
                "scheme": field.scheme,
                "grid": field.grid,
                "query": x0,
                "value": value,
                "minD2": min_d2,
                "maxD2": max_d2,
                "fieldSha256": field.data_hash(),
            });
            let mut files = vec![
                ("field.csv".to_string(), field.to_csv()),
                ("field.json".to_string(), serde_json::to_string_pretty(&field.sidecar()).unwrap() + "\n"),
                ("profile.csv".to_string(), profile_to_csv(&profile)),
            ];
            if flags.plot {
                files.push(("field.dat".into(), field.to_gnuplot()));
                files.push(("profile.dat".into(), profile_to_gnuplot(&profile)));
            }
            Ok((out, files, 0))
        }
        Method::Characteristics => {
            let it = &spec.integrator;
            let opts = ShootingOptions { step: it.h, tol: it.tol, starts: it.starts, seed: it.seed, ..ShootingOptions::default() };
            let r = solve_terminal_bvp(h, g, 0.0, x0, spec.horizon, &opts)?;
            let solutions: Vec<Value> = r
                .solutions
                .iter()
                .map(|s| {
                    json!({
                        "momentum": s.momentum,
                        "terminalState": s.trajectory.last_state(),
                        "value": s.value,
                        "residual": s.residual,
                        "singular": s.singular,
                    })
                })
                .collect();
            let out = json!({
                "method": "characteristics",
                "query": x0,
                "converged": r.converged,
                "value": r.best.value,
                "momentum": r.best.momentum,
                "terminalState": r.best.trajectory.last_state(),
                "residual": r.best.residual,
                "solutions": solutions,
            });
            let mut files = vec![("trajectory.csv".to_string(), r.best.trajectory.to_csv())];
            if flags.plot {
                files.push(("trajectory.dat".into(), r.best.trajectory.to_csv().replace(',', " ").replacen("s ", "# s ", 1)));
            }
            Ok((out, files, if r.converged { 0 } else { 3 }))
        }
        Method::Action => {
            let a = &spec.action;
            let opts = ActionOptions {
                mesh: a.mesh,
                starts: a.starts,
                seed: a.seed,
                alpha: flags.alpha.unwrap_or(1.0),
                ..ActionOptions::default()
            };
            let r = minimize_action(&problem.lagrangian, g, 0.0, x0, spec.horizon, &opts)?;
            let mut csv = String::from("curve,t");
            for i in 0..spec.dimension {
                csv.push_str(&format!(",x{}", i + 1));
            }
            csv.push('\n');
            for (c, curve) in r.curves.iter().enumerate() {
                for (t, p) in curve.times.iter().zip(&curve.points) {
                    let xs: Vec<String> = p.iter().map(|v| v.to_string()).collect();
                    csv.push_str(&format!("{c},{t},{}\n", xs.join(",")));
                }
            }
            let out = json!({
                "method": "action",
                "query": x0,
                "value": r.value,
                "multiple": r.multiple,
                "ambiguous": r.ambiguous,
                "endpoints": r.curves.iter().map(|c| c.endpoint().to_vec()).collect::<Vec<_>>(),
                "shiftAlpha": opts.alpha,
                "identityResidual": r.identity_residual,
            });
            let mut files = vec![("curves.csv".to_string(), csv.clone())];
            if flags.plot {
                files.push(("curves.dat".into(), csv.replace(',', " ").replacen("curve ", "# curve ", 1)));
            }
            Ok((out, files, 0))
        }
    }
}

fn shift(spec: &ProblemSpec, problem: &Problem, flags: &Flags) -> Result<Produced, CliError> {
    let alpha = resolve_alpha(flags, spec, problem)?;
    let tol = flags.tol.unwrap_or(5e-2);
    let r = verify_value_shift(&problem.hamiltonian, &problem.terminal, alpha, &grid_setup(spec)?)?;
    let out = json!({
        "alpha": alpha,
        "deviation": r.deviation,
        "tolerance": tol,
        "withinTolerance": r.deviation <= tol,
        "worstPoint": r.worst_point,
        "worstTime": r.worst_time,
        "maxSpeed": r.max_speed,
        "dt": r.dt,
        "nodes": spec.grid.nodes,
    });
    Ok((out, vec![], if r.deviation <= tol { 0 } else { 1 }))
}

fn singularity(spec: &ProblemSpec, problem: &Problem) -> Result<Produced, CliError> {
    let it = &spec.integrator;
    let r = first_conjugate_time(&problem.hamiltonian, &problem.terminal, spec.horizon, &spec.xbox, it.h.max(1e-3), it.scan_samples)?;
    let out = match r {
        Some(c) => json!({ "found": true, "tau": c.tau, "time": c.time, "y": c.y, "horizon": spec.horizon }),
        None => json!({ "found": false, "tau": null, "time": null, "y": null, "horizon": spec.horizon }),
    };
    Ok((out, vec![], 0))
}

fn conjugacy(spec: &ProblemSpec, problem: &Problem, flags: &Flags) -> Result<Produced, CliError> {
    let alpha = resolve_alpha(flags, spec, problem)?;
    let it = &spec.integrator;
    let x0 = &it.x0;
    let p0 = match &it.p0 {
        Some(p) => p.clone(),
        None => problem.terminal.gradient(x0)?,
    };
    let h = &problem.hamiltonian;
    let tol = flags.tol.unwrap_or(1e-6);
    let dev = verify_conjugacy(h, alpha, x0, &p0, 0.0, spec.horizon, it.h)?;
    let halved = verify_conjugacy(h, alpha, x0, &p0, 0.0, spec.horizon, 0.5 * it.h)?;
    let energy = h.value(x0, &p0)?;
    let out = json!({
        "alpha": alpha,
        "x0": x0,
        "p0": p0,
        "energy": energy,
        "step": it.h,
        "deviation": dev,
        "halvedDeviation": halved,
        "ratio": if halved > 0.0 { Some(dev / halved) } else { None },
        "tolerance": tol,
        "withinTolerance": dev <= tol,
    });
    Ok((out, vec![], if dev <= tol { 0 } else { 1 }))
}

fn corollary(spec: &ProblemSpec, problem: &Problem, flags: &Flags) -> Result<Produced, CliError> {
    let variant = match flags.variant {
        1 => CorollaryVariant::CrossTerm,
        2 => CorollaryVariant::ConcaveWell,
        v => return Err(CliError::Input(format!("--variant must be 1 or 2, got {v}"))),
    };
    let s = samples(spec)?;
    let c = &spec.certificate;
    match corollary_threshold(&problem.hamiltonian, &problem.terminal, variant, &s, c.mu_min, c.alpha_max) {
        Ok(r) => {
            let out = json!({
                "variant": flags.variant,
                "family": r.variant,
                "alphaStar": r.alpha,
                "tolerance": r.tolerance,
                "evaluations": r.evaluations,
                "alphaMax": c.alpha_max,
            });
            Ok((out, vec![], 0))
        }
        Err(CertificateError::NoCertifiedAlpha { alpha_max }) => {
            let out = json!({ "variant": flags.variant, "alphaStar": null, "alphaMax": alpha_max });
            Ok((out, vec![], 1))
        }
        Err(e) => Err(e.into()),
    }
}

/// Flattens a JSON value into `key,value` rows with dotted keys.
pub fn to_csv(v: &Value) -> String {
    fn walk(prefix: &str, v: &Value, out: &mut String) {
        match v {
            Value::Object(m) => {
                for (k, x) in m {
                    let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                    walk(&key, x, out);
                }
            }
            Value::Array(a) => {
                for (i, x) in a.iter().enumerate() {
                    walk(&format!("{prefix}.{i}"), x, out);
                }
            }
            Value::String(s) => out.push_str(&format!("{prefix},\"{}\"\n", s.replace('"', "\"\""))),
            other => out.push_str(&format!("{prefix},{other}\n")),
        }
    }
    let mut out = String::from("key,value\n");
    walk("", v, &mut out);
    out
}
