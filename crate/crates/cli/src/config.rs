//! The sectioned problem file.
//!
//! ```ini
//! [problem]
//! dimension = 1
//! horizon = 2
//! xbox = -6, 6
//!
//! [hamiltonian]
//! expr = 0.5*p1^2 + x1*p1
//!
//! [terminal]
//! expr = cos(x1)
//! ```
//!
//! Boxes are `lo, hi` (same on every axis) or `lo1, hi1; lo2, hi2`.

use std::collections::BTreeMap;
use std::path::Path;

use canon_hjb::dsl::{parse_expression, Families};
use canon_hjb::sampling::BoxDomain;
use ini::Ini;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed spec file: {0}")]
    Syntax(String),
    #[error("[{section}] is missing")]
    MissingSection { section: &'static str },
    #[error("[{section}] {key} is missing")]
    MissingKey { section: &'static str, key: &'static str },
    #[error("[{section}] {key}: {message}")]
    Invalid { section: &'static str, key: &'static str, message: String },
    #[error("exactly one of [hamiltonian] and [lagrangian] must be present")]
    DynamicsChoice,
    #[error("[{section}] {message}")]
    Expression { section: &'static str, message: String },
    #[error("unknown section [{0}]")]
    UnknownSection(String),
    #[error("[{section}] unknown key {key}")]
    UnknownKey { section: String, key: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum Dynamics {
    Hamiltonian(String),
    Lagrangian(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CertificateParams {
    pub samples: usize,
    pub directions: usize,
    pub seed: u64,
    pub mu_min: f64,
    pub alpha_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct GridParams {
    pub bounds: Vec<(f64, f64)>,
    pub nodes: Vec<usize>,
    pub cfl: f64,
    pub max_speed: Option<f64>,
    /// Approximate number of time slices written out.
    pub slices: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct IntegratorParams {
    pub h: f64,
    pub tol: f64,
    pub starts: usize,
    pub seed: u64,
    pub x0: Vec<f64>,
    pub p0: Option<Vec<f64>>,
    /// Terminal points scanned for conjugate points.
    pub scan_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ActionParams {
    pub mesh: usize,
    pub starts: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ProblemSpec {
    pub dimension: usize,
    pub horizon: f64,
    pub dynamics: Dynamics,
    pub terminal: String,
    pub xbox: BoxDomain,
    pub pbox: BoxDomain,
    pub vbox: BoxDomain,
    pub certificate: CertificateParams,
    pub grid: GridParams,
    pub integrator: IntegratorParams,
    pub action: ActionParams,
    /// SHA-256 of the canonicalised file.
    pub hash: String,
}

const KNOWN: &[(&str, &[&str])] = &[
    ("problem", &["dimension", "horizon", "xbox"]),
    ("hamiltonian", &["expr"]),
    ("lagrangian", &["expr"]),
    ("terminal", &["expr"]),
    ("certificate", &["pbox", "vbox", "samples", "directions", "seed", "mu_min", "alpha_max"]),
    ("grid", &["bounds", "nodes", "cfl", "max_speed", "slices"]),
    ("integrator", &["h", "tol", "starts", "seed", "x0", "p0", "scan_samples"]),
    ("action", &["mesh", "starts", "seed"]),
];

type Sections = BTreeMap<String, BTreeMap<String, String>>;

struct Reader<'a> {
    sections: &'a Sections,
}

impl Reader<'_> {
    fn raw(&self, section: &'static str, key: &'static str) -> Option<&str> {
        self.sections.get(section).and_then(|s| s.get(key)).map(String::as_str)
    }

    fn required(&self, section: &'static str, key: &'static str) -> Result<&str, ConfigError> {
        if !self.sections.contains_key(section) {
            return Err(ConfigError::MissingSection { section });
        }
        self.raw(section, key).ok_or(ConfigError::MissingKey { section, key })
    }

    fn parsed<T: std::str::FromStr>(&self, section: &'static str, key: &'static str, default: T) -> Result<T, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(section, key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|e: T::Err| ConfigError::Invalid { section, key, message: e.to_string() }),
        }
    }

    fn list(&self, section: &'static str, key: &'static str) -> Result<Option<Vec<f64>>, ConfigError> {
        self.raw(section, key).map(|v| parse_list(v).map_err(|message| ConfigError::Invalid { section, key, message })).transpose()
    }

    fn boxed(&self, section: &'static str, key: &'static str, d: usize) -> Result<Option<Vec<(f64, f64)>>, ConfigError> {
        let Some(v) = self.raw(section, key) else { return Ok(None) };
        parse_box(v, d).map(Some).map_err(|message| ConfigError::Invalid { section, key, message })
    }
}

fn parse_list(v: &str) -> Result<Vec<f64>, String> {
    v.split(',').map(|s| s.trim().parse::<f64>().map_err(|e| format!("{s:?}: {e}"))).collect()
}

fn parse_box(v: &str, d: usize) -> Result<Vec<(f64, f64)>, String> {
    let parts: Vec<&str> = v.split(';').collect();
    let axes: Vec<(f64, f64)> = parts
        .iter()
        .map(|p| {
            let l = parse_list(p)?;
            match l[..] {
                [a, b] if a < b => Ok((a, b)),
                _ => Err(format!("expected `lo, hi` with lo < hi, got {p:?}")),
            }
        })
        .collect::<Result<_, _>>()?;
    match axes.len() {
        1 => Ok(vec![axes[0]; d]),
        n if n == d => Ok(axes),
        n => Err(format!("{n} intervals given for dimension {d}")),
    }
}

fn to_box(axes: &[(f64, f64)]) -> BoxDomain {
    BoxDomain::new(axes.iter().map(|a| a.0).collect(), axes.iter().map(|a| a.1).collect())
}

fn check_expression(src: &str, d: usize, families: Families, section: &'static str) -> Result<(), ConfigError> {
    parse_expression(src, d, families).map(|_| ()).map_err(|e| ConfigError::Expression { section, message: e.to_string() })
}

/// `section.key=value` lines in sorted order with whitespace trimmed.
fn canonical_text(sections: &Sections) -> String {
    let mut out = String::new();
    for (name, keys) in sections {
        for (k, v) in keys {
            out.push_str(&format!("{name}.{k}={v}\n"));
        }
    }
    out
}

pub fn load_spec(path: &Path) -> Result<ProblemSpec, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
    parse_spec(&text)
}

pub fn parse_spec(text: &str) -> Result<ProblemSpec, ConfigError> {
    let ini = Ini::load_from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
    let mut sections = Sections::new();
    for (name, props) in ini.iter() {
        let Some(name) = name else {
            if props.iter().next().is_some() {
                return Err(ConfigError::Syntax("keys outside any section".into()));
            }
            continue;
        };
        let name = name.trim().to_ascii_lowercase();
        let Some((_, keys)) = KNOWN.iter().find(|(s, _)| *s == name) else {
            return Err(ConfigError::UnknownSection(name));
        };
        let entry = sections.entry(name.clone()).or_default();
        for (k, v) in props.iter() {
            let k = k.trim().to_ascii_lowercase();
            if !keys.contains(&k.as_str()) {
                return Err(ConfigError::UnknownKey { section: name, key: k });
            }
            entry.insert(k, v.trim().to_string());
        }
    }
    let r = Reader { sections: &sections };

    let dimension: usize = r
        .required("problem", "dimension")?
        .parse()
        .map_err(|e: std::num::ParseIntError| ConfigError::Invalid { section: "problem", key: "dimension", message: e.to_string() })?;
    if !(1..=4).contains(&dimension) {
        return Err(ConfigError::Invalid { section: "problem", key: "dimension", message: format!("must be 1 to 4, got {dimension}") });
    }
    let d = dimension;
    let horizon: f64 = r
        .required("problem", "horizon")?
        .parse()
        .map_err(|e: std::num::ParseFloatError| ConfigError::Invalid { section: "problem", key: "horizon", message: e.to_string() })?;
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(ConfigError::Invalid { section: "problem", key: "horizon", message: format!("must be positive, got {horizon}") });
    }

    let dynamics = match (sections.contains_key("hamiltonian"), sections.contains_key("lagrangian")) {
        (true, false) => {
            let src = r.required("hamiltonian", "expr")?;
            check_expression(src, d, Families::HAMILTONIAN, "hamiltonian")?;
            Dynamics::Hamiltonian(src.to_string())
        }
        (false, true) => {
            let src = r.required("lagrangian", "expr")?;
            check_expression(src, d, Families::LAGRANGIAN, "lagrangian")?;
            Dynamics::Lagrangian(src.to_string())
        }
        _ => return Err(ConfigError::DynamicsChoice),
    };
    let terminal = r.required("terminal", "expr")?.to_string();
    check_expression(&terminal, d, Families::TERMINAL, "terminal")?;

    let xaxes = r.boxed("problem", "xbox", d)?.unwrap_or_else(|| vec![(-1.0, 1.0); d]);
    let paxes = r.boxed("certificate", "pbox", d)?.unwrap_or_else(|| xaxes.clone());
    let vaxes = r.boxed("certificate", "vbox", d)?.unwrap_or_else(|| paxes.clone());
    let certificate = CertificateParams {
        samples: r.parsed("certificate", "samples", 4096)?,
        directions: r.parsed("certificate", "directions", 8)?,
        seed: r.parsed("certificate", "seed", 0)?,
        mu_min: r.parsed("certificate", "mu_min", 1e-6)?,
        alpha_max: r.parsed("certificate", "alpha_max", 10.0)?,
    };

    let gbounds = r.boxed("grid", "bounds", d)?.unwrap_or_else(|| xaxes.clone());
    let nodes = match r.list("grid", "nodes")? {
        None => vec![201; d],
        Some(l) => {
            let bad = || ConfigError::Invalid { section: "grid", key: "nodes", message: format!("expected 1 or {d} integers ≥ 3") };
            if l.iter().any(|&n| n < 3.0 || n.fract() != 0.0) {
                return Err(bad());
            }
            match l.len() {
                1 => vec![l[0] as usize; d],
                n if n == d => l.iter().map(|&n| n as usize).collect(),
                _ => return Err(bad()),
            }
        }
    };
    let max_speed = match r.raw("grid", "max_speed") {
        None => None,
        Some(_) => Some(r.parsed("grid", "max_speed", 0.0)?),
    };
    let grid = GridParams { bounds: gbounds, nodes, cfl: r.parsed("grid", "cfl", 0.5)?, max_speed, slices: r.parsed("grid", "slices", if d == 1 { 200 } else { 20 })? };

    let vec_key = |key: &'static str| -> Result<Option<Vec<f64>>, ConfigError> {
        match r.list("integrator", key)? {
            Some(v) if v.len() != d => {
                Err(ConfigError::Invalid { section: "integrator", key, message: format!("expected {d} components") })
            }
            other => Ok(other),
        }
    };
    let integrator = IntegratorParams {
        h: r.parsed("integrator", "h", 1e-3)?,
        tol: r.parsed("integrator", "tol", 1e-10)?,
        starts: r.parsed("integrator", "starts", 16)?,
        seed: r.parsed("integrator", "seed", 0)?,
        x0: vec_key("x0")?.unwrap_or_else(|| to_box(&xaxes).center()),
        p0: vec_key("p0")?,
        scan_samples: r.parsed("integrator", "scan_samples", if d == 1 { 2001 } else { 4096 })?,
    };
    if !(integrator.h > 0.0) {
        return Err(ConfigError::Invalid { section: "integrator", key: "h", message: "must be positive".into() });
    }
    let action = ActionParams {
        mesh: r.parsed("action", "mesh", 33)?,
        starts: r.parsed("action", "starts", 12)?,
        seed: r.parsed("action", "seed", 0)?,
    };

    let hash = Sha256::digest(canonical_text(&sections).as_bytes()).iter().map(|b| format!("{b:02x}")).collect();
    Ok(ProblemSpec {
        dimension,
        horizon,
        dynamics,
        terminal,
        xbox: to_box(&xaxes),
        pbox: to_box(&paxes),
        vbox: to_box(&vaxes),
        certificate,
        grid,
        integrator,
        action,
        hash,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[problem]\ndimension = 1\nhorizon = 1\n\n[hamiltonian]\nexpr = 0.5*p1^2\n\n[terminal]\nexpr = 0\n";

    #[test]
    fn minimal_spec_gets_defaults() {
        let s = parse_spec(MINIMAL).unwrap();
        assert_eq!(s.dimension, 1);
        assert_eq!(s.dynamics, Dynamics::Hamiltonian("0.5*p1^2".into()));
        assert_eq!(s.certificate.samples, 4096);
        assert_eq!(s.grid.nodes, vec![201]);
        assert_eq!(s.integrator.x0, vec![0.0]);
    }

    #[test]
    fn both_dynamics_are_rejected() {
        let text = format!("{MINIMAL}\n[lagrangian]\nexpr = 0.5*v1^2\n");
        assert!(matches!(parse_spec(&text), Err(ConfigError::DynamicsChoice)));
        let text = "[problem]\ndimension = 1\nhorizon = 1\n[terminal]\nexpr = 0\n";
        assert!(matches!(parse_spec(text), Err(ConfigError::DynamicsChoice)));
    }

    #[test]
    fn momentum_in_terminal_names_the_section() {
        let text = MINIMAL.replace("expr = 0\n", "expr = p1\n");
        let err = parse_spec(&text).unwrap_err();
        assert!(matches!(err, ConfigError::Expression { section: "terminal", .. }));
        assert!(err.to_string().starts_with("[terminal]"));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let text = MINIMAL.replace("0.5*p1^2", "0.5*p2^2");
        assert!(matches!(parse_spec(&text), Err(ConfigError::Expression { section: "hamiltonian", .. })));
    }

    #[test]
    fn hash_ignores_layout() {
        let a = parse_spec(MINIMAL).unwrap();
        let shuffled = "[terminal]\nexpr=0\n[hamiltonian]\n  expr =   0.5*p1^2\n[problem]\nhorizon=1\ndimension=1\n";
        assert_eq!(a.hash, parse_spec(shuffled).unwrap().hash);
        let other = parse_spec(&MINIMAL.replace("horizon = 1", "horizon = 2")).unwrap();
        assert_ne!(a.hash, other.hash);
    }

    #[test]
    fn boxes_per_axis() {
        assert_eq!(parse_box("-1, 2", 2).unwrap(), vec![(-1.0, 2.0); 2]);
        assert_eq!(parse_box("-1,2; 0,3", 2).unwrap(), vec![(-1.0, 2.0), (0.0, 3.0)]);
        assert!(parse_box("2, 1", 1).is_err());
        assert!(parse_box("0,1;0,1;0,1", 2).is_err());
    }
}
