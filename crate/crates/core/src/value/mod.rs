//! The value function three ways: a monotone grid scheme, the Hopf–Lax
//! formula for `H = ½|p|²`, and direct minimisation of the action.

mod action;
mod grid;
mod oracle;

use std::fmt::Write as _;

use serde_json::json;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::ModelError;

pub use action::{minimize_action, ActionOptions, ActionResult, Curve};
pub use grid::{
    default_max_speed, semiconcavity_profile, solve_grid, verify_value_shift, Grid, GridSetup, GridStepper,
    ProfileRow, ShiftDeviation, ValueField,
};
pub use oracle::{hopf_lax_field, hopf_lax_oracle, OracleResult, TIE_TOL};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValueError {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("evaluation failed at {point:?}: {source}")]
    Model { point: Vec<f64>, source: ModelError },
    #[error("CFL condition violated at x = {point:?}, t = {time}: local speed {speed} exceeds what the bound {limit} allows")]
    Cfl { point: Vec<f64>, time: f64, speed: f64, limit: f64 },
    #[error("non-finite value at x = {point:?}, t = {time}")]
    NonFinite { point: Vec<f64>, time: f64 },
    #[error("action minimisation did not converge (best gradient norm {residual:e})")]
    NoConvergence { residual: f64 },
    #[error("shifted action differs from the identity by {residual:e}")]
    Identity { residual: f64 },
}

impl ValueError {
    pub(crate) fn model(point: &[f64], source: ModelError) -> ValueError {
        ValueError::Model { point: point.to_vec(), source }
    }
}

fn hex_digest(bytes: impl IntoIterator<Item = f64>) -> String {
    let mut h = Sha256::new();
    for b in bytes {
        h.update(b.to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

impl ValueField {
    /// SHA-256 of the little-endian bytes of all recorded values.
    pub fn data_hash(&self) -> String {
        hex_digest(self.slices.iter().flatten().copied())
    }

    fn coord_header(&self) -> &'static str {
        if self.grid.dim() == 1 { "x" } else { "x,y" }
    }

    /// Rows `t, x[, y], u` for every recorded slice.
    pub fn to_csv(&self) -> String {
        let mut out = format!("t,{},u\n", self.coord_header());
        for (t, u) in self.times.iter().zip(&self.slices) {
            for (k, v) in u.iter().enumerate() {
                let x = self.grid.point(k);
                let xs: Vec<String> = x.iter().map(|c| c.to_string()).collect();
                let _ = writeln!(out, "{t},{},{v}", xs.join(","));
            }
        }
        out
    }

    /// Whitespace-separated blocks, one per time slice, separated by blank
    /// lines (2D slices break rows with a single blank line as `splot` expects).
    pub fn to_gnuplot(&self) -> String {
        let mut out = format!("# t {} u\n", self.coord_header().replace(',', " "));
        let nx = self.grid.nodes[0];
        for (t, u) in self.times.iter().zip(&self.slices) {
            for (k, v) in u.iter().enumerate() {
                if self.grid.dim() == 2 && k > 0 && k % nx == 0 {
                    out.push('\n');
                }
                let xs: Vec<String> = self.grid.point(k).iter().map(|c| c.to_string()).collect();
                let _ = writeln!(out, "{t} {} {v}", xs.join(" "));
            }
            out.push_str("\n\n");
        }
        out
    }

    pub fn sidecar(&self) -> serde_json::Value {
        json!({
            "scheme": self.scheme,
            "grid": self.grid,
            "slices": self.slices.len(),
            "times": self.times,
            "sha256": self.data_hash(),
        })
    }
}

pub fn profile_to_csv(rows: &[ProfileRow]) -> String {
    let axes = rows.iter().map(|r| r.axis).max().map_or(1, |a| a + 1);
    let mut out = if axes == 1 { "t,minD2,maxD2\n".to_string() } else { "t,axis,minD2,maxD2\n".to_string() };
    for r in rows {
        if axes == 1 {
            let _ = writeln!(out, "{},{},{}", r.t, r.min_d2, r.max_d2);
        } else {
            let _ = writeln!(out, "{},{},{},{}", r.t, r.axis, r.min_d2, r.max_d2);
        }
    }
    out
}

pub fn profile_to_gnuplot(rows: &[ProfileRow]) -> String {
    let mut out = String::from("# t axis minD2 maxD2\n");
    for r in rows {
        let _ = writeln!(out, "{} {} {} {}", r.t, r.axis, r.min_d2, r.max_d2);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{HamiltonianModel, LagrangianModel, TerminalCost};
    use crate::sampling::BoxDomain;

    fn h(src: &str) -> HamiltonianModel {
        HamiltonianModel::parse(src, 1).unwrap()
    }

    fn g(src: &str) -> TerminalCost {
        TerminalCost::parse(src, 1).unwrap()
    }

    #[test]
    fn zero_data_stays_zero() {
        let setup = GridSetup { max_speed: Some(1.0), ..GridSetup::uniform(-2.0, 2.0, 41, 1.0, 0.5) };
        let (hh, gg) = (h("0.5*p1^2"), g("0"));
        let field = solve_grid(&hh, &gg, &setup.build(&hh, &gg).unwrap()).unwrap();
        assert!(field.slices.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn quadratic_data_matches_hopf_lax() {
        let (hh, gg) = (h("0.5*p1^2"), g("0.5*x1^2"));
        let grid = GridSetup::uniform(-8.0, 8.0, 801, 1.0, 0.5).build(&hh, &gg).unwrap();
        let field = solve_grid(&hh, &gg, &grid).unwrap();
        assert_eq!(field.terminal()[450], 0.5);
        let u = field.interpolate(field.slices.len() - 1, &[1.0]).unwrap();
        assert!((u - 0.25).abs() <= 2e-2, "u(0, 1) = {u}");
    }

    #[test]
    fn cfl_violation_is_reported() {
        let (hh, gg) = (h("0.5*p1^2"), g("2*x1^2"));
        let grid = GridSetup { max_speed: Some(0.1), ..GridSetup::uniform(-2.0, 2.0, 41, 1.0, 1.0) }
            .build(&hh, &gg)
            .unwrap();
        assert!(matches!(solve_grid(&hh, &gg, &grid), Err(ValueError::Cfl { .. })));
    }

    #[test]
    fn oracle_quadratic() {
        let r = hopf_lax_oracle(&g("0.5*x1^2"), 0.0, &[1.0], 1.0, &BoxDomain::cube(1, 5.0), 2001).unwrap();
        assert!((r.value - 0.25).abs() < 1e-12);
        assert_eq!(r.argmins.len(), 1);
        assert!((r.argmins[0][0] - 0.5).abs() < 1e-6);
        assert!(!r.on_boundary);

        let r = hopf_lax_oracle(&g("0"), 0.0, &[0.3], 1.0, &BoxDomain::cube(1, 5.0), 2001).unwrap();
        assert!(r.value.abs() < 1e-12 && (r.argmins[0][0] - 0.3).abs() < 1e-6);
    }

    #[test]
    fn oracle_sees_the_shock_of_the_cosine() {
        let r = hopf_lax_oracle(&g("cos(x1)"), 0.0, &[0.0], 1.5, &BoxDomain::cube(1, 6.0), 4001).unwrap();
        assert_eq!(r.argmins.len(), 2, "{r:?}");
        let (a, b) = (r.argmins[0][0], r.argmins[1][0]);
        assert!((a + b).abs() < 1e-6);
        assert!((a.abs() - 1.5 * a.abs().sin()).abs() < 1e-6);
    }

    #[test]
    fn oracle_flags_a_small_box() {
        let r = hopf_lax_oracle(&g("0.5*x1^2"), 0.0, &[5.0], 1.0, &BoxDomain::cube(1, 1.0), 201).unwrap();
        assert!(r.on_boundary);
    }

    #[test]
    fn action_on_quadratic_data() {
        let l = LagrangianModel::parse("0.5*v1^2", 1).unwrap();
        let r = minimize_action(&l, &g("0.5*x1^2"), 0.0, &[1.0], 1.0, &ActionOptions::default()).unwrap();
        assert!((r.value - 0.25).abs() < 1e-3, "{}", r.value);
        assert!(!r.multiple);
        let c = &r.curves[0];
        assert_eq!(c.points[0], vec![1.0]);
        for (t, p) in c.times.iter().zip(&c.points) {
            assert!((p[0] - (1.0 - 0.5 * t)).abs() < 1e-4);
        }
        assert!(r.identity_residual <= 1e-10);
    }

    #[test]
    fn action_detects_two_minimisers() {
        let l = LagrangianModel::parse("0.5*v1^2", 1).unwrap();
        let r = minimize_action(&l, &g("cos(x1)"), 0.0, &[0.0], 1.5, &ActionOptions::default()).unwrap();
        assert!(r.multiple, "{r:?}");
        assert_eq!(r.curves.len(), 2);
    }

    #[test]
    fn semiconcavity_of_a_parabola() {
        let grid = GridSetup { max_speed: Some(1.0), ..GridSetup::uniform(-1.0, 1.0, 21, 1.0, 0.5) }
            .with_speed(1.0)
            .unwrap();
        let u: Vec<f64> = (0..grid.len()).map(|k| 0.5 * grid.point(k)[0].powi(2)).collect();
        let field = ValueField { grid, scheme: "test".into(), times: vec![1.0], slices: vec![u] };
        let p = semiconcavity_profile(&field);
        assert!((p[0].min_d2 - 1.0).abs() < 1e-10 && (p[0].max_d2 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn zero_shift_is_exact() {
        let r = verify_value_shift(&h("0.5*p1^2 + x1*p1"), &g("cos(x1)"), 0.0, &GridSetup::uniform(-3.0, 3.0, 61, 0.5, 0.5))
            .unwrap();
        assert_eq!(r.deviation, 0.0);
    }

    #[test]
    fn exports_have_headers() {
        let (hh, gg) = (h("0.5*p1^2"), g("cos(x1)"));
        let grid = GridSetup::uniform(-1.0, 1.0, 5, 0.1, 0.5).build(&hh, &gg).unwrap();
        let field = solve_grid(&hh, &gg, &grid).unwrap();
        assert!(field.to_csv().starts_with("t,x,u\n"));
        assert_eq!(field.sidecar()["sha256"].as_str().unwrap().len(), 64);
        assert!(profile_to_csv(&semiconcavity_profile(&field)).starts_with("t,minD2,maxD2\n"));
    }
}
