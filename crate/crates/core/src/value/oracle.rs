//! Hopf–Lax formula for `H = ½|p|²`:
//! `u(t, x) = min_y |x − y|² / (2(T − t)) + G(y)`.

use rayon::prelude::*;
use serde::Serialize;

use super::grid::{Grid, ValueField};
use super::ValueError;
use crate::model::TerminalCost;
use crate::sampling::BoxDomain;

/// Minimisers closer in value than this are reported together.
pub const TIE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct OracleResult {
    pub value: f64,
    pub argmins: Vec<Vec<f64>>,
    /// The minimum sits on the edge of the search box; enlarge it.
    pub on_boundary: bool,
}

struct Objective<'a> {
    g: &'a TerminalCost,
    x: &'a [f64],
    tau: f64,
}

impl Objective<'_> {
    fn eval(&self, y: &[f64]) -> Result<f64, ValueError> {
        let dist: f64 = self.x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        let gy = self.g.value(y).map_err(|e| ValueError::model(y, e))?;
        Ok(dist / (2.0 * self.tau) + gy)
    }
}

/// Ternary search for a minimum of `f` on `[a, b]`.
fn ternary<F: FnMut(f64) -> Result<f64, ValueError>>(
    mut a: f64,
    mut b: f64,
    mut f: F,
) -> Result<f64, ValueError> {
    for _ in 0..200 {
        if b - a <= 1e-13 * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        let m1 = a + (b - a) / 3.0;
        let m2 = b - (b - a) / 3.0;
        if f(m1)? <= f(m2)? {
            b = m2;
        } else {
            a = m1;
        }
    }
    Ok(0.5 * (a + b))
}

fn scan_axis(b: &BoxDomain, axis: usize, n: usize, i: usize) -> f64 {
    if i + 1 == n {
        b.hi[axis]
    } else {
        b.lo[axis] + (b.hi[axis] - b.lo[axis]) * i as f64 / (n - 1) as f64
    }
}

/// Dense scan with `scan_n` points per axis of `y_box`, then ternary
/// refinement (coordinate-wise in 2D) inside the cell around every
/// discrete local minimum.
pub fn hopf_lax_oracle(
    g: &TerminalCost,
    t: f64,
    x: &[f64],
    horizon: f64,
    y_box: &BoxDomain,
    scan_n: usize,
) -> Result<OracleResult, ValueError> {
    let d = x.len();
    if d == 0 || d > 2 || g.dim() != d || y_box.dim() != d {
        return Err(ValueError::Input(format!("oracle supports matching dimensions 1 and 2, got x of length {d}")));
    }
    if !(horizon > t) {
        return Err(ValueError::Input(format!("need T > t, got T = {horizon}, t = {t}")));
    }
    if !y_box.is_proper() || scan_n < 3 {
        return Err(ValueError::Input("oracle needs a proper box and at least 3 scan points".into()));
    }
    let obj = Objective { g, x, tau: horizon - t };
    let total = scan_n.pow(d as u32);
    let values = (0..total)
        .into_par_iter()
        .map(|k| {
            let y: Vec<f64> = (0..d).map(|a| scan_axis(y_box, a, scan_n, (k / scan_n.pow(a as u32)) % scan_n)).collect();
            obj.eval(&y)
        })
        .collect::<Result<Vec<f64>, _>>()?;
    let idx = |k: usize| -> Vec<usize> { (0..d).map(|a| (k / scan_n.pow(a as u32)) % scan_n).collect() };
    let flat = |i: &[usize]| -> usize { i.iter().enumerate().map(|(a, &v)| v * scan_n.pow(a as u32)).sum() };
    let scan_min = values.iter().copied().fold(f64::INFINITY, f64::min);

    let mut candidates = Vec::new();
    for k in 0..total {
        let i = idx(k);
        let mut is_local_min = true;
        for a in 0..d {
            for s in [-1i64, 1] {
                let j = i[a] as i64 + s;
                if j < 0 || j >= scan_n as i64 {
                    continue;
                }
                let mut nb = i.clone();
                nb[a] = j as usize;
                if values[flat(&nb)] < values[k] {
                    is_local_min = false;
                }
            }
        }
        // Refining pays off only for minima that could come within the tie
        // tolerance; a cell of width h can lower the value by O(h²·|G″|).
        if is_local_min && values[k] - scan_min <= 1e-2 * (1.0 + scan_min.abs()) {
            candidates.push(i);
        }
    }

    let refined = candidates
        .par_iter()
        .map(|i| -> Result<(Vec<f64>, f64, bool), ValueError> {
            let mut y: Vec<f64> = (0..d).map(|a| scan_axis(y_box, a, scan_n, i[a])).collect();
            let cell: Vec<(f64, f64)> = (0..d)
                .map(|a| (scan_axis(y_box, a, scan_n, i[a].saturating_sub(1)), scan_axis(y_box, a, scan_n, (i[a] + 1).min(scan_n - 1))))
                .collect();
            let sweeps = if d == 1 { 1 } else { 40 };
            for _ in 0..sweeps {
                for a in 0..d {
                    let mut probe = y.clone();
                    y[a] = ternary(cell[a].0, cell[a].1, |s| {
                        probe[a] = s;
                        obj.eval(&probe)
                    })?;
                }
            }
            let v = obj.eval(&y)?;
            let edge = i.iter().any(|&v| v == 0 || v + 1 == scan_n);
            Ok((y, v, edge))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let value = refined.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let mut argmins: Vec<Vec<f64>> = Vec::new();
    let mut on_boundary = false;
    for (y, v, edge) in &refined {
        if *v - value > TIE_TOL {
            continue;
        }
        on_boundary |= *edge;
        let dup = argmins.iter().any(|z| z.iter().zip(y).all(|(a, b)| (a - b).abs() < 1e-6));
        if !dup {
            argmins.push(y.clone());
        }
    }
    Ok(OracleResult { value, argmins, on_boundary })
}

/// Hopf–Lax values of a 1D or 2D grid at time-to-go `tau`, packaged as a
/// two-slice field (`t = T` and `t = T − tau`).
pub fn hopf_lax_field(
    g: &TerminalCost,
    grid: &Grid,
    tau: f64,
    y_box: &BoxDomain,
    scan_n: usize,
) -> Result<ValueField, ValueError> {
    let terminal = (0..grid.len())
        .map(|k| {
            let x = grid.point(k);
            g.value(&x).map_err(|e| ValueError::model(&x, e))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let values = (0..grid.len())
        .map(|k| Ok(hopf_lax_oracle(g, grid.horizon - tau, &grid.point(k), grid.horizon, y_box, scan_n)?.value))
        .collect::<Result<Vec<_>, ValueError>>()?;
    Ok(ValueField {
        grid: grid.clone(),
        scheme: "hopf-lax".into(),
        times: vec![grid.horizon, grid.horizon - tau],
        slices: vec![terminal, values],
    })
}
