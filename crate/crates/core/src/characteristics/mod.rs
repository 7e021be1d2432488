//! Hamilton's equations and the characteristics of `u_τ + H(x, ∂ₓu) = 0`.
//!
//! Time here is time-to-go `τ = T − t`. Characteristics leave the terminal
//! layer at `(y, ∇G(y))` and follow `Ẋ = ∂ₚH`, `Ṗ = −∂ₓH` forward in `τ`.
//! Seen in calendar time `s` they run backwards: an optimal path from
//! `(t, x)` solves `dX/ds = −∂ₚH`, `dP/ds = ∂ₓH` with `P_T = ∇G(X_T)`.

mod shooting;

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::model::{CanonicalShift, Hamiltonian, ModelError};

pub use shooting::{first_conjugate_time, solve_terminal_bvp, ConjugatePoint, ShootingOptions, ShootingResult, Solution};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FlowError {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("evaluation failed at time {time}: {source}")]
    Model { time: f64, source: ModelError },
    #[error("state became non-finite at time {time}")]
    Divergence { time: f64 },
    #[error("no shooting start converged (best residual {best_residual:e})")]
    NoConvergence { best_residual: f64 },
}

/// A sampled solution of Hamilton's equations.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub momenta: Vec<Vec<f64>>,
    /// Derivative of `(X, P)` with respect to the initial data, `2d × k`.
    /// For [`integrate_flow`] it starts at the `2d × 2d` identity.
    pub variational: Option<Vec<DMatrix<f64>>>,
    pub energy: Vec<f64>,
    /// Running integral of `P·∂ₚH − H` over elapsed time.
    pub action: Vec<f64>,
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.states[0].len()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_state(&self) -> &[f64] {
        self.states.last().unwrap()
    }

    pub fn last_momentum(&self) -> &[f64] {
        self.momenta.last().unwrap()
    }

    /// `∂X/∂(first d initial coordinates)` at stamp `k`.
    pub fn state_jacobian(&self, k: usize) -> Option<DMatrix<f64>> {
        let d = self.dim();
        self.variational
            .as_ref()
            .map(|v| v[k].view((0, 0), (d, d.min(v[k].ncols()))).into_owned())
    }

    /// Largest energy deviation from the initial value.
    pub fn energy_drift(&self) -> f64 {
        let e0 = self.energy[0];
        self.energy.iter().map(|e| (e - e0).abs()).fold(0.0, f64::max)
    }

    /// Columns `s, X_1..X_d, P_1..P_d[, detJ], H`.
    pub fn to_csv(&self) -> String {
        let d = self.dim();
        let mut out = String::from("s");
        for i in 1..=d {
            write!(out, ",X_{i}").unwrap();
        }
        for i in 1..=d {
            write!(out, ",P_{i}").unwrap();
        }
        if self.variational.is_some() {
            out.push_str(",detJ");
        }
        out.push_str(",H\n");
        for k in 0..self.len() {
            write!(out, "{}", self.times[k]).unwrap();
            for v in self.states[k].iter().chain(&self.momenta[k]) {
                write!(out, ",{v}").unwrap();
            }
            if let Some(j) = self.state_jacobian(k) {
                write!(out, ",{}", j.determinant()).unwrap();
            }
            writeln!(out, ",{}", self.energy[k]).unwrap();
        }
        out
    }
}

/// Phase-space state with optional tangent block and action accumulator.
#[derive(Debug, Clone)]
pub(crate) struct State {
    pub x: DVector<f64>,
    pub p: DVector<f64>,
    pub phi: Option<DMatrix<f64>>,
    pub action: f64,
}

struct Deriv {
    x: DVector<f64>,
    p: DVector<f64>,
    phi: Option<DMatrix<f64>>,
    action: f64,
    energy: f64,
}

/// Vector field in `τ`, scaled by `sign` (`−1` runs the flow backwards).
fn field<H: Hamiltonian + ?Sized>(h: &H, z: &State, sign: f64) -> Result<Deriv, ModelError> {
    let xs: Vec<f64> = z.x.iter().copied().collect();
    let ps: Vec<f64> = z.p.iter().copied().collect();
    let j = h.jet(&xs, &ps)?;
    let phi = z.phi.as_ref().map(|phi| {
        let d = xs.len();
        // A = [[∂ₓₚHᵀ, ∂ₚₚH], [−∂ₓₓH, −∂ₓₚH]]
        let mut a = DMatrix::zeros(2 * d, 2 * d);
        a.view_mut((0, 0), (d, d)).copy_from(&j.xp.transpose());
        a.view_mut((0, d), (d, d)).copy_from(&j.pp);
        a.view_mut((d, 0), (d, d)).copy_from(&(-&j.xx));
        a.view_mut((d, d), (d, d)).copy_from(&(-&j.xp));
        a * phi * sign
    });
    Ok(Deriv {
        action: z.p.dot(&j.dp) - j.value,
        energy: j.value,
        x: j.dp * sign,
        p: -j.dx * sign,
        phi,
    })
}

fn axpy(z: &State, k: &Deriv, c: f64, abs_c: f64) -> State {
    State {
        x: &z.x + &k.x * c,
        p: &z.p + &k.p * c,
        phi: z.phi.as_ref().map(|phi| phi + k.phi.as_ref().unwrap() * c),
        action: z.action + k.action * abs_c,
    }
}

fn finite(z: &State) -> bool {
    z.x.iter().chain(z.p.iter()).all(|v| v.is_finite())
        && z.phi.as_ref().is_none_or(|m| m.iter().all(|v| v.is_finite()))
}

/// One classical Runge–Kutta step of length `dt > 0`; returns the new state
/// and the energy at the old one.
pub(crate) fn rk4_step<H: Hamiltonian + ?Sized>(
    h: &H,
    z: &State,
    dt: f64,
    sign: f64,
) -> Result<(State, f64), ModelError> {
    let k1 = field(h, z, sign)?;
    let k2 = field(h, &axpy(z, &k1, 0.5 * dt, 0.5 * dt), sign)?;
    let k3 = field(h, &axpy(z, &k2, 0.5 * dt, 0.5 * dt), sign)?;
    let k4 = field(h, &axpy(z, &k3, dt, dt), sign)?;
    let w = dt / 6.0;
    let phi = z.phi.as_ref().map(|phi| {
        phi + (k1.phi.as_ref().unwrap()
            + k2.phi.as_ref().unwrap() * 2.0
            + k3.phi.as_ref().unwrap() * 2.0
            + k4.phi.as_ref().unwrap())
            * w
    });
    let next = State {
        x: &z.x + (&k1.x + &k2.x * 2.0 + &k3.x * 2.0 + &k4.x) * w,
        p: &z.p + (&k1.p + &k2.p * 2.0 + &k3.p * 2.0 + &k4.p) * w,
        phi,
        action: z.action + (k1.action + 2.0 * k2.action + 2.0 * k3.action + k4.action) * w,
    };
    Ok((next, k1.energy))
}

/// Integrates from `z0` over a span of length `duration` split into steps
/// of length at most `h`. Stamps run from `t0` in direction `stamp_sign`.
pub(crate) fn integrate_state<H: Hamiltonian + ?Sized>(
    h: &H,
    z0: State,
    t0: f64,
    duration: f64,
    max_step: f64,
    sign: f64,
    stamp_sign: f64,
) -> Result<Trajectory, FlowError> {
    if !(max_step > 0.0) || !(duration > 0.0) {
        return Err(FlowError::Input("step and span must be positive".into()));
    }
    let n = ((duration / max_step) - 1e-9).ceil().max(1.0) as usize;
    let dt = duration / n as f64;
    let mut tr = Trajectory {
        times: Vec::with_capacity(n + 1),
        states: Vec::with_capacity(n + 1),
        momenta: Vec::with_capacity(n + 1),
        variational: z0.phi.as_ref().map(|_| Vec::with_capacity(n + 1)),
        energy: Vec::with_capacity(n + 1),
        action: Vec::with_capacity(n + 1),
    };
    let push = |tr: &mut Trajectory, z: &State, t: f64, e: f64| {
        tr.times.push(t);
        tr.states.push(z.x.iter().copied().collect());
        tr.momenta.push(z.p.iter().copied().collect());
        if let (Some(v), Some(phi)) = (tr.variational.as_mut(), z.phi.as_ref()) {
            v.push(phi.clone());
        }
        tr.energy.push(e);
        tr.action.push(z.action);
    };
    let mut z = z0;
    for k in 0..n {
        let t = t0 + stamp_sign * dt * k as f64;
        let (next, e) = rk4_step(h, &z, dt, sign).map_err(|source| FlowError::Model { time: t, source })?;
        push(&mut tr, &z, t, e);
        if !finite(&next) {
            return Err(FlowError::Divergence {
                time: t0 + stamp_sign * dt * (k + 1) as f64,
            });
        }
        z = next;
    }
    let t_end = t0 + stamp_sign * duration;
    let e = {
        let xs: Vec<f64> = z.x.iter().copied().collect();
        let ps: Vec<f64> = z.p.iter().copied().collect();
        h.value(&xs, &ps).map_err(|source| FlowError::Model { time: t_end, source })?
    };
    push(&mut tr, &z, t_end, e);
    Ok(tr)
}

/// Hamilton's flow `Ẋ = ∂ₚH, Ṗ = −∂ₓH` from `(x0, p0)` at `t0` to `t1` by
/// classical fourth-order Runge–Kutta with step at most `h`. With
/// `with_variational` the `2d × 2d` derivative of the flow map is carried
/// along, starting from the identity.
pub fn integrate_flow<H: Hamiltonian + ?Sized>(
    h: &H,
    x0: &[f64],
    p0: &[f64],
    t0: f64,
    t1: f64,
    step: f64,
    with_variational: bool,
) -> Result<Trajectory, FlowError> {
    let d = h.dim();
    if x0.len() != d || p0.len() != d {
        return Err(FlowError::Input(format!("initial data must be {d}-dimensional")));
    }
    if !(t1 > t0) {
        return Err(FlowError::Input("t1 must exceed t0".into()));
    }
    let z0 = State {
        x: DVector::from_column_slice(x0),
        p: DVector::from_column_slice(p0),
        phi: with_variational.then(|| DMatrix::identity(2 * d, 2 * d)),
        action: 0.0,
    };
    integrate_state(h, z0, t0, t1 - t0, step, 1.0, 1.0)
}

/// Maximum over time stamps of `|X − X'| + |P + αX − P'|`, where `(X, P)`
/// follows `H` from `(x0, p0)` and `(X', P')` follows `H_α` from
/// `(x0, p0 + αx0)`.
pub fn verify_conjugacy<H: Hamiltonian + CanonicalShift>(
    h: &H,
    alpha: f64,
    x0: &[f64],
    p0: &[f64],
    t0: f64,
    t1: f64,
    step: f64,
) -> Result<f64, FlowError> {
    let a = integrate_flow(h, x0, p0, t0, t1, step, false)?;
    let q0: Vec<f64> = p0.iter().zip(x0).map(|(p, x)| p + alpha * x).collect();
    let b = integrate_flow(&h.shifted(alpha), x0, &q0, t0, t1, step, false)?;
    let mut worst: f64 = 0.0;
    for k in 0..a.len() {
        let (x, p) = (&a.states[k], &a.momenta[k]);
        let (y, q) = (&b.states[k], &b.momenta[k]);
        let dx: f64 = x.iter().zip(y).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt();
        let dp: f64 = p
            .iter()
            .zip(x)
            .zip(q)
            .map(|((pi, xi), qi)| {
                let e = pi + alpha * xi - qi;
                e * e
            })
            .sum::<f64>()
            .sqrt();
        worst = worst.max(dx + dp);
    }
    Ok(worst)
}
