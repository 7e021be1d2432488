use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use rayon::prelude::*;

use super::{integrate_state, rk4_step, FlowError, State, Trajectory};
use crate::model::{Hamiltonian, TerminalCost};
use crate::sampling::{unit_sobol, BoxDomain};

#[derive(Debug, Clone, PartialEq)]
pub struct ShootingOptions {
    pub step: f64,
    pub tol: f64,
    pub starts: usize,
    pub seed: u64,
    pub max_newton: usize,
    /// Terminal states closer than this are the same solution.
    pub cluster_tol: f64,
}

impl Default for ShootingOptions {
    fn default() -> Self {
        ShootingOptions {
            step: 1e-3,
            tol: 1e-10,
            starts: 16,
            seed: 0,
            max_newton: 50,
            cluster_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    /// Momentum at the initial time.
    pub momentum: Vec<f64>,
    /// Calendar-time path from `(t, x)` to the terminal layer.
    pub trajectory: Trajectory,
    /// `|P_T − ∇G(X_T)|`.
    pub residual: f64,
    pub iterations: usize,
    /// `G(X_T) + ∫ (P·∂ₚH − H) ds`, the cost carried by this characteristic.
    pub value: f64,
    /// The shooting Jacobian is numerically singular at the solution: a
    /// conjugate point sits on this characteristic.
    pub singular: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShootingResult {
    pub converged: bool,
    /// The distinct solution with the smallest value.
    pub best: Solution,
    /// All distinct converged solutions, in start order.
    pub solutions: Vec<Solution>,
}

impl ShootingResult {
    pub fn residual(&self) -> f64 {
        self.best.residual
    }
}

struct Shot {
    trajectory: Trajectory,
    residual: DVector<f64>,
    jacobian: DMatrix<f64>,
}

fn shoot<H: Hamiltonian + ?Sized>(
    h: &H,
    g: &TerminalCost,
    t: f64,
    x: &[f64],
    horizon: f64,
    p: &DVector<f64>,
    step: f64,
) -> Result<Shot, FlowError> {
    let d = x.len();
    let mut phi0 = DMatrix::zeros(2 * d, d);
    phi0.view_mut((d, 0), (d, d)).fill_with_identity();
    let z0 = State {
        x: DVector::from_column_slice(x),
        p: p.clone(),
        phi: Some(phi0),
        action: 0.0,
    };
    let tr = integrate_state(h, z0, t, horizon, step, -1.0, 1.0)?;
    let xt = tr.last_state();
    let (_, grad, hess) = g.jet(xt).map_err(|source| FlowError::Model { time: t + horizon, source })?;
    let residual = DVector::from_column_slice(tr.last_momentum()) - grad;
    let phi = tr.variational.as_ref().unwrap().last().unwrap();
    let jacobian = phi.view((d, 0), (d, d)) - hess * phi.view((0, 0), (d, d));
    Ok(Shot {
        trajectory: tr,
        residual,
        jacobian,
    })
}

fn singular(j: &DMatrix<f64>) -> bool {
    let scale = j.norm().max(1.0).powi(j.nrows() as i32);
    j.determinant().abs() <= 1e-8 * scale
}

/// Newton on the initial momentum from one start.
fn newton<H: Hamiltonian + ?Sized>(
    h: &H,
    g: &TerminalCost,
    t: f64,
    x: &[f64],
    horizon: f64,
    start: DVector<f64>,
    opts: &ShootingOptions,
) -> Result<Solution, (FlowError, f64)> {
    let d = x.len();
    let mut p = start;
    let mut shot = shoot(h, g, t, x, horizon, &p, opts.step).map_err(|e| (e, f64::INFINITY))?;
    let mut iterations = 0;
    while shot.residual.norm() > opts.tol && iterations < opts.max_newton {
        iterations += 1;
        let r = shot.residual.norm();
        let dir = match shot.jacobian.clone().lu().solve(&(-&shot.residual)) {
            Some(dir) if dir.iter().all(|v| v.is_finite()) => dir,
            _ => {
                // Finite-difference Jacobian; also singular means we are
                // sitting on a conjugate point and cannot progress.
                let eps = 1e-6;
                let mut jac = DMatrix::zeros(d, d);
                for k in 0..d {
                    let mut q = p.clone();
                    q[k] += eps;
                    let s = shoot(h, g, t, x, horizon, &q, opts.step).map_err(|e| (e, r))?;
                    jac.set_column(k, &((s.residual - &shot.residual) / eps));
                }
                match jac.lu().solve(&(-&shot.residual)) {
                    Some(dir) if dir.iter().all(|v| v.is_finite()) => dir,
                    _ => break,
                }
            }
        };
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let q = &p + &dir * lambda;
            if let Ok(s) = shoot(h, g, t, x, horizon, &q, opts.step) {
                if s.residual.norm() < (1.0 - 1e-4 * lambda) * r {
                    accepted = Some((q, s));
                    break;
                }
            }
            lambda *= 0.5;
        }
        match accepted {
            Some((q, s)) => {
                p = q;
                shot = s;
            }
            None => break,
        }
    }
    let residual = shot.residual.norm();
    if residual > opts.tol {
        return Err((FlowError::NoConvergence { best_residual: residual }, residual));
    }
    let xt = shot.trajectory.last_state().to_vec();
    let gt = g.value(&xt).map_err(|source| (FlowError::Model { time: t + horizon, source }, residual))?;
    Ok(Solution {
        momentum: p.iter().copied().collect(),
        value: gt + shot.trajectory.action.last().unwrap(),
        singular: singular(&shot.jacobian),
        trajectory: shot.trajectory,
        residual,
        iterations,
    })
}

/// Initial momenta: `∇G(x)` itself, then uniform draws from the ball of
/// radius `2(1 + |∇G(x)|)` around it.
fn start_momenta(g: &TerminalCost, x: &[f64], opts: &ShootingOptions) -> Result<Vec<DVector<f64>>, FlowError> {
    let d = x.len();
    let centre = DVector::from_vec(g.gradient(x).map_err(|source| FlowError::Model { time: 0.0, source })?);
    let radius = 2.0 * (1.0 + centre.norm());
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let unit = Uniform::new(0.0, 1.0);
    let mut out = vec![centre.clone()];
    while out.len() < opts.starts.max(1) {
        let dir: DVector<f64> = DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
        let n = dir.norm();
        if n < 1e-8 {
            continue;
        }
        let u: f64 = unit.sample(&mut rng);
        let r = radius * u.powf(1.0 / d as f64);
        out.push(&centre + dir * (r / n));
    }
    Ok(out)
}

/// Characteristics from `(t, x)` that land on the terminal layer with
/// `P_T = ∇G(X_T)`, found by multi-start Newton shooting on the initial
/// momentum.
pub fn solve_terminal_bvp<H: Hamiltonian + ?Sized>(
    h: &H,
    g: &TerminalCost,
    t: f64,
    x: &[f64],
    horizon_end: f64,
    opts: &ShootingOptions,
) -> Result<ShootingResult, FlowError> {
    if !(horizon_end > t) {
        return Err(FlowError::Input("terminal time must exceed the initial time".into()));
    }
    if x.len() != h.dim() || g.dim() != h.dim() {
        return Err(FlowError::Input("dimension mismatch between x, H and G".into()));
    }
    let horizon = horizon_end - t;
    let starts = start_momenta(g, x, opts)?;
    let runs: Vec<_> = starts
        .into_par_iter()
        .map(|p| newton(h, g, t, x, horizon, p, opts))
        .collect();
    let mut solutions: Vec<Solution> = Vec::new();
    let mut best_residual = f64::INFINITY;
    for run in runs {
        match run {
            Ok(sol) => {
                let xt = sol.trajectory.last_state();
                let duplicate = solutions.iter().any(|s| {
                    crate::linalg::norm(
                        &s.trajectory.last_state().iter().zip(xt).map(|(a, b)| a - b).collect::<Vec<_>>(),
                    ) <= opts.cluster_tol
                });
                if !duplicate {
                    solutions.push(sol);
                }
            }
            Err((_, r)) => best_residual = best_residual.min(r),
        }
    }
    let best = solutions
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.value.total_cmp(&b.1.value).then(a.0.cmp(&b.0)))
        .map(|(_, s)| s.clone())
        .ok_or(FlowError::NoConvergence { best_residual })?;
    Ok(ShootingResult {
        converged: true,
        best,
        solutions,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConjugatePoint {
    /// Time-to-go at which `det ∂X/∂y` first vanishes.
    pub tau: f64,
    /// Calendar time `T − τ`.
    pub time: f64,
    pub y: Vec<f64>,
}

fn state_det(z: &State, d: usize) -> f64 {
    z.phi.as_ref().unwrap().view((0, 0), (d, d)).determinant()
}

/// First zero of `det ∂X/∂y` along the characteristic leaving `y`, if any
/// before `horizon`.
fn crossing<H: Hamiltonian + ?Sized>(
    h: &H,
    g: &TerminalCost,
    y: &[f64],
    horizon: f64,
    step: f64,
) -> Result<Option<f64>, FlowError> {
    let d = y.len();
    let (_, grad, hess) = g.jet(y).map_err(|source| FlowError::Model { time: 0.0, source })?;
    let mut phi = DMatrix::zeros(2 * d, d);
    phi.view_mut((0, 0), (d, d)).fill_with_identity();
    phi.view_mut((d, 0), (d, d)).copy_from(&hess);
    let mut z = State {
        x: DVector::from_column_slice(y),
        p: grad,
        phi: Some(phi),
        action: 0.0,
    };
    let n = ((horizon / step) - 1e-9).ceil().max(1.0) as usize;
    let dt = horizon / n as f64;
    let err = |k: usize| move |source| FlowError::Model { time: k as f64 * dt, source };
    for k in 0..n {
        let (next, _) = rk4_step(h, &z, dt, 1.0).map_err(err(k))?;
        if state_det(&next, d) <= 0.0 {
            // Bisect inside this step, re-integrating from its start.
            let (mut lo, mut hi) = (0.0, dt);
            while hi - lo > 1e-6 {
                let mid = 0.5 * (lo + hi);
                let (zm, _) = rk4_step(h, &z, mid, 1.0).map_err(err(k))?;
                if state_det(&zm, d) <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Ok(Some(k as f64 * dt + hi));
        }
        z = next;
    }
    Ok(None)
}

/// Scans terminal points `y` of `y_box` (a uniform grid of `samples` nodes
/// in one dimension, Sobol points otherwise) and returns the earliest
/// time-to-go at which a characteristic map `y ↦ X_τ(y)` degenerates.
pub fn first_conjugate_time<H: Hamiltonian + ?Sized>(
    h: &H,
    g: &TerminalCost,
    horizon_end: f64,
    y_box: &BoxDomain,
    step: f64,
    samples: usize,
) -> Result<Option<ConjugatePoint>, FlowError> {
    if !(horizon_end > 0.0) || !(step > 0.0) || samples < 2 {
        return Err(FlowError::Input("horizon, step and sample count must be positive".into()));
    }
    let ys: Vec<Vec<f64>> = if y_box.dim() == 1 {
        let (a, b) = (y_box.lo[0], y_box.hi[0]);
        (0..samples)
            .map(|i| vec![a + (b - a) * i as f64 / (samples - 1) as f64])
            .collect()
    } else {
        unit_sobol(y_box.dim(), samples).iter().map(|u| y_box.map_unit(u)).collect()
    };
    let hits: Vec<Result<Option<f64>, FlowError>> = ys
        .par_iter()
        .map(|y| crossing(h, g, y, horizon_end, step))
        .collect();
    // Periodic data produce exact ties; prefer the one nearest the centre.
    let centre = y_box.center();
    let offset = |i: usize| {
        crate::linalg::norm(&ys[i].iter().zip(&centre).map(|(a, c)| a - c).collect::<Vec<_>>())
    };
    let mut best: Option<(f64, usize)> = None;
    for (i, hit) in hits.into_iter().enumerate() {
        if let Some(tau) = hit? {
            let better = match best {
                None => true,
                Some((b, j)) => tau < b - 1e-9 || (tau <= b + 1e-9 && offset(i) < offset(j)),
            };
            if better {
                best = Some((tau, i));
            }
        }
    }
    Ok(best.map(|(tau, i)| ConjugatePoint {
        tau,
        time: horizon_end - tau,
        y: ys[i].clone(),
    }))
}
