//! Direct minimisation of the discretised action
//! `F_t(γ) = ∫ₜᵀ L(γ, γ̇) ds + G(γ(T))` over piecewise-linear curves.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::ValueError;
use crate::model::{CanonicalShift, Lagrangian, TerminalCost};

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ActionOptions {
    /// Mesh points including both ends.
    pub mesh: usize,
    pub starts: usize,
    pub seed: u64,
    pub max_iter: usize,
    /// Stop once the gradient norm falls below this.
    pub grad_tol: f64,
    /// Minimisers whose values agree to this (relative) tolerance tie.
    pub tie_tol: f64,
    /// Curves closer than this in max norm belong to one cluster.
    pub cluster_radius: f64,
    /// Shift used for the per-curve `F_{t,α} − F_t = (α/2)|x|²` check.
    pub alpha: f64,
}

impl Default for ActionOptions {
    fn default() -> Self {
        ActionOptions {
            mesh: 33,
            starts: 12,
            seed: 0,
            max_iter: 20_000,
            grad_tol: 1e-9,
            tie_tol: 1e-6,
            cluster_radius: 1e-3,
            alpha: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Curve {
    pub times: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    pub value: f64,
    pub shifted_value: f64,
    pub gradient_norm: f64,
}

impl Curve {
    pub fn endpoint(&self) -> &[f64] {
        self.points.last().unwrap()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ActionResult {
    pub value: f64,
    /// One representative per cluster of minimising curves.
    pub curves: Vec<Curve>,
    pub multiple: bool,
    /// A non-minimal cluster came within 100× the tie tolerance.
    pub ambiguous: bool,
    /// Largest `|F_{t,α}(γ) − F_t(γ) − (α/2)|x|²|` over all converged curves.
    pub identity_residual: f64,
}

struct Discretisation<'a, L: Lagrangian + ?Sized> {
    l: &'a L,
    g: &'a TerminalCost,
    x: &'a [f64],
    h: f64,
    k: usize,
    d: usize,
}

impl<L: Lagrangian + ?Sized> Discretisation<'_, L> {
    fn node(&self, z: &[f64], i: usize) -> Vec<f64> {
        if i == 0 {
            self.x.to_vec()
        } else {
            z[(i - 1) * self.d..i * self.d].to_vec()
        }
    }

    fn err(&self, at: &[f64], e: crate::model::ModelError) -> ValueError {
        ValueError::model(at, e)
    }

    /// Value of the trapezoidal action; `grad` receives the derivative with
    /// respect to the free nodes `γ₁ … γ_K` when given.
    fn eval(&self, z: &[f64], mut grad: Option<&mut [f64]>) -> Result<f64, ValueError> {
        let (d, h) = (self.d, self.h);
        if let Some(gr) = grad.as_deref_mut() {
            gr.iter_mut().for_each(|v| *v = 0.0);
        }
        let mut total = 0.0;
        for s in 0..self.k - 1 {
            let (a, b) = (self.node(z, s), self.node(z, s + 1));
            let v: Vec<f64> = a.iter().zip(&b).map(|(p, q)| (q - p) / h).collect();
            for (end, pt) in [(s, &a), (s + 1, &b)] {
                let (val, lx, lv) = self.l.gradient(pt, &v).map_err(|e| self.err(pt, e))?;
                total += 0.5 * h * val;
                if let Some(gr) = grad.as_deref_mut() {
                    // ∂/∂γ_end of ½h L(γ_end, v) plus the chain through v.
                    for i in 0..d {
                        if end > 0 {
                            gr[(end - 1) * d + i] += 0.5 * h * lx[i];
                        }
                        if s > 0 {
                            gr[(s - 1) * d + i] -= 0.5 * lv[i];
                        }
                        gr[s * d + i] += 0.5 * lv[i];
                    }
                }
            }
        }
        let last = self.node(z, self.k - 1);
        total += self.g.value(&last).map_err(|e| self.err(&last, e))?;
        if let Some(gr) = grad {
            let gg = self.g.gradient(&last).map_err(|e| self.err(&last, e))?;
            for i in 0..d {
                gr[(self.k - 2) * d + i] += gg[i];
            }
        }
        Ok(total)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Solves `(A/h) s = g` per coordinate, where `A` is the path Laplacian
/// with a pinned start and a free end: the Hessian of the kinetic term.
/// Descending along `s` is gradient descent in the discrete H¹ metric,
/// which removes the `O(K²)` conditioning of the plain gradient.
fn sobolev_direction(g: &[f64], d: usize, h: f64) -> Vec<f64> {
    let n = g.len() / d;
    let mut out = vec![0.0; g.len()];
    let mut c = vec![0.0; n];
    let mut r = vec![0.0; n];
    for comp in 0..d {
        for i in 0..n {
            let diag = if i + 1 == n { 1.0 } else { 2.0 };
            let rhs = h * g[i * d + comp];
            if i == 0 {
                c[0] = -1.0 / diag;
                r[0] = rhs / diag;
            } else {
                let m = diag + c[i - 1];
                c[i] = -1.0 / m;
                r[i] = (rhs + r[i - 1]) / m;
            }
        }
        let mut next = 0.0;
        for i in (0..n).rev() {
            let v = if i + 1 == n { r[i] } else { r[i] - c[i] * next };
            out[i * d + comp] = v;
            next = v;
        }
    }
    out
}

/// Preconditioned gradient descent with Barzilai–Borwein trial steps and
/// Armijo backtracking.
fn descend<L: Lagrangian + ?Sized>(
    prob: &Discretisation<'_, L>,
    mut z: Vec<f64>,
    opts: &ActionOptions,
) -> Result<(Vec<f64>, f64, f64), ValueError> {
    let n = z.len();
    let mut grad = vec![0.0; n];
    let mut f = prob.eval(&z, Some(&mut grad))?;
    let mut step = 1.0;
    let mut trial_grad = vec![0.0; n];
    for _ in 0..opts.max_iter {
        if norm(&grad) <= opts.grad_tol {
            break;
        }
        let dir = sobolev_direction(&grad, prob.d, prob.h);
        let slope: f64 = grad.iter().zip(&dir).map(|(a, b)| a * b).sum();
        let mut t = step;
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<f64> = z.iter().zip(&dir).map(|(a, g)| a - t * g).collect();
            if let Ok(ft) = prob.eval(&trial, Some(&mut trial_grad)) {
                if ft.is_finite() && ft <= f - 1e-4 * t * slope {
                    let sy: f64 = trial.iter().zip(&z).zip(trial_grad.iter().zip(&grad)).map(|((a, b), (c, e))| (a - b) * (c - e)).sum();
                    step = if sy > 0.0 { (t * t * slope / sy).clamp(1e-8, 1e4) } else { (2.0 * t).min(1e4) };
                    z = trial;
                    f = ft;
                    std::mem::swap(&mut grad, &mut trial_grad);
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let gnorm = norm(&grad);
    Ok((z, f, gnorm))
}

/// Minimises the trapezoidal action over curves with `γ(t) = x` from
/// `opts.starts` seeded initial guesses and clusters the minimisers. Every
/// converged curve is also priced under `(L_α, G_α)` and must satisfy
/// `F_{t,α}(γ) − F_t(γ) = (α/2)|x|²`, which is exact for the discretisation.
pub fn minimize_action<L: Lagrangian + CanonicalShift>(
    l: &L,
    g: &TerminalCost,
    t: f64,
    x: &[f64],
    horizon: f64,
    opts: &ActionOptions,
) -> Result<ActionResult, ValueError> {
    let d = x.len();
    if l.dim() != d || g.dim() != d {
        return Err(ValueError::Input(format!("query point has dimension {d}, problem has {}", l.dim())));
    }
    if opts.mesh < 2 || opts.starts == 0 {
        return Err(ValueError::Input("need at least 2 mesh points and 1 start".into()));
    }
    if !(horizon > t) {
        return Err(ValueError::Input(format!("need T > t, got T = {horizon}, t = {t}")));
    }
    let k = opts.mesh;
    let tau = horizon - t;
    let prob = Discretisation { l, g, x, h: tau / (k - 1) as f64, k, d };
    let (ls, gs) = (l.shifted(opts.alpha), g.shifted(opts.alpha));
    let shifted = Discretisation { l: &ls, g: &gs, x, h: prob.h, k, d };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let ends: Vec<Vec<f64>> = (0..opts.starts)
        .map(|s| {
            if s == 0 {
                x.to_vec()
            } else {
                x.iter().map(|xi| xi + tau * rng.gen_range(-3.0..3.0)).collect()
            }
        })
        .collect();
    let runs: Vec<Result<(Vec<f64>, f64, f64), ValueError>> = ends
        .par_iter()
        .map(|end| {
            let z: Vec<f64> = (1..k)
                .flat_map(|i| {
                    let w = i as f64 / (k - 1) as f64;
                    x.iter().zip(end).map(move |(a, b)| a + w * (b - a)).collect::<Vec<_>>()
                })
                .collect();
            descend(&prob, z, opts)
        })
        .collect();

    let converged_tol = 1e-6_f64.max(opts.grad_tol);
    let mut curves = Vec::new();
    let mut best_residual = f64::INFINITY;
    let mut identity_residual: f64 = 0.0;
    let half_sq = 0.5 * opts.alpha * x.iter().map(|a| a * a).sum::<f64>();
    for run in runs {
        let (z, value, gnorm) = run?;
        best_residual = best_residual.min(gnorm);
        if gnorm > converged_tol {
            continue;
        }
        let shifted_value = shifted.eval(&z, None)?;
        let residual = (shifted_value - value - half_sq).abs();
        identity_residual = identity_residual.max(residual);
        if residual > 1e-10 * (1.0 + value.abs().max(shifted_value.abs())) {
            return Err(ValueError::Identity { residual });
        }
        let points: Vec<Vec<f64>> = (0..k).map(|i| prob.node(&z, i)).collect();
        let times = (0..k).map(|i| t + tau * i as f64 / (k - 1) as f64).collect();
        curves.push(Curve { times, points, value, shifted_value, gradient_norm: gnorm });
    }
    if curves.is_empty() {
        return Err(ValueError::NoConvergence { residual: best_residual });
    }

    // Cluster by max-norm distance, keeping the best member of each.
    curves.sort_by(|a, b| a.value.total_cmp(&b.value));
    let mut clusters: Vec<Curve> = Vec::new();
    for c in curves {
        let near = clusters.iter().any(|r| {
            r.points.iter().zip(&c.points).all(|(p, q)| p.iter().zip(q).all(|(a, b)| (a - b).abs() <= opts.cluster_radius))
        });
        if !near {
            clusters.push(c);
        }
    }
    let value = clusters[0].value;
    let scale = 1.0 + value.abs();
    let (tied, rest): (Vec<Curve>, Vec<Curve>) =
        clusters.into_iter().partition(|c| c.value - value <= opts.tie_tol * scale);
    let ambiguous = rest.iter().any(|c| c.value - value <= 100.0 * opts.tie_tol * scale);
    Ok(ActionResult { value, multiple: tied.len() > 1, curves: tied, ambiguous, identity_residual })
}
