//! Monotone local Lax–Friedrichs scheme on a tensor grid (d ≤ 2).

use rayon::prelude::*;
use serde::Serialize;

use super::ValueError;
use crate::model::{CanonicalShift, Hamiltonian, TerminalCost};
use crate::sampling::{sobol_in_boxes, BoxDomain};

/// Space-time grid. `dt` is the largest step `T / n` with
/// `dt · max_speed · d ≤ cfl · min Δx`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Grid {
    pub bounds: Vec<(f64, f64)>,
    pub nodes: Vec<usize>,
    pub spacing: Vec<f64>,
    pub horizon: f64,
    pub cfl: f64,
    pub max_speed: f64,
    pub dt: f64,
    pub steps: usize,
    /// Keep every k-th time slice (the first and last are always kept).
    pub record_every: usize,
}

impl Grid {
    pub fn new(
        bounds: Vec<(f64, f64)>,
        nodes: Vec<usize>,
        horizon: f64,
        cfl: f64,
        max_speed: f64,
    ) -> Result<Grid, ValueError> {
        let d = bounds.len();
        if d == 0 || d > 2 {
            return Err(ValueError::Input(format!("grid dimension must be 1 or 2, got {d}")));
        }
        if nodes.len() != d {
            return Err(ValueError::Input("one node count per axis is required".into()));
        }
        if bounds.iter().any(|&(a, b)| !(a.is_finite() && b.is_finite() && a < b)) {
            return Err(ValueError::Input(format!("degenerate grid bounds {bounds:?}")));
        }
        if nodes.iter().any(|&n| n < 3) {
            return Err(ValueError::Input("each axis needs at least 3 nodes".into()));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(ValueError::Input(format!("horizon must be positive, got {horizon}")));
        }
        if !(cfl > 0.0 && cfl <= 1.0) {
            return Err(ValueError::Input(format!("CFL number must lie in (0, 1], got {cfl}")));
        }
        if !(max_speed >= 0.0 && max_speed.is_finite()) {
            return Err(ValueError::Input(format!("invalid maximum speed {max_speed}")));
        }
        let spacing: Vec<f64> =
            bounds.iter().zip(&nodes).map(|(&(a, b), &n)| (b - a) / (n - 1) as f64).collect();
        let dx = spacing.iter().copied().fold(f64::INFINITY, f64::min);
        let steps = ((horizon * max_speed * d as f64) / (cfl * dx)).ceil().max(1.0) as usize;
        Ok(Grid {
            bounds,
            nodes,
            spacing,
            horizon,
            cfl,
            max_speed,
            dt: horizon / steps as f64,
            steps,
            record_every: 1,
        })
    }

    pub fn recording_every(mut self, k: usize) -> Grid {
        self.record_every = k.max(1);
        self
    }

    pub fn dim(&self) -> usize {
        self.nodes.len()
    }

    pub fn len(&self) -> usize {
        self.nodes.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn coordinate(&self, axis: usize, i: usize) -> f64 {
        let (a, b) = self.bounds[axis];
        if i + 1 == self.nodes[axis] {
            b
        } else {
            a + i as f64 * self.spacing[axis]
        }
    }

    /// Multi-index of flat node `k` (first axis fastest).
    pub fn index(&self, k: usize) -> Vec<usize> {
        let mut rest = k;
        self.nodes
            .iter()
            .map(|&n| {
                let i = rest % n;
                rest /= n;
                i
            })
            .collect()
    }

    pub fn point(&self, k: usize) -> Vec<f64> {
        self.index(k).iter().enumerate().map(|(a, &i)| self.coordinate(a, i)).collect()
    }

    /// Nodes in the central 80% of every axis.
    pub fn is_interior(&self, k: usize) -> bool {
        self.index(k).iter().zip(&self.nodes).all(|(&i, &n)| {
            let m = (n - 1) as f64;
            let (lo, hi) = ((0.1 * m).ceil() as usize, (0.9 * m).floor() as usize);
            i >= lo && i <= hi
        })
    }

    /// Time-to-go after `n` steps.
    pub fn tau(&self, n: usize) -> f64 {
        if n == self.steps {
            self.horizon
        } else {
            n as f64 * self.dt
        }
    }
}

/// Grid parameters before the speed bound is resolved.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct GridSetup {
    pub bounds: Vec<(f64, f64)>,
    pub nodes: Vec<usize>,
    pub horizon: f64,
    pub cfl: f64,
    /// `None` selects [`default_max_speed`].
    pub max_speed: Option<f64>,
}

impl GridSetup {
    pub fn uniform(lo: f64, hi: f64, nodes: usize, horizon: f64, cfl: f64) -> GridSetup {
        GridSetup { bounds: vec![(lo, hi)], nodes: vec![nodes], horizon, cfl, max_speed: None }
    }

    pub fn build<H: Hamiltonian + ?Sized>(&self, h: &H, g: &TerminalCost) -> Result<Grid, ValueError> {
        let speed = match self.max_speed {
            Some(s) => s,
            None => default_max_speed(h, g, &self.bounds, &self.nodes)?,
        };
        self.with_speed(speed)
    }

    pub fn with_speed(&self, speed: f64) -> Result<Grid, ValueError> {
        Grid::new(self.bounds.clone(), self.nodes.clone(), self.horizon, self.cfl, speed)
    }
}

/// Sampled sup of `|∂ₚH|` over the grid box crossed with the range of `∇G`
/// on the grid, the latter inflated by a factor 2 about its centre.
pub fn default_max_speed<H: Hamiltonian + ?Sized>(
    h: &H,
    g: &TerminalCost,
    bounds: &[(f64, f64)],
    nodes: &[usize],
) -> Result<f64, ValueError> {
    let d = bounds.len();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    let total: usize = nodes.iter().product();
    for k in 0..total {
        let mut rest = k;
        let x: Vec<f64> = bounds
            .iter()
            .zip(nodes)
            .map(|(&(a, b), &n)| {
                let i = rest % n;
                rest /= n;
                a + (b - a) * i as f64 / (n - 1) as f64
            })
            .collect();
        let grad = g.gradient(&x).map_err(|e| ValueError::model(&x, e))?;
        for (i, gi) in grad.iter().enumerate() {
            lo[i] = lo[i].min(*gi);
            hi[i] = hi[i].max(*gi);
        }
    }
    let (plo, phi): (Vec<f64>, Vec<f64>) = lo
        .iter()
        .zip(&hi)
        .map(|(&a, &b)| {
            let (c, r) = (0.5 * (a + b), (b - a).max(0.0));
            (c - r, c + r)
        })
        .unzip();
    let xbox = BoxDomain::new(bounds.iter().map(|b| b.0).collect(), bounds.iter().map(|b| b.1).collect());
    let pbox = BoxDomain::new(plo, phi);
    let mut points = sobol_in_boxes(&[&xbox, &pbox], 4096);
    // Corners of the product box.
    for mask in 0..1usize << (2 * d) {
        let pick = |b: &BoxDomain, off: usize| -> Vec<f64> {
            (0..d).map(|i| if mask >> (off + i) & 1 == 1 { b.hi[i] } else { b.lo[i] }).collect()
        };
        points.push(vec![pick(&xbox, 0), pick(&pbox, d)]);
    }
    let mut speed: f64 = 0.0;
    for pt in &points {
        let (_, dp) = h.value_dp(&pt[0], &pt[1]).map_err(|e| ValueError::model(&pt[0], e))?;
        for v in dp {
            speed = speed.max(v.abs());
        }
    }
    Ok(speed)
}

/// Advances one grid function backward in calendar time (forward in
/// time-to-go) with the local Lax–Friedrichs flux
/// `Ĥ = H(x, D⁰u) − Σₐ θₐ Dₐ²u`, `θₐ = (Δxₐ/2) · max |∂_{pₐ}H|` over the
/// one-sided differences. Ghost nodes extrapolate linearly, so the
/// outermost gradients are one-sided.
pub struct GridStepper<'a, H: Hamiltonian + ?Sized> {
    h: &'a H,
    grid: &'a Grid,
    points: Vec<Vec<f64>>,
    u: Vec<f64>,
    step: usize,
}

impl<'a, H: Hamiltonian + ?Sized> GridStepper<'a, H> {
    pub fn new(h: &'a H, g: &TerminalCost, grid: &'a Grid) -> Result<Self, ValueError> {
        if h.dim() != grid.dim() || g.dim() != grid.dim() {
            return Err(ValueError::Input(format!(
                "grid is {}-dimensional but the problem is {}-dimensional",
                grid.dim(),
                h.dim()
            )));
        }
        let points: Vec<Vec<f64>> = (0..grid.len()).map(|k| grid.point(k)).collect();
        let u = points
            .iter()
            .map(|x| g.value(x).map_err(|e| ValueError::model(x, e)))
            .collect::<Result<Vec<_>, _>>()?;
        if let Some(k) = u.iter().position(|v| !v.is_finite()) {
            return Err(ValueError::NonFinite { point: points[k].clone(), time: grid.horizon });
        }
        Ok(GridStepper { h, grid, points, u, step: 0 })
    }

    pub fn values(&self) -> &[f64] {
        &self.u
    }

    pub fn steps_taken(&self) -> usize {
        self.step
    }

    pub fn finished(&self) -> bool {
        self.step >= self.grid.steps
    }

    fn neighbours(&self, k: usize, axis: usize) -> (f64, f64) {
        let grid = self.grid;
        let stride: usize = grid.nodes[..axis].iter().product();
        let i = (k / stride) % grid.nodes[axis];
        let n = grid.nodes[axis];
        let u = &self.u;
        let c = u[k];
        let left = if i > 0 { u[k - stride] } else { 2.0 * c - u[k + stride] };
        let right = if i + 1 < n { u[k + stride] } else { 2.0 * c - u[k - stride] };
        (left, right)
    }

    fn node_update(&self, k: usize) -> Result<f64, ValueError> {
        let grid = self.grid;
        let d = grid.dim();
        let x = &self.points[k];
        let c = self.u[k];
        let mut central = [0.0; 2];
        let mut minus = [0.0; 2];
        let mut plus = [0.0; 2];
        let mut lap = [0.0; 2];
        for a in 0..d {
            let (l, r) = self.neighbours(k, a);
            let dx = grid.spacing[a];
            minus[a] = (c - l) / dx;
            plus[a] = (r - c) / dx;
            central[a] = 0.5 * (r - l) / dx;
            lap[a] = (r - 2.0 * c + l) / (dx * dx);
        }
        let (value, _) = self.h.value_dp(x, &central[..d]).map_err(|e| ValueError::model(x, e))?;
        // Largest |∂ₚₐH| over the corners spanned by the one-sided differences.
        let mut speed = [0.0f64; 2];
        for mask in 0..1usize << d {
            let p: Vec<f64> =
                (0..d).map(|a| if mask >> a & 1 == 1 { plus[a] } else { minus[a] }).collect();
            let (_, dp) = self.h.value_dp(x, &p).map_err(|e| ValueError::model(x, e))?;
            for a in 0..d {
                speed[a] = speed[a].max(dp[a].abs());
            }
        }
        let courant: f64 = (0..d).map(|a| speed[a] * grid.dt / grid.spacing[a]).sum();
        if courant > 1.0 {
            return Err(ValueError::Cfl {
                point: x.clone(),
                time: grid.horizon - self.grid.tau(self.step + 1),
                speed: speed.iter().copied().fold(0.0, f64::max),
                limit: grid.max_speed,
            });
        }
        let dissipation: f64 = (0..d).map(|a| 0.5 * speed[a] * grid.spacing[a] * lap[a]).sum();
        Ok(c - grid.dt * (value - dissipation))
    }

    pub fn step(&mut self) -> Result<(), ValueError> {
        if self.finished() {
            return Ok(());
        }
        let next: Vec<Result<f64, ValueError>> =
            (0..self.u.len()).into_par_iter().map(|k| self.node_update(k)).collect();
        let mut u = Vec::with_capacity(next.len());
        for r in next {
            u.push(r?);
        }
        self.step += 1;
        let time = self.grid.horizon - self.grid.tau(self.step);
        if let Some(k) = u.iter().position(|v| !v.is_finite()) {
            return Err(ValueError::NonFinite { point: self.points[k].clone(), time });
        }
        self.u = u;
        Ok(())
    }
}

/// Values of `u` on a grid at the recorded time slices, ordered from the
/// terminal time `T` back to `0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueField {
    pub grid: Grid,
    pub scheme: String,
    /// Calendar times `t` of the recorded slices (decreasing).
    pub times: Vec<f64>,
    pub slices: Vec<Vec<f64>>,
}

impl ValueField {
    pub fn terminal(&self) -> &[f64] {
        &self.slices[0]
    }

    pub fn initial(&self) -> &[f64] {
        self.slices.last().unwrap()
    }

    /// Linear (1D) or bilinear (2D) interpolation in slice `k`.
    pub fn interpolate(&self, k: usize, x: &[f64]) -> Option<f64> {
        let grid = &self.grid;
        let d = grid.dim();
        if x.len() != d {
            return None;
        }
        let mut base = [0usize; 2];
        let mut frac = [0.0; 2];
        for a in 0..d {
            let (lo, hi) = grid.bounds[a];
            if !(x[a] >= lo && x[a] <= hi) {
                return None;
            }
            let s = ((x[a] - lo) / grid.spacing[a]).min((grid.nodes[a] - 1) as f64);
            let i = (s.floor() as usize).min(grid.nodes[a] - 2);
            base[a] = i;
            frac[a] = s - i as f64;
        }
        let u = &self.slices[k];
        let nx = grid.nodes[0];
        Some(if d == 1 {
            u[base[0]] * (1.0 - frac[0]) + u[base[0] + 1] * frac[0]
        } else {
            let at = |i: usize, j: usize| u[(base[1] + j) * nx + base[0] + i];
            let (fx, fy) = (frac[0], frac[1]);
            at(0, 0) * (1.0 - fx) * (1.0 - fy)
                + at(1, 0) * fx * (1.0 - fy)
                + at(0, 1) * (1.0 - fx) * fy
                + at(1, 1) * fx * fy
        })
    }
}

/// Solves `u_τ + H(x, Du) = 0`, `u(τ = 0) = G` on `grid`.
pub fn solve_grid<H: Hamiltonian + ?Sized>(
    h: &H,
    g: &TerminalCost,
    grid: &Grid,
) -> Result<ValueField, ValueError> {
    let mut stepper = GridStepper::new(h, g, grid)?;
    let mut times = vec![grid.horizon];
    let mut slices = vec![stepper.values().to_vec()];
    while !stepper.finished() {
        stepper.step()?;
        let n = stepper.steps_taken();
        if n % grid.record_every == 0 || n == grid.steps {
            times.push(grid.horizon - grid.tau(n));
            slices.push(stepper.values().to_vec());
        }
    }
    Ok(ValueField { grid: grid.clone(), scheme: "local-lax-friedrichs".into(), times, slices })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ShiftDeviation {
    pub alpha: f64,
    /// `max |u_α − u − (α/2)|x|²|` over interior nodes and all time steps.
    pub deviation: f64,
    pub worst_point: Vec<f64>,
    pub worst_time: f64,
    pub max_speed: f64,
    pub dt: f64,
}

/// Runs `(H, G)` and `(H_α, G_α)` in lockstep on the same grid and measures
/// the departure from `u_α = u + (α/2)|x|²`. When `max_speed` is `None` the
/// larger of the two default speed bounds is used.
pub fn verify_value_shift<H: Hamiltonian + CanonicalShift>(
    h: &H,
    g: &TerminalCost,
    alpha: f64,
    setup: &GridSetup,
) -> Result<ShiftDeviation, ValueError> {
    let (hs, gs) = (h.shifted(alpha), g.shifted(alpha));
    let speed = match setup.max_speed {
        Some(s) => s,
        None => default_max_speed(h, g, &setup.bounds, &setup.nodes)?
            .max(default_max_speed(&hs, &gs, &setup.bounds, &setup.nodes)?),
    };
    let grid = setup.with_speed(speed)?;
    let mut base = GridStepper::new(h, g, &grid)?;
    let mut moved = GridStepper::new(&hs, &gs, &grid)?;
    let interior: Vec<usize> = (0..grid.len()).filter(|&k| grid.is_interior(k)).collect();
    let half_sq: Vec<f64> =
        (0..grid.len()).map(|k| 0.5 * alpha * grid.point(k).iter().map(|x| x * x).sum::<f64>()).collect();
    let mut worst = (0.0, interior[0], grid.horizon);
    loop {
        let (u, ua) = (base.values(), moved.values());
        for &k in &interior {
            let dev = (ua[k] - u[k] - half_sq[k]).abs();
            if dev > worst.0 {
                worst = (dev, k, grid.horizon - grid.tau(base.steps_taken()));
            }
        }
        if base.finished() {
            break;
        }
        base.step()?;
        moved.step()?;
    }
    Ok(ShiftDeviation {
        alpha,
        deviation: worst.0,
        worst_point: grid.point(worst.1),
        worst_time: worst.2,
        max_speed: grid.max_speed,
        dt: grid.dt,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ProfileRow {
    pub t: f64,
    pub axis: usize,
    #[serde(rename = "minD2")]
    pub min_d2: f64,
    #[serde(rename = "maxD2")]
    pub max_d2: f64,
}

/// Extremes of the centred second differences over nodes that are not on
/// the boundary, per recorded slice and per axis.
pub fn semiconcavity_profile(field: &ValueField) -> Vec<ProfileRow> {
    let grid = &field.grid;
    let mut rows = Vec::new();
    for (t, u) in field.times.iter().zip(&field.slices) {
        for axis in 0..grid.dim() {
            let stride: usize = grid.nodes[..axis].iter().product();
            let dx2 = grid.spacing[axis] * grid.spacing[axis];
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for k in 0..u.len() {
                let idx = grid.index(k);
                if idx.iter().zip(&grid.nodes).any(|(&i, &n)| i == 0 || i + 1 == n) {
                    continue;
                }
                let d2 = (u[k + stride] - 2.0 * u[k] + u[k - stride]) / dx2;
                lo = lo.min(d2);
                hi = hi.max(d2);
            }
            rows.push(ProfileRow { t: *t, axis, min_d2: lo, max_d2: hi });
        }
    }
    rows
}
