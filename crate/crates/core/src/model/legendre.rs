//! Numerical Legendre–Fenchel transforms with the sign convention
//!
//! ```text
//! H(x, p) = sup_v { p·v − L(x, −v) }
//! ```
//!
//! For Lagrangians even in `v` this is the textbook conjugate; in general it
//! is the textbook conjugate composed with `p ↦ −p`. Substituting `w = −v`,
//! `H(x, p) = −min_w { L(x, w) + p·w }`, which is what the code minimises.

use nalgebra::{DMatrix, DVector};

use super::{
    apply_shift, check_dim, CanonicalShift, Hamiltonian, HamiltonianJet, HamiltonianModel,
    Lagrangian, LagrangianJet, LagrangianModel, ModelError,
};
use crate::linalg::min_eig;
use crate::sampling::{unit_sobol, BoxDomain};

#[derive(Debug, Clone, PartialEq)]
pub struct LegendreOptions {
    /// Half-width of the cube the Newton starts are drawn from.
    pub search_radius: f64,
    pub starts: usize,
    /// Stopping threshold on the gradient norm of the inner objective.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for LegendreOptions {
    fn default() -> Self {
        LegendreOptions {
            search_radius: 20.0,
            starts: 5,
            tol: 1e-10,
            max_iter: 200,
        }
    }
}

impl LegendreOptions {
    fn starts(&self, d: usize) -> Vec<Vec<f64>> {
        let cube = BoxDomain::cube(d, self.search_radius);
        // Skip the corner at index 0; index 1 is the centre.
        unit_sobol(d, self.starts + 1)
            .into_iter()
            .skip(1)
            .map(|u| cube.map_unit(&u))
            .collect()
    }
}

type Local = (f64, DVector<f64>, DMatrix<f64>);

/// Damped Newton minimisation of a convex objective from one start. A
/// negative curvature anywhere along the path is reported as non-convexity.
fn newton(
    f: &dyn Fn(&[f64]) -> Result<Local, ModelError>,
    start: &[f64],
    opts: &LegendreOptions,
) -> Result<(Vec<f64>, Local), ModelError> {
    let mut w = start.to_vec();
    let mut cur = f(&w)?;
    for _ in 0..opts.max_iter {
        let (value, grad, hess) = &cur;
        let gnorm = grad.norm();
        let curvature = min_eig(hess);
        if curvature < -1e-10 * (1.0 + hess.norm()) {
            return Err(ModelError::NonConvex { point: w, curvature });
        }
        if gnorm <= opts.tol {
            return Ok((w, cur));
        }
        let n = grad.len();
        let step = hess
            .clone()
            .cholesky()
            .map(|c| c.solve(&(-grad)))
            .unwrap_or_else(|| {
                let mu = gnorm.max(1e-8);
                (hess + DMatrix::identity(n, n) * mu)
                    .cholesky()
                    .map(|c| c.solve(&(-grad)))
                    .unwrap_or_else(|| -grad)
            });
        let slope = grad.dot(&step);
        let mut t = 1.0;
        let mut next = None;
        for _ in 0..60 {
            let trial: Vec<f64> = w.iter().zip(step.iter()).map(|(a, s)| a + t * s).collect();
            if let Ok(cand) = f(&trial) {
                if cand.0 <= value + 1e-4 * t * slope || cand.1.norm() < gnorm * 1e-3 {
                    next = Some((trial, cand));
                    break;
                }
            }
            t *= 0.5;
        }
        match next {
            Some((trial, cand)) => {
                w = trial;
                cur = cand;
            }
            // No decrease representable in floating point: accept if the
            // gradient is at roundoff level relative to the objective.
            None if gnorm <= 1e-7 * (1.0 + value.abs()) => return Ok((w, cur)),
            None => break,
        }
    }
    let residual = cur.1.norm();
    if residual <= opts.tol {
        Ok((w, cur))
    } else {
        Err(ModelError::NoConvergence {
            start: start.to_vec(),
            residual,
        })
    }
}

/// Best local minimum over the configured starts. Non-convexity detected
/// from any start is fatal; otherwise the first error is reported only if
/// every start fails.
fn multistart(
    f: &dyn Fn(&[f64]) -> Result<Local, ModelError>,
    d: usize,
    opts: &LegendreOptions,
) -> Result<(Vec<f64>, Local), ModelError> {
    let mut best: Option<(Vec<f64>, Local)> = None;
    let mut first_err = None;
    for s in opts.starts(d) {
        match newton(f, &s, opts) {
            Ok(r) => {
                if best.as_ref().is_none_or(|b| r.1 .0 < b.1 .0) {
                    best = Some(r);
                }
            }
            Err(e @ ModelError::NonConvex { .. }) => return Err(e),
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    best.ok_or_else(|| first_err.expect("at least one start"))
}

/// Minimiser `w*` of `L(x, w) + p·w` and the Lagrangian jet there.
fn inner_lagrangian<L: Lagrangian + ?Sized>(
    l: &L,
    x: &[f64],
    p: &[f64],
    opts: &LegendreOptions,
) -> Result<(Vec<f64>, LagrangianJet), ModelError> {
    let d = l.dim();
    check_dim(d, x.len())?;
    check_dim(d, p.len())?;
    let pv = DVector::from_column_slice(p);
    let f = |w: &[f64]| -> Result<Local, ModelError> {
        let j = l.jet(x, w)?;
        let wv = DVector::from_column_slice(w);
        Ok((j.value + pv.dot(&wv), &j.dv + &pv, j.vv))
    };
    let (w, _) = multistart(&f, d, opts)?;
    let jet = l.jet(x, &w)?;
    Ok((w, jet))
}

/// `sup_v { p·v − L(x, −v) }` by damped Newton from quasi-random starts.
pub fn legendre_transform<L: Lagrangian + ?Sized>(
    l: &L,
    x: &[f64],
    p: &[f64],
    opts: &LegendreOptions,
) -> Result<f64, ModelError> {
    let (w, jet) = inner_lagrangian(l, x, p, opts)?;
    Ok(-(jet.value + crate::linalg::dot(p, &w)))
}

fn inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>, ModelError> {
    m.clone().try_inverse().ok_or(ModelError::NonConvex {
        point: vec![],
        curvature: 0.0,
    })
}

/// The Hamiltonian conjugate to a Lagrangian. Second derivatives come from
/// the implicit function theorem at the inner optimum, so no differencing
/// is involved.
///
/// Its own shift acts on the Hamiltonian side, `(x, p) ↦ (x, p − αx)`,
/// independently of any shift already applied to the Lagrangian.
#[derive(Debug, Clone)]
pub struct ConjugateHamiltonian {
    lagrangian: LagrangianModel,
    opts: LegendreOptions,
    shift: f64,
}

impl ConjugateHamiltonian {
    pub fn new(lagrangian: LagrangianModel, opts: LegendreOptions) -> Self {
        ConjugateHamiltonian {
            lagrangian,
            opts,
            shift: 0.0,
        }
    }

    pub fn lagrangian(&self) -> &LagrangianModel {
        &self.lagrangian
    }

    fn base_p(&self, x: &[f64], p: &[f64]) -> Vec<f64> {
        p.iter().zip(x).map(|(pi, xi)| pi - self.shift * xi).collect()
    }
}

impl Hamiltonian for ConjugateHamiltonian {
    fn dim(&self) -> usize {
        self.lagrangian.dim()
    }

    fn value(&self, x: &[f64], p: &[f64]) -> Result<f64, ModelError> {
        check_dim(self.dim(), p.len())?;
        legendre_transform(&self.lagrangian, x, &self.base_p(x, p), &self.opts)
    }

    /// With `w*` the inner minimiser: `∂ₚH = −w*`, `∂ₓH = −∂ₓL`,
    /// `∂ₚₚH = L_vv⁻¹`, `∂ₓₚH = L_xv L_vv⁻¹`,
    /// `∂ₓₓH = −L_xx + L_xv L_vv⁻¹ L_xvᵀ`, all at `(x, w*)`.
    fn jet(&self, x: &[f64], p: &[f64]) -> Result<HamiltonianJet, ModelError> {
        check_dim(self.dim(), p.len())?;
        let q = self.base_p(x, p);
        let (w, j) = inner_lagrangian(&self.lagrangian, x, &q, &self.opts)?;
        let inv = inverse(&j.vv)?;
        let xp = &j.xv * &inv;
        let xx = -&j.xx + &xp * j.xv.transpose();
        let wv = DVector::from_vec(w);
        let base = HamiltonianJet {
            value: -(j.value + wv.dot(&DVector::from_vec(q))),
            dx: -j.dx,
            dp: -wv,
            xx: crate::linalg::sym(&xx),
            xp,
            pp: crate::linalg::sym(&inv),
        };
        Ok(apply_shift(base, self.shift))
    }
}

impl CanonicalShift for ConjugateHamiltonian {
    fn shift(&self) -> f64 {
        self.shift
    }

    fn shifted(&self, alpha: f64) -> Self {
        ConjugateHamiltonian {
            shift: self.shift + alpha,
            ..self.clone()
        }
    }
}

/// The Lagrangian conjugate to a Hamiltonian strictly convex in `p`:
/// `L(x, w) = sup_p { −p·w − H(x, p) }`, the inverse of the transform above.
#[derive(Debug, Clone)]
pub struct ConjugateLagrangian {
    hamiltonian: HamiltonianModel,
    opts: LegendreOptions,
    shift: f64,
}

impl ConjugateLagrangian {
    pub fn new(hamiltonian: HamiltonianModel, opts: LegendreOptions) -> Self {
        ConjugateLagrangian {
            hamiltonian,
            opts,
            shift: 0.0,
        }
    }

    pub fn hamiltonian(&self) -> &HamiltonianModel {
        &self.hamiltonian
    }

    /// Maximiser `p*` and the Hamiltonian jet there.
    fn inner(&self, x: &[f64], w: &[f64]) -> Result<(Vec<f64>, HamiltonianJet), ModelError> {
        let d = self.dim();
        check_dim(d, x.len())?;
        check_dim(d, w.len())?;
        let wv = DVector::from_column_slice(w);
        let f = |p: &[f64]| -> Result<Local, ModelError> {
            let j = self.hamiltonian.jet(x, p)?;
            let pv = DVector::from_column_slice(p);
            Ok((j.value + pv.dot(&wv), &j.dp + &wv, j.pp))
        };
        let (p, _) = multistart(&f, d, &self.opts)?;
        let jet = self.hamiltonian.jet(x, &p)?;
        Ok((p, jet))
    }
}

impl Lagrangian for ConjugateLagrangian {
    fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }

    fn value(&self, x: &[f64], v: &[f64]) -> Result<f64, ModelError> {
        let (p, j) = self.inner(x, v)?;
        Ok(-(j.value + crate::linalg::dot(&p, v)) - self.shift * crate::linalg::dot(x, v))
    }

    /// With `p*` the inner maximiser: `∂ᵥL = −p*`, `∂ₓL = −∂ₓH`,
    /// `L_vv = ∂ₚₚH⁻¹`, `L_xv = ∂ₓₚH ∂ₚₚH⁻¹`,
    /// `L_xx = −∂ₓₓH + ∂ₓₚH ∂ₚₚH⁻¹ ∂ₓₚHᵀ`.
    fn jet(&self, x: &[f64], v: &[f64]) -> Result<LagrangianJet, ModelError> {
        let (p, j) = self.inner(x, v)?;
        let inv = inverse(&j.pp)?;
        let xv = &j.xp * &inv;
        let xx = -&j.xx + &xv * j.xp.transpose();
        let a = self.shift;
        let pv = DVector::from_vec(p);
        let vs = DVector::from_column_slice(v);
        let xs = DVector::from_column_slice(x);
        let d = self.dim();
        Ok(LagrangianJet {
            value: -(j.value + pv.dot(&vs)) - a * xs.dot(&vs),
            dx: -j.dx - &vs * a,
            dv: -pv - &xs * a,
            xx: crate::linalg::sym(&xx),
            xv: xv - DMatrix::identity(d, d) * a,
            vv: crate::linalg::sym(&inv),
        })
    }
}

impl CanonicalShift for ConjugateLagrangian {
    fn shift(&self) -> f64 {
        self.shift
    }

    fn shifted(&self, alpha: f64) -> Self {
        ConjugateLagrangian {
            shift: self.shift + alpha,
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lag(src: &str, d: usize) -> LagrangianModel {
        LagrangianModel::parse(src, d).unwrap()
    }

    #[test]
    fn quadratic_conjugate() {
        let opts = LegendreOptions::default();
        let h = legendre_transform(&lag("0.5*v1^2", 1), &[0.7], &[2.0], &opts).unwrap();
        assert!((h - 2.0).abs() < 1e-12);
    }

    #[test]
    fn conjugate_of_shifted_quadratic_matches_hamiltonian_shift() {
        let opts = LegendreOptions::default();
        let l = lag("0.5*v1^2 - x1*v1", 1);
        let h = legendre_transform(&l, &[1.0], &[3.0], &opts).unwrap();
        assert!((h - 2.0).abs() < 1e-12);
        let direct = HamiltonianModel::parse("0.5*p1^2", 1).unwrap().shifted(1.0);
        assert!((h - direct.value(&[1.0], &[3.0]).unwrap()).abs() < 1e-12);
        let via_shift = legendre_transform(&lag("0.5*v1^2", 1).shifted(1.0), &[1.0], &[3.0], &opts).unwrap();
        assert!((via_shift - 2.0).abs() < 1e-12);
    }

    #[test]
    fn quartic_against_brute_force() {
        // sup_v { v − ½v⁴ } on a 10⁶-point grid over [−2, 2].
        let opts = LegendreOptions::default();
        let h = legendre_transform(&lag("0.5*v1^4", 1), &[0.0], &[1.0], &opts).unwrap();
        let n = 1_000_000;
        let brute = (0..n)
            .map(|i| -2.0 + 4.0 * i as f64 / (n - 1) as f64)
            .map(|v: f64| v - 0.5 * v.powi(4))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((h - brute).abs() < 1e-6, "{h} vs {brute}");
        assert!(h >= brute - 1e-15);
    }

    #[test]
    fn sign_convention_is_visible_for_odd_lagrangians() {
        // L = ½v² + v: sup_v { pv − ½v² + v } = ½(p + 1)².
        let opts = LegendreOptions::default();
        let h = legendre_transform(&lag("0.5*v1^2 + v1", 1), &[0.0], &[2.0], &opts).unwrap();
        assert!((h - 4.5).abs() < 1e-12);
    }

    #[test]
    fn non_convex_lagrangian_is_rejected() {
        let opts = LegendreOptions::default();
        let err = legendre_transform(&lag("-0.5*v1^2", 1), &[0.0], &[1.0], &opts).unwrap_err();
        assert!(matches!(err, ModelError::NonConvex { .. }));
    }

    #[test]
    fn conjugate_hamiltonian_jet() {
        // L = ½v² + ½x² + xv  ⇒  H = ½(p + x)² − ½x².
        let h = ConjugateHamiltonian::new(lag("0.5*v1^2 + 0.5*x1^2 + x1*v1", 1), LegendreOptions::default());
        let reference = HamiltonianModel::parse("0.5*(p1 + x1)^2 - 0.5*x1^2", 1).unwrap();
        for &(x, p) in &[(0.0, 0.0), (1.5, -0.3), (-2.0, 4.0)] {
            let a = h.jet(&[x], &[p]).unwrap();
            let b = reference.jet(&[x], &[p]).unwrap();
            assert!((a.value - b.value).abs() < 1e-10);
            assert!((&a.dx - &b.dx).norm() < 1e-10);
            assert!((&a.dp - &b.dp).norm() < 1e-10);
            assert!((&a.xx - &b.xx).norm() < 1e-10);
            assert!((&a.xp - &b.xp).norm() < 1e-10);
            assert!((&a.pp - &b.pp).norm() < 1e-10);
        }
    }

    #[test]
    fn conjugate_lagrangian_inverts_the_transform() {
        let h = HamiltonianModel::parse("0.5*p1^2 + x1*p1 + 0.25*x1^2", 1).unwrap();
        let l = ConjugateLagrangian::new(h, LegendreOptions::default());
        for &(x, v) in &[(0.3, 1.0), (-1.0, -2.5)] {
            // L(x, w) = ½(w + x)² − ¼x² for this H.
            let expect = 0.5 * (v + x) * (v + x) - 0.25 * x * x;
            assert!((l.value(&[x], &[v]).unwrap() - expect).abs() < 1e-10);
            let j = l.jet(&[x], &[v]).unwrap();
            assert!((j.vv[(0, 0)] - 1.0).abs() < 1e-12);
            assert!((j.xv[(0, 0)] - 1.0).abs() < 1e-12);
            assert!((j.xx[(0, 0)] - 0.5).abs() < 1e-12);
        }
    }
}
