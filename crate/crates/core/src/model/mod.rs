//! Hamiltonians, Lagrangians and terminal costs, and the canonical shift
//! `(x, p) ↦ (x, p − αx)` acting on each of them:
//!
//! * `H_α(x, p) = H(x, p − αx)`
//! * `G_α(x) = G(x) + (α/2)|x|²`
//! * `L_α(x, v) = L(x, v) − α x·v`
//!
//! Shifts accumulate in a single scalar, so `shifted(α).shifted(β)` and
//! `shifted(α + β)` hold the same float and evaluate identically.

mod legendre;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use smallvec::SmallVec;
use thiserror::Error;

use crate::dsl::{parse_expression, CompiledExpr, EvalError, Expr, Families, ParseError};

pub use legendre::{
    legendre_transform, ConjugateHamiltonian, ConjugateLagrangian, LegendreOptions,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("expression declares the wrong variable families for a {0}")]
    WrongFamilies(&'static str),
    #[error("expected {expected}-dimensional input, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("objective is not convex in the inner variable near {point:?} (curvature {curvature:e})")]
    NonConvex { point: Vec<f64>, curvature: f64 },
    #[error("Newton iteration did not converge from {start:?} (gradient norm {residual:e})")]
    NoConvergence { start: Vec<f64>, residual: f64 },
}

type Buf = SmallVec<[f64; 8]>;

fn check_dim(expected: usize, got: usize) -> Result<(), ModelError> {
    if expected == got {
        Ok(())
    } else {
        Err(ModelError::Dimension { expected, got })
    }
}

/// Value, gradient and Hessian blocks of a Hamiltonian at `(x, p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianJet {
    pub value: f64,
    pub dx: DVector<f64>,
    pub dp: DVector<f64>,
    pub xx: DMatrix<f64>,
    /// `xp[(i, j)] = ∂²H / ∂xᵢ∂pⱼ`.
    pub xp: DMatrix<f64>,
    pub pp: DMatrix<f64>,
}

/// The three second-derivative blocks of a Hamiltonian.
#[derive(Debug, Clone, PartialEq)]
pub struct HessianBlocks {
    pub xx: DMatrix<f64>,
    pub xp: DMatrix<f64>,
    pub pp: DMatrix<f64>,
}

impl HamiltonianJet {
    pub fn blocks(&self) -> HessianBlocks {
        HessianBlocks {
            xx: self.xx.clone(),
            xp: self.xp.clone(),
            pp: self.pp.clone(),
        }
    }
}

/// Value, gradient and joint Hessian blocks of a Lagrangian at `(x, v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangianJet {
    pub value: f64,
    pub dx: DVector<f64>,
    pub dv: DVector<f64>,
    pub xx: DMatrix<f64>,
    /// `xv[(i, j)] = ∂²L / ∂xᵢ∂vⱼ`.
    pub xv: DMatrix<f64>,
    pub vv: DMatrix<f64>,
}

impl LagrangianJet {
    /// The full `2d × 2d` Hessian in `(x, v)` ordering.
    pub fn joint_hessian(&self) -> DMatrix<f64> {
        let d = self.dx.len();
        let mut m = DMatrix::zeros(2 * d, 2 * d);
        m.view_mut((0, 0), (d, d)).copy_from(&self.xx);
        m.view_mut((0, d), (d, d)).copy_from(&self.xv);
        m.view_mut((d, 0), (d, d)).copy_from(&self.xv.transpose());
        m.view_mut((d, d), (d, d)).copy_from(&self.vv);
        m
    }
}

pub trait Hamiltonian: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64], p: &[f64]) -> Result<f64, ModelError>;

    fn jet(&self, x: &[f64], p: &[f64]) -> Result<HamiltonianJet, ModelError>;

    /// Value together with `∂ₚH`; the hot path of the grid solver.
    fn value_dp(&self, x: &[f64], p: &[f64]) -> Result<(f64, Vec<f64>), ModelError> {
        let j = self.jet(x, p)?;
        Ok((j.value, j.dp.iter().copied().collect()))
    }

    fn hessian_blocks(&self, x: &[f64], p: &[f64]) -> Result<HessianBlocks, ModelError> {
        Ok(self.jet(x, p)?.blocks())
    }
}

pub trait Lagrangian: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64], v: &[f64]) -> Result<f64, ModelError>;

    fn jet(&self, x: &[f64], v: &[f64]) -> Result<LagrangianJet, ModelError>;

    /// Value and the two partial gradients.
    fn gradient(&self, x: &[f64], v: &[f64]) -> Result<(f64, Vec<f64>, Vec<f64>), ModelError> {
        let j = self.jet(x, v)?;
        Ok((
            j.value,
            j.dx.iter().copied().collect(),
            j.dv.iter().copied().collect(),
        ))
    }
}

/// Objects the canonical shift acts on.
pub trait CanonicalShift: Sized {
    /// Accumulated shift.
    fn shift(&self) -> f64;
    fn shifted(&self, alpha: f64) -> Self;
}

fn split_jet(j: &crate::dsl::Jet2, d: usize) -> (f64, DVector<f64>, DVector<f64>, [DMatrix<f64>; 3]) {
    let a = DVector::from_fn(d, |i, _| j.gradient[i]);
    let b = DVector::from_fn(d, |i, _| j.gradient[d + i]);
    let aa = DMatrix::from_fn(d, d, |i, k| j.hessian(i, k));
    let ab = DMatrix::from_fn(d, d, |i, k| j.hessian(i, d + k));
    let bb = DMatrix::from_fn(d, d, |i, k| j.hessian(d + i, d + k));
    (j.value, a, b, [aa, ab, bb])
}

/// A Hamiltonian given by an expression in `(x, p)`.
#[derive(Debug, Clone)]
pub struct HamiltonianModel {
    base: Arc<CompiledExpr>,
    shift: f64,
}

impl HamiltonianModel {
    pub fn new(expr: Expr) -> Result<Self, ModelError> {
        if expr.families != Families::HAMILTONIAN {
            return Err(ModelError::WrongFamilies("Hamiltonian"));
        }
        Ok(HamiltonianModel {
            base: Arc::new(CompiledExpr::new(expr)),
            shift: 0.0,
        })
    }

    pub fn parse(src: &str, dim: usize) -> Result<Self, ModelError> {
        Self::new(parse_expression(src, dim, Families::HAMILTONIAN)?)
    }

    pub fn expr(&self) -> &Expr {
        self.base.expr()
    }

    /// `(x, p − αx)` packed as the base expression's input.
    fn base_point(&self, x: &[f64], p: &[f64]) -> Result<Buf, ModelError> {
        let d = self.dim();
        check_dim(d, x.len())?;
        check_dim(d, p.len())?;
        let mut pt = Buf::with_capacity(2 * d);
        pt.extend_from_slice(x);
        pt.extend(p.iter().zip(x).map(|(pi, xi)| pi - self.shift * xi));
        Ok(pt)
    }
}

impl Hamiltonian for HamiltonianModel {
    fn dim(&self) -> usize {
        self.base.expr().dim
    }

    fn value(&self, x: &[f64], p: &[f64]) -> Result<f64, ModelError> {
        Ok(self.base.eval(&self.base_point(x, p)?)?)
    }

    fn value_dp(&self, x: &[f64], p: &[f64]) -> Result<(f64, Vec<f64>), ModelError> {
        let pt = self.base_point(x, p)?;
        let d = self.dim();
        let mut value = 0.0;
        let mut dp = Vec::with_capacity(d);
        for k in 0..d {
            let (v, g) = self.base.eval_partial(&pt, d + k)?;
            value = v;
            dp.push(g);
        }
        Ok((value, dp))
    }

    fn jet(&self, x: &[f64], p: &[f64]) -> Result<HamiltonianJet, ModelError> {
        let jet = self.base.jet(&self.base_point(x, p)?)?;
        let (value, dx, dp, [xx, xp, pp]) = split_jet(&jet, self.dim());
        let base = HamiltonianJet { value, dx, dp, xx, xp, pp };
        Ok(apply_shift(base, self.shift))
    }
}

/// Maps a jet of `H` taken at `(x, p − αx)` to the jet of `H_α` at `(x, p)`:
/// `∂ₓₓH_α = ∂ₓₓH − 2α Sym ∂ₓₚH + α² ∂ₚₚH`, `∂ₓₚH_α = ∂ₓₚH − α ∂ₚₚH`,
/// `∂ₚₚH_α = ∂ₚₚH`, `∂ₓH_α = ∂ₓH − α ∂ₚH`.
pub(crate) fn apply_shift(j: HamiltonianJet, a: f64) -> HamiltonianJet {
    if a == 0.0 {
        return j;
    }
    let xx = &j.xx - (&j.xp + j.xp.transpose()) * a + &j.pp * (a * a);
    let xp = &j.xp - &j.pp * a;
    HamiltonianJet {
        value: j.value,
        dx: &j.dx - &j.dp * a,
        dp: j.dp,
        xx,
        xp,
        pp: j.pp,
    }
}

impl CanonicalShift for HamiltonianModel {
    fn shift(&self) -> f64 {
        self.shift
    }

    fn shifted(&self, alpha: f64) -> Self {
        HamiltonianModel {
            base: Arc::clone(&self.base),
            shift: self.shift + alpha,
        }
    }
}

/// Shifts a Hamiltonian: `H_α(x, p) = H(x, p − αx)`.
pub fn shift_hamiltonian(h: &HamiltonianModel, alpha: f64) -> HamiltonianModel {
    h.shifted(alpha)
}

/// Terminal cost `G(x) + (α/2)|x|²`.
#[derive(Debug, Clone)]
pub struct TerminalCost {
    base: Arc<CompiledExpr>,
    shift: f64,
}

impl TerminalCost {
    pub fn new(expr: Expr) -> Result<Self, ModelError> {
        if expr.families != Families::TERMINAL {
            return Err(ModelError::WrongFamilies("terminal cost"));
        }
        Ok(TerminalCost {
            base: Arc::new(CompiledExpr::new(expr)),
            shift: 0.0,
        })
    }

    pub fn parse(src: &str, dim: usize) -> Result<Self, ModelError> {
        Self::new(parse_expression(src, dim, Families::TERMINAL)?)
    }

    pub fn expr(&self) -> &Expr {
        self.base.expr()
    }

    pub fn dim(&self) -> usize {
        self.base.expr().dim
    }

    fn half_square(x: &[f64]) -> f64 {
        0.5 * x.iter().map(|a| a * a).sum::<f64>()
    }

    pub fn value(&self, x: &[f64]) -> Result<f64, ModelError> {
        check_dim(self.dim(), x.len())?;
        Ok(self.base.eval(x)? + self.shift * Self::half_square(x))
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        check_dim(self.dim(), x.len())?;
        let d = self.dim();
        let mut g = Vec::with_capacity(d);
        for k in 0..d {
            g.push(self.base.eval_partial(x, k)?.1 + self.shift * x[k]);
        }
        Ok(g)
    }

    pub fn hessian(&self, x: &[f64]) -> Result<DMatrix<f64>, ModelError> {
        Ok(self.jet(x)?.2)
    }

    /// Value, gradient and Hessian.
    pub fn jet(&self, x: &[f64]) -> Result<(f64, DVector<f64>, DMatrix<f64>), ModelError> {
        check_dim(self.dim(), x.len())?;
        let j = self.base.jet(x)?;
        let d = self.dim();
        let a = self.shift;
        let value = j.value + a * Self::half_square(x);
        let grad = DVector::from_fn(d, |i, _| j.gradient[i] + a * x[i]);
        let hess = DMatrix::from_fn(d, d, |i, k| j.hessian(i, k) + if i == k { a } else { 0.0 });
        Ok((value, grad, hess))
    }
}

impl CanonicalShift for TerminalCost {
    fn shift(&self) -> f64 {
        self.shift
    }

    fn shifted(&self, alpha: f64) -> Self {
        TerminalCost {
            base: Arc::clone(&self.base),
            shift: self.shift + alpha,
        }
    }
}

pub fn shift_terminal(g: &TerminalCost, alpha: f64) -> TerminalCost {
    g.shifted(alpha)
}

/// Lagrangian `L(x, v) − α x·v` given by an expression in `(x, v)`.
#[derive(Debug, Clone)]
pub struct LagrangianModel {
    base: Arc<CompiledExpr>,
    shift: f64,
}

impl LagrangianModel {
    pub fn new(expr: Expr) -> Result<Self, ModelError> {
        if expr.families != Families::LAGRANGIAN {
            return Err(ModelError::WrongFamilies("Lagrangian"));
        }
        Ok(LagrangianModel {
            base: Arc::new(CompiledExpr::new(expr)),
            shift: 0.0,
        })
    }

    pub fn parse(src: &str, dim: usize) -> Result<Self, ModelError> {
        Self::new(parse_expression(src, dim, Families::LAGRANGIAN)?)
    }

    pub fn expr(&self) -> &Expr {
        self.base.expr()
    }

    fn point(&self, x: &[f64], v: &[f64]) -> Result<Buf, ModelError> {
        check_dim(self.dim(), x.len())?;
        check_dim(self.dim(), v.len())?;
        let mut pt = Buf::with_capacity(2 * x.len());
        pt.extend_from_slice(x);
        pt.extend_from_slice(v);
        Ok(pt)
    }
}

impl Lagrangian for LagrangianModel {
    fn dim(&self) -> usize {
        self.base.expr().dim
    }

    fn value(&self, x: &[f64], v: &[f64]) -> Result<f64, ModelError> {
        let base = self.base.eval(&self.point(x, v)?)?;
        Ok(base - self.shift * crate::linalg::dot(x, v))
    }

    fn jet(&self, x: &[f64], v: &[f64]) -> Result<LagrangianJet, ModelError> {
        let j = self.base.jet(&self.point(x, v)?)?;
        let d = self.dim();
        let (value, lx, lv, [lxx, lxv, lvv]) = split_jet(&j, d);
        let a = self.shift;
        let xs = DVector::from_column_slice(x);
        let vs = DVector::from_column_slice(v);
        Ok(LagrangianJet {
            value: value - a * xs.dot(&vs),
            dx: lx - &vs * a,
            dv: lv - &xs * a,
            xx: lxx,
            xv: lxv - DMatrix::identity(d, d) * a,
            vv: lvv,
        })
    }
}

impl CanonicalShift for LagrangianModel {
    fn shift(&self) -> f64 {
        self.shift
    }

    fn shifted(&self, alpha: f64) -> Self {
        LagrangianModel {
            base: Arc::clone(&self.base),
            shift: self.shift + alpha,
        }
    }
}

pub fn shift_lagrangian(l: &LagrangianModel, alpha: f64) -> LagrangianModel {
    l.shifted(alpha)
}

/// Hessian blocks `(∂ₓₓH, ∂ₓₚH, ∂ₚₚH)` at `(x, p)`.
pub fn hessian_blocks<H: Hamiltonian + ?Sized>(
    h: &H,
    x: &[f64],
    p: &[f64],
) -> Result<HessianBlocks, ModelError> {
    h.hessian_blocks(x, p)
}
