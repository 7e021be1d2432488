//! Models built from a [`ProblemSpec`]. A spec gives either `H` or `L`; the
//! other side comes from a numerical Legendre transform.

use canon_hjb::model::{
    CanonicalShift, ConjugateHamiltonian, ConjugateLagrangian, Hamiltonian, HamiltonianJet, HamiltonianModel,
    Lagrangian, LagrangianJet, LagrangianModel, LegendreOptions, ModelError, TerminalCost,
};

use crate::config::{Dynamics, ProblemSpec};

#[derive(Debug, Clone)]
pub enum AnyHamiltonian {
    Expr(HamiltonianModel),
    Legendre(ConjugateHamiltonian),
}

#[derive(Debug, Clone)]
pub enum AnyLagrangian {
    Expr(LagrangianModel),
    Legendre(ConjugateLagrangian),
}

macro_rules! delegate {
    ($self:ident, $inner:ident => $e:expr) => {
        match $self {
            Self::Expr($inner) => $e,
            Self::Legendre($inner) => $e,
        }
    };
}

impl Hamiltonian for AnyHamiltonian {
    fn dim(&self) -> usize {
        delegate!(self, h => h.dim())
    }

    fn value(&self, x: &[f64], p: &[f64]) -> Result<f64, ModelError> {
        delegate!(self, h => h.value(x, p))
    }

    fn jet(&self, x: &[f64], p: &[f64]) -> Result<HamiltonianJet, ModelError> {
        delegate!(self, h => h.jet(x, p))
    }

    fn value_dp(&self, x: &[f64], p: &[f64]) -> Result<(f64, Vec<f64>), ModelError> {
        delegate!(self, h => h.value_dp(x, p))
    }
}

impl CanonicalShift for AnyHamiltonian {
    fn shift(&self) -> f64 {
        delegate!(self, h => h.shift())
    }

    fn shifted(&self, alpha: f64) -> Self {
        match self {
            Self::Expr(h) => Self::Expr(h.shifted(alpha)),
            Self::Legendre(h) => Self::Legendre(h.shifted(alpha)),
        }
    }
}

impl Lagrangian for AnyLagrangian {
    fn dim(&self) -> usize {
        delegate!(self, l => l.dim())
    }

    fn value(&self, x: &[f64], v: &[f64]) -> Result<f64, ModelError> {
        delegate!(self, l => l.value(x, v))
    }

    fn jet(&self, x: &[f64], v: &[f64]) -> Result<LagrangianJet, ModelError> {
        delegate!(self, l => l.jet(x, v))
    }

    fn gradient(&self, x: &[f64], v: &[f64]) -> Result<(f64, Vec<f64>, Vec<f64>), ModelError> {
        delegate!(self, l => l.gradient(x, v))
    }
}

impl CanonicalShift for AnyLagrangian {
    fn shift(&self) -> f64 {
        delegate!(self, l => l.shift())
    }

    fn shifted(&self, alpha: f64) -> Self {
        match self {
            Self::Expr(l) => Self::Expr(l.shifted(alpha)),
            Self::Legendre(l) => Self::Legendre(l.shifted(alpha)),
        }
    }
}

pub struct Problem {
    pub hamiltonian: AnyHamiltonian,
    pub lagrangian: AnyLagrangian,
    pub terminal: TerminalCost,
}

impl Problem {
    pub fn build(spec: &ProblemSpec) -> Result<Problem, ModelError> {
        let d = spec.dimension;
        let radius = spec
            .vbox
            .lo
            .iter()
            .chain(&spec.vbox.hi)
            .chain(&spec.pbox.lo)
            .chain(&spec.pbox.hi)
            .fold(0.0f64, |m, v| m.max(v.abs()));
        let opts = LegendreOptions { search_radius: (2.0 * radius).max(20.0), ..LegendreOptions::default() };
        let (hamiltonian, lagrangian) = match &spec.dynamics {
            Dynamics::Hamiltonian(src) => {
                let h = HamiltonianModel::parse(src, d)?;
                (AnyHamiltonian::Expr(h.clone()), AnyLagrangian::Legendre(ConjugateLagrangian::new(h, opts)))
            }
            Dynamics::Lagrangian(src) => {
                let l = LagrangianModel::parse(src, d)?;
                (AnyHamiltonian::Legendre(ConjugateHamiltonian::new(l.clone(), opts)), AnyLagrangian::Expr(l))
            }
        };
        Ok(Problem { hamiltonian, lagrangian, terminal: TerminalCost::parse(&spec.terminal, d)? })
    }
}
