//! Truncated second-order Taylor arithmetic.

use std::fmt;

use super::ast::Func;

/// Value, first and second derivative of a scalar along one line through the
/// evaluation point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Taylor2 {
    pub v: f64,
    pub d1: f64,
    pub d2: f64,
}

/// Why an elementary operation could not be applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    LogNonPositive,
    SqrtNegative,
    SqrtAtZero,
    DivisionByZero,
    TanPole,
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Domain::LogNonPositive => "log of a non-positive number",
            Domain::SqrtNegative => "sqrt of a negative number",
            Domain::SqrtAtZero => "sqrt is not differentiable at 0",
            Domain::DivisionByZero => "division by zero",
            Domain::TanPole => "tan evaluated at a pole",
        })
    }
}

/// Number types the expression tape can be evaluated over.
pub trait Scalar: Copy + Send + Sync {
    fn constant(c: f64) -> Self;
    fn value(self) -> f64;
    fn add(self, o: Self) -> Self;
    fn sub(self, o: Self) -> Self;
    fn mul(self, o: Self) -> Self;
    fn neg(self) -> Self;
    fn div(self, o: Self) -> Result<Self, Domain>;
    fn powi(self, n: i32) -> Result<Self, Domain>;
    fn call(self, f: Func) -> Result<Self, Domain>;
}

fn check_arg(f: Func, a: f64) -> Result<(), Domain> {
    match f {
        Func::Log if a <= 0.0 => Err(Domain::LogNonPositive),
        Func::Sqrt if a < 0.0 => Err(Domain::SqrtNegative),
        Func::Tan if a.cos() == 0.0 => Err(Domain::TanPole),
        _ => Ok(()),
    }
}

impl Scalar for f64 {
    #[inline]
    fn constant(c: f64) -> Self {
        c
    }
    #[inline]
    fn value(self) -> f64 {
        self
    }
    #[inline]
    fn add(self, o: Self) -> Self {
        self + o
    }
    #[inline]
    fn sub(self, o: Self) -> Self {
        self - o
    }
    #[inline]
    fn mul(self, o: Self) -> Self {
        self * o
    }
    #[inline]
    fn neg(self) -> Self {
        -self
    }
    #[inline]
    fn div(self, o: Self) -> Result<Self, Domain> {
        if o == 0.0 {
            Err(Domain::DivisionByZero)
        } else {
            Ok(self / o)
        }
    }
    #[inline]
    fn powi(self, n: i32) -> Result<Self, Domain> {
        if n < 0 && self == 0.0 {
            Err(Domain::DivisionByZero)
        } else {
            Ok(self.powi(n))
        }
    }
    #[inline]
    fn call(self, f: Func) -> Result<Self, Domain> {
        check_arg(f, self)?;
        Ok(match f {
            Func::Sin => self.sin(),
            Func::Cos => self.cos(),
            Func::Tan => self.tan(),
            Func::Exp => self.exp(),
            Func::Log => self.ln(),
            Func::Sqrt => self.sqrt(),
            Func::Sinh => self.sinh(),
            Func::Cosh => self.cosh(),
            Func::Tanh => self.tanh(),
        })
    }
}

impl Taylor2 {
    pub fn constant(v: f64) -> Self {
        Taylor2 { v, d1: 0.0, d2: 0.0 }
    }

    pub fn variable(v: f64, direction: f64) -> Self {
        Taylor2 {
            v,
            d1: direction,
            d2: 0.0,
        }
    }

    /// Composes with a scalar function given its value and first two
    /// derivatives at `self.v`.
    #[inline]
    fn chain(self, f0: f64, f1: f64, f2: f64) -> Self {
        Taylor2 {
            v: f0,
            d1: f1 * self.d1,
            d2: f2 * self.d1 * self.d1 + f1 * self.d2,
        }
    }
}

impl Scalar for Taylor2 {
    fn constant(c: f64) -> Self {
        Taylor2::constant(c)
    }

    fn value(self) -> f64 {
        self.v
    }

    #[inline]
    fn add(self, o: Self) -> Self {
        Taylor2 {
            v: self.v + o.v,
            d1: self.d1 + o.d1,
            d2: self.d2 + o.d2,
        }
    }

    #[inline]
    fn sub(self, o: Self) -> Self {
        Taylor2 {
            v: self.v - o.v,
            d1: self.d1 - o.d1,
            d2: self.d2 - o.d2,
        }
    }

    #[inline]
    fn mul(self, o: Self) -> Self {
        Taylor2 {
            v: self.v * o.v,
            d1: self.d1 * o.v + self.v * o.d1,
            d2: self.d2 * o.v + 2.0 * self.d1 * o.d1 + self.v * o.d2,
        }
    }

    #[inline]
    fn neg(self) -> Self {
        Taylor2 {
            v: -self.v,
            d1: -self.d1,
            d2: -self.d2,
        }
    }

    fn div(self, o: Self) -> Result<Self, Domain> {
        if o.v == 0.0 {
            return Err(Domain::DivisionByZero);
        }
        let v = self.v / o.v;
        let d1 = (self.d1 - v * o.d1) / o.v;
        let d2 = (self.d2 - 2.0 * d1 * o.d1 - v * o.d2) / o.v;
        Ok(Taylor2 { v, d1, d2 })
    }

    fn powi(self, n: i32) -> Result<Self, Domain> {
        let a = self.v;
        match n {
            0 => Ok(Taylor2::constant(1.0)),
            1 => Ok(self),
            _ if n < 0 && a == 0.0 => Err(Domain::DivisionByZero),
            _ => {
                let nf = n as f64;
                Ok(self.chain(
                    a.powi(n),
                    nf * a.powi(n - 1),
                    nf * (nf - 1.0) * a.powi(n - 2),
                ))
            }
        }
    }

    fn call(self, f: Func) -> Result<Self, Domain> {
        let a = self.v;
        check_arg(f, a)?;
        Ok(match f {
            Func::Sin => {
                let (s, c) = a.sin_cos();
                self.chain(s, c, -s)
            }
            Func::Cos => {
                let (s, c) = a.sin_cos();
                self.chain(c, -s, -c)
            }
            Func::Tan => {
                let t = a.tan();
                let sec2 = 1.0 + t * t;
                self.chain(t, sec2, 2.0 * t * sec2)
            }
            Func::Exp => {
                let e = a.exp();
                self.chain(e, e, e)
            }
            Func::Log => self.chain(a.ln(), 1.0 / a, -1.0 / (a * a)),
            Func::Sqrt => {
                if a == 0.0 {
                    return Err(Domain::SqrtAtZero);
                }
                let r = a.sqrt();
                self.chain(r, 0.5 / r, -0.25 / (r * a))
            }
            Func::Sinh => {
                let (s, c) = (a.sinh(), a.cosh());
                self.chain(s, c, s)
            }
            Func::Cosh => {
                let (s, c) = (a.sinh(), a.cosh());
                self.chain(c, s, c)
            }
            Func::Tanh => {
                let t = a.tanh();
                let s2 = 1.0 - t * t;
                self.chain(t, s2, -2.0 * t * s2)
            }
        })
    }
}

/// Value, gradient and Hessian of a scalar field at a point.
///
/// The Hessian is stored as its packed upper triangle, so `hessian(i, j)` and
/// `hessian(j, i)` read the same memory.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet2 {
    pub value: f64,
    pub gradient: Vec<f64>,
    packed: Vec<f64>,
}

impl Jet2 {
    pub(crate) fn from_parts(value: f64, gradient: Vec<f64>, packed: Vec<f64>) -> Self {
        debug_assert_eq!(packed.len(), gradient.len() * (gradient.len() + 1) / 2);
        Jet2 {
            value,
            gradient,
            packed,
        }
    }

    pub fn len(&self) -> usize {
        self.gradient.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gradient.is_empty()
    }

    #[inline]
    pub(crate) fn packed_index(n: usize, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        i * n - i * (i + 1) / 2 + j
    }

    pub fn hessian(&self, i: usize, j: usize) -> f64 {
        self.packed[Self::packed_index(self.len(), i, j)]
    }

    pub fn hessian_matrix(&self) -> nalgebra::DMatrix<f64> {
        let n = self.len();
        nalgebra::DMatrix::from_fn(n, n, |i, j| self.hessian(i, j))
    }
}
