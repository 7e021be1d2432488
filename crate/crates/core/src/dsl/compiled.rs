use smallvec::SmallVec;
use thiserror::Error;

use super::ast::{BinOp, Expr, Func, Node};
use super::jet::{Domain, Jet2, Scalar, Taylor2};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("{domain} in `{subexpr}`")]
    Domain { subexpr: String, domain: Domain },
    #[error("expected {expected} inputs, got {got}")]
    Arity { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy)]
enum Op {
    Const(f64),
    Load(usize),
    Neg,
    Add,
    Sub,
    Mul,
    // The u32 payloads index `CompiledExpr::sources` for error reporting.
    Div(u32),
    Pow(i32, u32),
    Call(Func, u32),
}

/// An expression flattened to a postfix tape for fast repeated evaluation.
#[derive(Debug, Clone)]
pub struct CompiledExpr {
    expr: Expr,
    ops: Vec<Op>,
    sources: Vec<String>,
}

impl CompiledExpr {
    pub fn new(expr: Expr) -> Self {
        let mut ops = Vec::new();
        let mut sources = Vec::new();
        emit(&expr, &expr.root, &mut ops, &mut sources);
        CompiledExpr { expr, ops, sources }
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn arity(&self) -> usize {
        self.expr.arity()
    }

    fn run<S: Scalar>(&self, load: impl Fn(usize) -> S) -> Result<S, EvalError> {
        let mut stack: SmallVec<[S; 24]> = SmallVec::new();
        let fail = |idx: u32, domain: Domain| EvalError::Domain {
            subexpr: self.sources[idx as usize].clone(),
            domain,
        };
        for op in &self.ops {
            match *op {
                Op::Const(c) => stack.push(S::constant(c)),
                Op::Load(k) => stack.push(load(k)),
                Op::Neg => {
                    let a = stack.pop().expect("tape underflow");
                    stack.push(a.neg());
                }
                Op::Pow(n, src) => {
                    let a = stack.pop().expect("tape underflow");
                    stack.push(a.powi(n).map_err(|d| fail(src, d))?);
                }
                Op::Call(f, src) => {
                    let a = stack.pop().expect("tape underflow");
                    stack.push(a.call(f).map_err(|d| fail(src, d))?);
                }
                Op::Add | Op::Sub | Op::Mul | Op::Div(_) => {
                    let b = stack.pop().expect("tape underflow");
                    let a = stack.pop().expect("tape underflow");
                    stack.push(match *op {
                        Op::Add => a.add(b),
                        Op::Sub => a.sub(b),
                        Op::Mul => a.mul(b),
                        Op::Div(src) => a.div(b).map_err(|d| fail(src, d))?,
                        _ => unreachable!(),
                    });
                }
            }
        }
        debug_assert_eq!(stack.len(), 1);
        Ok(stack[0])
    }

    fn check_arity(&self, got: usize) -> Result<(), EvalError> {
        if got == self.arity() {
            Ok(())
        } else {
            Err(EvalError::Arity {
                expected: self.arity(),
                got,
            })
        }
    }

    pub fn eval(&self, point: &[f64]) -> Result<f64, EvalError> {
        self.check_arity(point.len())?;
        self.run(|k| point[k])
    }

    /// Second-order Taylor coefficients along `direction`.
    pub fn eval_directional(&self, point: &[f64], direction: &[f64]) -> Result<Taylor2, EvalError> {
        self.check_arity(point.len())?;
        self.check_arity(direction.len())?;
        self.run(|k| Taylor2::variable(point[k], direction[k]))
    }

    /// Value and a single partial derivative.
    pub fn eval_partial(&self, point: &[f64], slot: usize) -> Result<(f64, f64), EvalError> {
        self.check_arity(point.len())?;
        let t = self.run(|k| Taylor2::variable(point[k], if k == slot { 1.0 } else { 0.0 }))?;
        Ok((t.v, t.d1))
    }

    /// Exact value, gradient and Hessian, assembled from `n(n+1)/2`
    /// directional second-order jets: axis directions give the gradient and
    /// the diagonal, pairwise sums `e_i + e_j` give the off-diagonal entries
    /// by polarisation.
    pub fn jet(&self, point: &[f64]) -> Result<Jet2, EvalError> {
        self.check_arity(point.len())?;
        let n = point.len();
        let mut gradient = vec![0.0; n];
        let mut packed = vec![0.0; n * (n + 1) / 2];
        let mut value = 0.0;
        for i in 0..n {
            let t = self.run(|k| Taylor2::variable(point[k], (k == i) as u8 as f64))?;
            value = t.v;
            gradient[i] = t.d1;
            packed[Jet2::packed_index(n, i, i)] = t.d2;
        }
        if n == 0 {
            value = self.run(|_| Taylor2::constant(0.0))?.v;
        }
        for i in 0..n {
            for j in i + 1..n {
                let t = self.run(|k| Taylor2::variable(point[k], (k == i || k == j) as u8 as f64))?;
                let hii = packed[Jet2::packed_index(n, i, i)];
                let hjj = packed[Jet2::packed_index(n, j, j)];
                packed[Jet2::packed_index(n, i, j)] = 0.5 * (t.d2 - hii - hjj);
            }
        }
        Ok(Jet2::from_parts(value, gradient, packed))
    }
}

fn emit(expr: &Expr, node: &Node, ops: &mut Vec<Op>, sources: &mut Vec<String>) {
    fn source(sources: &mut Vec<String>, node: &Node) -> u32 {
        sources.push(node.to_string());
        (sources.len() - 1) as u32
    }
    match node {
        Node::Const(c) => ops.push(Op::Const(*c)),
        Node::Named(c) => ops.push(Op::Const(c.value())),
        Node::Var(v) => ops.push(Op::Load(expr.slot(*v))),
        Node::Neg(a) => {
            emit(expr, a, ops, sources);
            ops.push(Op::Neg);
        }
        Node::Pow(a, n) => {
            let src = source(sources, node);
            emit(expr, a, ops, sources);
            ops.push(Op::Pow(*n, src));
        }
        Node::Call(f, a) => {
            let src = source(sources, node);
            emit(expr, a, ops, sources);
            ops.push(Op::Call(*f, src));
        }
        Node::Binary(op, a, b) => {
            let src = matches!(op, BinOp::Div).then(|| source(sources, node));
            emit(expr, a, ops, sources);
            emit(expr, b, ops, sources);
            ops.push(match op {
                BinOp::Add => Op::Add,
                BinOp::Sub => Op::Sub,
                BinOp::Mul => Op::Mul,
                BinOp::Div => Op::Div(src.expect("division source recorded")),
            });
        }
    }
}

/// Evaluates value, gradient and Hessian of `expr` at `point`.
pub fn eval_jet2(expr: &Expr, point: &[f64]) -> Result<Jet2, EvalError> {
    CompiledExpr::new(expr.clone()).jet(point)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse_expression, Families};

    fn jet(src: &str, fam: Families, point: &[f64]) -> Jet2 {
        let e = parse_expression(src, 1, fam).unwrap();
        eval_jet2(&e, point).unwrap()
    }

    #[test]
    fn quadratic_in_p() {
        let e = parse_expression("0.5*p1^2", 1, Families::HAMILTONIAN).unwrap();
        let j = eval_jet2(&e, &[0.0, 3.0]).unwrap();
        assert_eq!(j.value, 4.5);
        assert_eq!(j.gradient[1], 3.0);
        assert_eq!(j.hessian(1, 1), 1.0);
    }

    #[test]
    fn bilinear_form() {
        let j = jet("x1*p1", Families::HAMILTONIAN, &[1.0, 2.0]);
        assert_eq!(j.value, 2.0);
        assert_eq!(j.gradient, vec![2.0, 1.0]);
        assert_eq!(j.hessian(0, 0), 0.0);
        assert_eq!(j.hessian(0, 1), 1.0);
        assert_eq!(j.hessian(1, 0), 1.0);
        assert_eq!(j.hessian(1, 1), 0.0);
    }

    #[test]
    fn cosine_taylor() {
        let j = jet("cos(x1)", Families::TERMINAL, &[0.0]);
        assert_eq!(j.value, 1.0);
        assert_eq!(j.gradient, vec![0.0]);
        assert_eq!(j.hessian(0, 0), -1.0);
    }

    #[test]
    fn domain_error_names_subexpression() {
        let e = parse_expression("x1 + log(x1 - 2)", 1, Families::TERMINAL).unwrap();
        let err = eval_jet2(&e, &[1.0]).unwrap_err();
        assert_eq!(
            err,
            EvalError::Domain {
                subexpr: "log(x1 - 2)".into(),
                domain: Domain::LogNonPositive
            }
        );
        let e = parse_expression("1/(x1 - 1)", 1, Families::TERMINAL).unwrap();
        assert!(matches!(
            CompiledExpr::new(e).eval(&[1.0]),
            Err(EvalError::Domain { domain: Domain::DivisionByZero, .. })
        ));
    }

    #[test]
    fn arity_is_checked() {
        let e = parse_expression("x1*p1", 1, Families::HAMILTONIAN).unwrap();
        assert_eq!(
            CompiledExpr::new(e).eval(&[1.0]),
            Err(EvalError::Arity { expected: 2, got: 1 })
        );
    }

    #[test]
    fn value_paths_agree() {
        let e = parse_expression("sinh(x1)*p2 - tanh(p1*x2)^3 + sqrt(2 + cos(x1))", 2, Families::HAMILTONIAN)
            .unwrap();
        let c = CompiledExpr::new(e);
        let pt = [0.3, -0.7, 1.1, 0.4];
        let v = c.eval(&pt).unwrap();
        let j = c.jet(&pt).unwrap();
        assert_eq!(v, j.value);
        let (v2, d) = c.eval_partial(&pt, 3).unwrap();
        assert_eq!(v2, v);
        assert_eq!(d, j.gradient[3]);
    }
}
