use std::fmt;

/// Variable family. Hamiltonians live in `(x, p)`, Lagrangians in `(x, v)`
/// and terminal costs in `x` alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    X,
    P,
    V,
}

impl Family {
    pub fn letter(self) -> char {
        match self {
            Family::X => 'x',
            Family::P => 'p',
            Family::V => 'v',
        }
    }

    fn from_letter(c: char) -> Option<Family> {
        match c {
            'x' => Some(Family::X),
            'p' => Some(Family::P),
            'v' => Some(Family::V),
            _ => None,
        }
    }
}

/// The set of variable families an expression may use, in slot order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Families {
    pub x: bool,
    pub p: bool,
    pub v: bool,
}

impl Families {
    pub const HAMILTONIAN: Families = Families { x: true, p: true, v: false };
    pub const LAGRANGIAN: Families = Families { x: true, p: false, v: true };
    pub const TERMINAL: Families = Families { x: true, p: false, v: false };

    pub fn contains(self, f: Family) -> bool {
        match f {
            Family::X => self.x,
            Family::P => self.p,
            Family::V => self.v,
        }
    }

    pub fn count(self) -> usize {
        self.x as usize + self.p as usize + self.v as usize
    }

    /// Position of a family's block in the flattened input vector.
    pub fn block(self, f: Family) -> Option<usize> {
        if !self.contains(f) {
            return None;
        }
        let order = [(Family::X, self.x), (Family::P, self.p), (Family::V, self.v)];
        Some(
            order
                .iter()
                .take_while(|(g, _)| *g != f)
                .filter(|(_, on)| *on)
                .count(),
        )
    }
}

/// A variable reference; `index` is zero-based (`x1` has index 0).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var {
    pub family: Family,
    pub index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => " + ",
            BinOp::Sub => " - ",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Sinh,
    Cosh,
    Tanh,
}

impl Func {
    pub const ALL: [Func; 9] = [
        Func::Sin,
        Func::Cos,
        Func::Tan,
        Func::Exp,
        Func::Log,
        Func::Sqrt,
        Func::Sinh,
        Func::Cosh,
        Func::Tanh,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Tanh => "tanh",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NamedConst {
    Pi,
    E,
}

impl NamedConst {
    pub fn value(self) -> f64 {
        match self {
            NamedConst::Pi => std::f64::consts::PI,
            NamedConst::E => std::f64::consts::E,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    Named(NamedConst),
    Var(Var),
    Neg(Box<Node>),
    Binary(BinOp, Box<Node>, Box<Node>),
    /// Integer power; the exponent is always a literal.
    Pow(Box<Node>, i32),
    Call(Func, Box<Node>),
}

const PREC_NEG: u8 = 3;
const PREC_POW: u8 = 4;
const PREC_ATOM: u8 = 5;

impl Node {
    fn precedence(&self) -> u8 {
        match self {
            Node::Binary(op, _, _) => op.precedence(),
            Node::Neg(_) => PREC_NEG,
            Node::Const(c) if c.is_sign_negative() => PREC_NEG,
            Node::Pow(_, _) => PREC_POW,
            _ => PREC_ATOM,
        }
    }

    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Node)) {
        f(self);
        match self {
            Node::Neg(a) | Node::Pow(a, _) | Node::Call(_, a) => a.walk(f),
            Node::Binary(_, a, b) => {
                a.walk(f);
                b.walk(f);
            }
            Node::Const(_) | Node::Named(_) | Node::Var(_) => {}
        }
    }

    fn write_child(&self, out: &mut fmt::Formatter<'_>, paren: bool) -> fmt::Result {
        if paren {
            write!(out, "({self})")
        } else {
            write!(out, "{self}")
        }
    }
}

pub(crate) fn format_number(c: f64) -> String {
    let a = c.abs();
    if a != 0.0 && !(1e-5..1e16).contains(&a) {
        format!("{c:e}")
    } else {
        format!("{c}")
    }
}

impl fmt::Display for Node {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Const(c) => out.write_str(&format_number(*c)),
            Node::Named(NamedConst::Pi) => out.write_str("pi"),
            Node::Named(NamedConst::E) => out.write_str("e"),
            Node::Var(v) => write!(out, "{}{}", v.family.letter(), v.index + 1),
            Node::Neg(a) => {
                out.write_str("-")?;
                a.write_child(out, a.precedence() < PREC_NEG)
            }
            Node::Binary(op, a, b) => {
                let prec = op.precedence();
                a.write_child(out, a.precedence() < prec)?;
                out.write_str(op.symbol())?;
                b.write_child(out, b.precedence() <= prec)
            }
            Node::Pow(a, n) => {
                a.write_child(out, a.precedence() < PREC_ATOM)?;
                write!(out, "^{n}")
            }
            Node::Call(func, a) => write!(out, "{}({a})", func.name()),
        }
    }
}

/// A parsed scalar field over `dim`-dimensional variable families.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub root: Node,
    pub dim: usize,
    pub families: Families,
}

impl Expr {
    /// Total number of scalar inputs (`dim` per declared family).
    pub fn arity(&self) -> usize {
        self.dim * self.families.count()
    }

    /// Flattened input slot of a variable.
    pub fn slot(&self, var: Var) -> usize {
        let block = self
            .families
            .block(var.family)
            .expect("variable family validated at parse time");
        block * self.dim + var.index
    }

    pub fn uses(&self, family: Family) -> bool {
        let mut found = false;
        self.root.walk(&mut |n| {
            if let Node::Var(v) = n {
                found |= v.family == family;
            }
        });
        found
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt(f)
    }
}

/// Splits an identifier like `p12` into its family and zero-based index.
pub(crate) fn split_variable(name: &str) -> Option<(Family, Option<usize>)> {
    let mut chars = name.chars();
    let family = Family::from_letter(chars.next()?)?;
    let digits = chars.as_str();
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let index = digits.parse::<usize>().ok().and_then(|i| i.checked_sub(1));
    Some((family, index))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_order_skips_absent_families() {
        assert_eq!(Families::LAGRANGIAN.block(Family::V), Some(1));
        assert_eq!(Families::HAMILTONIAN.block(Family::P), Some(1));
        assert_eq!(Families::TERMINAL.block(Family::P), None);
    }

    #[test]
    fn variable_names() {
        assert_eq!(split_variable("x1"), Some((Family::X, Some(0))));
        assert_eq!(split_variable("p0"), Some((Family::P, None)));
        assert_eq!(split_variable("q1"), None);
        assert_eq!(split_variable("x"), None);
    }
}
