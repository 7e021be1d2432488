//! Scalar-field expression language with exact second derivatives.

mod ast;
mod compiled;
mod jet;
mod parser;

pub use ast::{BinOp, Expr, Families, Family, Func, NamedConst, Node, Var};
pub use compiled::{eval_jet2, CompiledExpr, EvalError};
pub use jet::{Domain, Jet2, Scalar, Taylor2};
pub use parser::{parse_expression, ParseError};
