//! Function and set descriptions: grammar, evaluation over the extended
//! reals, forward-mode gradients and piecewise-affine lowering.

pub mod ast;
mod eval;
mod func;
pub mod pa;
mod parse;
mod set;

pub use ast::{Expr, ExprKind, Span};
pub use eval::{EvalOutcome, GradResult};
pub use func::{FuncDesc, FuncKind, FuncMeta};
pub use parse::{directives, parse_constraints, parse_expr, Directives, Relation};
pub use set::{Constraint, DistanceResult, Projector, SetDesc, SetKind};

/// Parses a scalar function over `R^n`.
pub fn parse_function(source: &str) -> crate::Result<FuncDesc> {
    FuncDesc::parse(source)
}

/// Parses a constraint set.
pub fn parse_set(source: &str, dim: Option<usize>) -> crate::Result<SetDesc> {
    SetDesc::parse(source, dim)
}
