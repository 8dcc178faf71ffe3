//! Extended-real evaluation and forward-mode gradients.

use serde::{Deserialize, Serialize};

use super::ast::{CmpOp, Cond, Expr, ExprKind, Func};
use crate::error::{Error, Result};
use crate::ext_real::{ExtendedReal, NegInf, PosInf};
use crate::linalg::Vector;

/// Value plus a flag raised when a finite computation left the `f64` range
/// (as opposed to a genuine infinity such as `log(0)`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalOutcome {
    pub value: ExtendedReal,
    pub overflow: bool,
}

fn fin(v: f64, overflow: &mut bool) -> ExtendedReal {
    if v.is_finite() {
        ExtendedReal::Finite(v)
    } else {
        *overflow = true;
        ExtendedReal::from_f64(v).unwrap_or(PosInf)
    }
}

fn eval_err(e: &Expr, message: &str) -> Error {
    Error::Eval {
        subexpr: e.to_string(),
        message: message.into(),
    }
}

pub(crate) fn eval_expr(e: &Expr, x: &[f64], of: &mut bool) -> Result<ExtendedReal> {
    use ExtendedReal::Finite;
    Ok(match &e.kind {
        ExprKind::Num(c) => Finite(*c),
        ExprKind::Var(i) => Finite(x[*i]),
        ExprKind::Neg(a) => -eval_expr(a, x, of)?,
        ExprKind::Add(a, b) => {
            match (eval_expr(a, x, of)?, eval_expr(b, x, of)?) {
                (Finite(p), Finite(q)) => fin(p + q, of),
                (p, q) => p + q,
            }
        }
        ExprKind::Sub(a, b) => {
            match (eval_expr(a, x, of)?, eval_expr(b, x, of)?) {
                (Finite(p), Finite(q)) => fin(p - q, of),
                (p, q) => p - q,
            }
        }
        ExprKind::Mul(a, b) => {
            match (eval_expr(a, x, of)?, eval_expr(b, x, of)?) {
                (Finite(p), Finite(q)) => fin(p * q, of),
                (p, q) => p.mul(q).map_err(|_| eval_err(e, "0·(±∞) is undefined"))?,
            }
        }
        ExprKind::Div(a, b) => {
            let p = eval_expr(a, x, of)?;
            let q = eval_expr(b, x, of)?;
            match (p, q) {
                (Finite(p), Finite(q)) if q != 0.0 => fin(p / q, of),
                (Finite(p), Finite(_)) => {
                    if p < 0.0 {
                        NegInf
                    } else {
                        PosInf
                    }
                }
                (p, Finite(q)) if q != 0.0 => p.scale(1.0 / q)?,
                (_, Finite(_)) => PosInf,
                (Finite(_), _) => Finite(0.0),
                _ => return Err(eval_err(e, "(±∞)/(±∞) is undefined")),
            }
        }
        ExprKind::Pow(a, k) => {
            let p = eval_expr(a, x, of)?;
            let k = *k;
            match p {
                _ if k == 0 => Finite(1.0),
                Finite(b) if b == 0.0 && k < 0 => PosInf,
                Finite(b) => fin(b.powi(k), of),
                _ if k < 0 => Finite(0.0),
                PosInf => PosInf,
                NegInf => {
                    if k % 2 == 0 {
                        PosInf
                    } else {
                        NegInf
                    }
                }
            }
        }
        ExprKind::Call(g, a) => {
            let p = eval_expr(a, x, of)?;
            match (g, p) {
                (Func::Exp, Finite(v)) => fin(v.exp(), of),
                (Func::Exp, PosInf) => PosInf,
                (Func::Exp, NegInf) => Finite(0.0),
                (Func::Log, Finite(v)) if v > 0.0 => Finite(v.ln()),
                (Func::Log, Finite(v)) if v == 0.0 => NegInf,
                (Func::Log, _) => PosInf,
                (Func::Abs, Finite(v)) => Finite(v.abs()),
                (Func::Abs, _) => PosInf,
                (Func::Sqrt, Finite(v)) if v >= 0.0 => Finite(v.sqrt()),
                (Func::Sqrt, _) => PosInf,
                (Func::Sin, Finite(v)) => Finite(v.sin()),
                (Func::Cos, Finite(v)) => Finite(v.cos()),
                (Func::Sin | Func::Cos, _) => {
                    return Err(eval_err(e, "trigonometric function of ±∞"))
                }
            }
        }
        ExprKind::Piecewise {
            branches,
            otherwise,
        } => {
            for (c, body) in branches {
                if cond_holds(c, x, of)? {
                    return eval_expr(body, x, of);
                }
            }
            eval_expr(otherwise, x, of)?
        }
    })
}

fn cmp(op: CmpOp, l: ExtendedReal, r: ExtendedReal) -> bool {
    match op {
        CmpOp::Le => l <= r,
        CmpOp::Lt => l < r,
        CmpOp::Ge => l >= r,
        CmpOp::Gt => l > r,
    }
}

fn cond_holds(c: &Cond, x: &[f64], of: &mut bool) -> Result<bool> {
    for at in &c.atoms {
        let l = eval_expr(&at.lhs, x, of)?;
        let r = eval_expr(&at.rhs, x, of)?;
        if !cmp(at.op, l, r) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Forward-mode derivative result at a point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradResult {
    pub point: Vector,
    pub value: ExtendedReal,
    /// `None` when the point is marked nondifferentiable or the value is
    /// not finite.
    pub gradient: Option<Vector>,
    pub nondifferentiable: bool,
    pub branch_id: String,
}

#[derive(Clone, Debug)]
struct Dual {
    v: f64,
    d: Vec<f64>,
}

struct GradCtx {
    tol: f64,
    kink: bool,
    undefined: bool,
    trail: Vec<String>,
}

impl Dual {
    fn cst(v: f64, n: usize) -> Self {
        Self { v, d: vec![0.0; n] }
    }
    fn map(&self, v: f64, s: f64) -> Self {
        Self {
            v,
            d: self.d.iter().map(|x| x * s).collect(),
        }
    }
}

fn dual(e: &Expr, x: &[f64], ctx: &mut GradCtx) -> Dual {
    let n = x.len();
    let out = match &e.kind {
        ExprKind::Num(c) => Dual::cst(*c, n),
        ExprKind::Var(i) => {
            let mut d = Dual::cst(x[*i], n);
            d.d[*i] = 1.0;
            d
        }
        ExprKind::Neg(a) => {
            let p = dual(a, x, ctx);
            p.map(-p.v, -1.0)
        }
        ExprKind::Add(a, b) | ExprKind::Sub(a, b) => {
            let p = dual(a, x, ctx);
            let q = dual(b, x, ctx);
            let s = if matches!(e.kind, ExprKind::Add(..)) { 1.0 } else { -1.0 };
            Dual {
                v: p.v + s * q.v,
                d: p.d.iter().zip(&q.d).map(|(u, w)| u + s * w).collect(),
            }
        }
        ExprKind::Mul(a, b) => {
            let p = dual(a, x, ctx);
            let q = dual(b, x, ctx);
            Dual {
                v: p.v * q.v,
                d: p.d.iter().zip(&q.d).map(|(u, w)| u * q.v + p.v * w).collect(),
            }
        }
        ExprKind::Div(a, b) => {
            let p = dual(a, x, ctx);
            let q = dual(b, x, ctx);
            if q.v == 0.0 {
                ctx.undefined = true;
            }
            Dual {
                v: p.v / q.v,
                d: p
                    .d
                    .iter()
                    .zip(&q.d)
                    .map(|(u, w)| (u * q.v - p.v * w) / (q.v * q.v))
                    .collect(),
            }
        }
        ExprKind::Pow(a, k) => {
            let p = dual(a, x, ctx);
            if *k == 0 {
                Dual::cst(1.0, n)
            } else {
                if p.v == 0.0 && *k < 1 {
                    ctx.undefined = true;
                }
                p.map(p.v.powi(*k), *k as f64 * p.v.powi(k - 1))
            }
        }
        ExprKind::Call(g, a) => {
            let p = dual(a, x, ctx);
            match g {
                Func::Exp => {
                    let v = p.v.exp();
                    p.map(v, v)
                }
                Func::Log => {
                    if p.v <= 0.0 {
                        ctx.undefined = true;
                    }
                    p.map(p.v.ln(), 1.0 / p.v)
                }
                Func::Abs => {
                    if p.v.abs() <= ctx.tol {
                        ctx.kink = true;
                    }
                    let s = if p.v < 0.0 { -1.0 } else { 1.0 };
                    ctx.trail.push(if s < 0.0 { "-".into() } else { "+".into() });
                    p.map(p.v.abs(), s)
                }
                Func::Sqrt => {
                    if p.v <= 0.0 {
                        ctx.undefined = true;
                    }
                    let r = p.v.sqrt();
                    p.map(r, 0.5 / r)
                }
                Func::Sin => p.map(p.v.sin(), p.v.cos()),
                Func::Cos => p.map(p.v.cos(), -p.v.sin()),
            }
        }
        ExprKind::Piecewise {
            branches,
            otherwise,
        } => {
            let mut chosen = None;
            for (bi, (c, body)) in branches.iter().enumerate() {
                let mut holds = true;
                for at in &c.atoms {
                    let l = dual(&at.lhs, x, ctx).v;
                    let r = dual(&at.rhs, x, ctx).v;
                    if (l - r).abs() <= ctx.tol {
                        ctx.kink = true;
                    }
                    let ok = match at.op {
                        CmpOp::Le => l <= r,
                        CmpOp::Lt => l < r,
                        CmpOp::Ge => l >= r,
                        CmpOp::Gt => l > r,
                    };
                    if !ok {
                        holds = false;
                        break;
                    }
                }
                if holds {
                    chosen = Some((bi, body));
                    break;
                }
            }
            match chosen {
                Some((bi, body)) => {
                    ctx.trail.push(bi.to_string());
                    dual(body, x, ctx)
                }
                None => {
                    ctx.trail.push("e".into());
                    dual(otherwise, x, ctx)
                }
            }
        }
    };
    if !out.v.is_finite() || out.d.iter().any(|v| !v.is_finite()) {
        ctx.undefined = true;
    }
    out
}

pub(crate) fn grad_expr(e: &Expr, x: &[f64], tol: f64) -> GradResult {
    let mut ctx = GradCtx {
        tol,
        kink: false,
        undefined: false,
        trail: Vec::new(),
    };
    let d = dual(e, x, &mut ctx);
    let mut of = false;
    let value = eval_expr(e, x, &mut of).unwrap_or(PosInf);
    let ok = !ctx.kink && !ctx.undefined && value.is_finite();
    GradResult {
        point: x.to_vec(),
        value,
        gradient: if ok { Some(d.d) } else { None },
        nondifferentiable: ctx.kink,
        branch_id: ctx.trail.join("."),
    }
}

/// Branch signature only (cheap; used to locate guard boundaries).
pub(crate) fn branch_signature(e: &Expr, x: &[f64]) -> String {
    let mut ctx = GradCtx {
        tol: 0.0,
        kink: false,
        undefined: false,
        trail: Vec::new(),
    };
    dual(e, x, &mut ctx);
    ctx.trail.join(".")
}
