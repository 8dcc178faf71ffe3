use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ast::Expr;
use super::eval::{branch_signature, eval_expr, grad_expr, EvalOutcome, GradResult};
use super::pa::{lower, Piece};
use super::parse::{directives, parse_expr};
use super::set::SetDesc;
use crate::error::{Error, Result};
use crate::ext_real::{ExtendedReal, PosInf};
use crate::linalg::{norm, sub, Vector};
use crate::tolerance::Tolerance;

/// Properties declared in the source header.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FuncMeta {
    pub lsc: bool,
    pub continuous: bool,
    pub finite_valued: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub enum FuncKind {
    Expr(Expr),
    /// `0` on the set, `+∞` off it.
    Indicator(SetDesc),
    /// Euclidean distance to the set.
    Distance(SetDesc),
}

#[derive(Clone, Debug, PartialEq)]
pub struct FuncDesc {
    pub dim: usize,
    pub kind: FuncKind,
    pub source: String,
    pub meta: FuncMeta,
}

impl FuncDesc {
    /// Parses with the dimension taken from `@dim` or the highest variable.
    pub fn parse(src: &str) -> Result<Self> {
        Self::parse_with_dim(src, None)
    }

    pub fn parse_with_dim(src: &str, dim: Option<usize>) -> Result<Self> {
        let d = directives(src)?;
        let declared = d.dim.or(dim);
        let e = parse_expr(src, declared)?;
        let dim = declared.unwrap_or(e.arity().max(1));
        let f = Self {
            dim,
            source: src.trim().to_string(),
            kind: FuncKind::Expr(e),
            meta: FuncMeta {
                lsc: d.lsc || d.continuous,
                continuous: d.continuous,
                finite_valued: d.finite,
            },
        };
        if f.meta.continuous {
            f.validate_continuity()?;
        }
        Ok(f)
    }

    pub fn from_expr(e: Expr, dim: usize) -> Self {
        Self {
            dim,
            source: e.to_string(),
            kind: FuncKind::Expr(e),
            meta: FuncMeta::default(),
        }
    }

    /// Indicator `δ_C`; lower semi-continuous because every relation is closed.
    pub fn lift_indicator(c: &SetDesc) -> Self {
        Self {
            dim: c.dim,
            source: c.source.clone(),
            kind: FuncKind::Indicator(c.clone()),
            meta: FuncMeta {
                lsc: true,
                continuous: false,
                finite_valued: false,
            },
        }
    }

    pub fn lift_distance(c: &SetDesc) -> Self {
        Self {
            dim: c.dim,
            source: c.source.clone(),
            kind: FuncKind::Distance(c.clone()),
            meta: FuncMeta {
                lsc: true,
                continuous: true,
                finite_valued: true,
            },
        }
    }

    pub fn expr(&self) -> Option<&Expr> {
        match &self.kind {
            FuncKind::Expr(e) => Some(e),
            _ => None,
        }
    }

    /// `-f`.
    pub fn negated(&self) -> Result<Self> {
        let e = self
            .expr()
            .ok_or_else(|| Error::Capability("negation needs an expression".into()))?;
        let mut g = Self::from_expr(Expr::neg(e.clone()), self.dim);
        g.meta.continuous = self.meta.continuous;
        g.meta.finite_valued = self.meta.finite_valued;
        Ok(g)
    }

    /// `f + g`.
    pub fn sum(&self, other: &FuncDesc) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        match (self.expr(), other.expr()) {
            (Some(a), Some(b)) => {
                let mut s = Self::from_expr(Expr::add(a.clone(), b.clone()), self.dim);
                s.meta.lsc = self.meta.lsc && other.meta.lsc;
                s.meta.continuous = self.meta.continuous && other.meta.continuous;
                Ok(s)
            }
            _ => Err(Error::Capability("sum needs expression-valued functions".into())),
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> Result<ExtendedReal> {
        Ok(self.eval_checked(x)?.value)
    }

    pub fn eval_checked(&self, x: &[f64]) -> Result<EvalOutcome> {
        self.check_dim(x)?;
        match &self.kind {
            FuncKind::Expr(e) => {
                let mut overflow = false;
                let value = eval_expr(e, x, &mut overflow)?;
                Ok(EvalOutcome { value, overflow })
            }
            FuncKind::Indicator(c) => Ok(EvalOutcome {
                value: if c.contains(x, &Tolerance::default())? {
                    ExtendedReal::ZERO
                } else {
                    PosInf
                },
                overflow: false,
            }),
            FuncKind::Distance(c) => Ok(EvalOutcome {
                value: ExtendedReal::finite(c.distance(x)?.distance),
                overflow: false,
            }),
        }
    }

    /// Gradient of the active branch; `nondifferentiable` within `abs_tol`
    /// of a guard boundary or an `abs`/`min`/`max` kink.
    pub fn grad(&self, x: &[f64], tol: &Tolerance) -> Result<GradResult> {
        self.check_dim(x)?;
        match &self.kind {
            FuncKind::Expr(e) => Ok(grad_expr(e, x, tol.abs_tol)),
            FuncKind::Indicator(c) => {
                let inside = c.violation(x) == 0.0
                    && c.le_values(x).iter().all(|h| *h < -tol.abs_tol);
                let value = self.eval(x)?;
                Ok(GradResult {
                    point: x.to_vec(),
                    value,
                    gradient: inside.then(|| vec![0.0; self.dim]),
                    nondifferentiable: !inside && value.is_finite(),
                    branch_id: if inside { "in".into() } else { "out".into() },
                })
            }
            FuncKind::Distance(c) => {
                let d = c.distance(x)?;
                let (gradient, tag) = if d.distance > tol.abs_tol {
                    let g: Vector = sub(x, &d.nearest[0])
                        .iter()
                        .map(|v| v / d.distance)
                        .collect();
                    (Some(g), "out")
                } else if c.le_values(x).iter().all(|h| *h < -tol.abs_tol) {
                    (Some(vec![0.0; self.dim]), "in")
                } else {
                    (None, "boundary")
                };
                Ok(GradResult {
                    point: x.to_vec(),
                    value: ExtendedReal::finite(d.distance),
                    nondifferentiable: gradient.is_none(),
                    gradient,
                    branch_id: tag.into(),
                })
            }
        }
    }

    /// Piecewise-affine lowering (fails with a capability error on
    /// non-affine guards).
    pub fn pieces(&self) -> Result<Vec<Piece>> {
        match &self.kind {
            FuncKind::Expr(e) => lower(e, self.dim),
            _ => Err(Error::Capability(
                "piecewise lowering needs an expression-valued function".into(),
            )),
        }
    }

    pub fn is_piecewise_affine(&self) -> bool {
        self.pieces()
            .map(|p| p.iter().all(|q| q.form.is_some()))
            .unwrap_or(false)
    }

    /// Samples random lines, locates branch switches by bisection and
    /// compares one-sided values there.
    pub fn validate_continuity(&self) -> Result<()> {
        let Some(e) = self.expr() else {
            return Ok(());
        };
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = self.dim;
        for _ in 0..24 {
            let p: Vector = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
            let d: Vector = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let at = |s: f64| -> Vector { p.iter().zip(&d).map(|(a, b)| a + s * b).collect() };
            let steps = 200;
            let mut prev_s = -20.0;
            let mut prev_sig = branch_signature(e, &at(prev_s));
            for k in 1..=steps {
                let s = -20.0 + 40.0 * k as f64 / steps as f64;
                let sig = branch_signature(e, &at(s));
                if sig != prev_sig {
                    let (mut lo, mut hi) = (prev_s, s);
                    for _ in 0..60 {
                        let mid = 0.5 * (lo + hi);
                        if branch_signature(e, &at(mid)) == prev_sig {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    let a = self.eval(&at(lo))?;
                    let b = self.eval(&at(hi))?;
                    if let (Some(a), Some(b)) = (a.as_finite(), b.as_finite()) {
                        let scale = 1.0 + a.abs().max(b.abs()) + norm(&d) * 1e3;
                        if (a - b).abs() > 1e-6 * scale {
                            return Err(Error::Invalid(format!(
                                "declared continuous but branch values differ ({a} vs {b}) near {:?}",
                                at(lo)
                            )));
                        }
                    }
                }
                prev_s = s;
                prev_sig = sig;
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct FuncRepr {
    dim: usize,
    #[serde(default = "expr_kind")]
    kind: String,
    source: String,
}

fn expr_kind() -> String {
    "expr".into()
}

impl Serialize for FuncDesc {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let (kind, source) = match &self.kind {
            FuncKind::Expr(_) => ("expr", self.source.clone()),
            FuncKind::Indicator(c) => ("indicator", c.source.clone()),
            FuncKind::Distance(c) => ("distance", c.source.clone()),
        };
        FuncRepr {
            dim: self.dim,
            kind: kind.into(),
            source,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for FuncDesc {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let r = FuncRepr::deserialize(d)?;
        match r.kind.as_str() {
            "expr" => FuncDesc::parse_with_dim(&r.source, Some(r.dim)).map_err(D::Error::custom),
            "indicator" => SetDesc::parse(&r.source, Some(r.dim))
                .map(|c| FuncDesc::lift_indicator(&c))
                .map_err(D::Error::custom),
            "distance" => SetDesc::parse(&r.source, Some(r.dim))
                .map(|c| FuncDesc::lift_distance(&c))
                .map_err(D::Error::custom),
            other => Err(D::Error::custom(format!("unknown function kind `{other}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_values() {
        let f = FuncDesc::parse("piecewise(x1 <= 0: 0; else: -x1)").unwrap();
        assert_eq!(f.dim, 1);
        assert_eq!(f.eval(&[2.0]).unwrap(), ExtendedReal::finite(-2.0));
        let g = FuncDesc::parse("exp(x1) + x2").unwrap();
        assert_eq!(g.dim, 2);
        assert_eq!(FuncDesc::parse("exp(x1)").unwrap().eval(&[0.0]).unwrap(), 1.0.into());
    }

    #[test]
    fn indicator_values() {
        let c = SetDesc::parse("x1 <= 0", None).unwrap();
        let d = FuncDesc::lift_indicator(&c);
        assert_eq!(d.eval(&[-1.0]).unwrap(), ExtendedReal::ZERO);
        assert_eq!(d.eval(&[1.0]).unwrap(), PosInf);
        let h = SetDesc::parse("x1 >= 0; x2 >= 0; x1*x2 >= 1", None).unwrap();
        assert_eq!(FuncDesc::lift_indicator(&h).eval(&[1.0, 1.0]).unwrap(), ExtendedReal::ZERO);
    }

    #[test]
    fn continuity_validator() {
        assert!(FuncDesc::parse(
            "@continuous\npiecewise(x1 >= 1: x1; x1 >= -1: 0.5*x1^2 + 0.5; else: -x1)"
        )
        .is_ok());
        assert!(FuncDesc::parse("@continuous\npiecewise(x1 <= 0: 1; else: x1)").is_err());
    }

    #[test]
    fn json_round_trip() {
        let f = FuncDesc::parse("max(x1, -2*x1)").unwrap();
        let s = serde_json::to_string(&f).unwrap();
        let g: FuncDesc = serde_json::from_str(&s).unwrap();
        assert_eq!(f.eval(&[1.5]).unwrap(), g.eval(&[1.5]).unwrap());
    }
}
