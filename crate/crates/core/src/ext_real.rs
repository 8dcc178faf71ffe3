//! Extended reals `R ∪ {±∞}`.
//!
//! Conventions:
//! - `a + b = +∞` whenever either operand is `+∞`, even if the other is `-∞`;
//! - `λ·(±∞) = ±∞` for `λ > 0` and `∓∞` for `λ < 0`; `0·(±∞)` is rejected;
//! - `inf ∅ = +∞`, `sup ∅ = -∞`;
//! - `-∞ < r < +∞` for every finite `r`.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Neg, Sub};

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExtendedReal {
    NegInf,
    Finite(f64),
    PosInf,
}

pub use ExtendedReal::{NegInf, PosInf};

impl ExtendedReal {
    pub const ZERO: ExtendedReal = ExtendedReal::Finite(0.0);

    /// Maps `f64` infinities onto the extended values. NaN is not a value of
    /// the extended line and yields `None`.
    pub fn from_f64(x: f64) -> Option<Self> {
        if x.is_nan() {
            None
        } else if x == f64::INFINITY {
            Some(PosInf)
        } else if x == f64::NEG_INFINITY {
            Some(NegInf)
        } else {
            Some(ExtendedReal::Finite(x))
        }
    }

    pub fn finite(x: f64) -> Self {
        Self::from_f64(x).expect("NaN is not an extended real")
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, ExtendedReal::Finite(_))
    }

    pub fn is_pos_inf(&self) -> bool {
        matches!(self, PosInf)
    }

    pub fn is_neg_inf(&self) -> bool {
        matches!(self, NegInf)
    }

    pub fn as_finite(&self) -> Option<f64> {
        match self {
            ExtendedReal::Finite(x) => Some(*x),
            _ => None,
        }
    }

    /// Lossy projection to `f64` (infinities map to `f64` infinities).
    pub fn to_f64(&self) -> f64 {
        match self {
            NegInf => f64::NEG_INFINITY,
            ExtendedReal::Finite(x) => *x,
            PosInf => f64::INFINITY,
        }
    }

    /// Product with a finite scalar. `0·(±∞)` is undefined and rejected.
    pub fn scale(self, lambda: f64) -> Result<Self> {
        match self {
            ExtendedReal::Finite(x) => Ok(Self::from_f64(lambda * x).unwrap_or(PosInf)),
            inf if lambda == 0.0 => Err(Error::Eval {
                subexpr: format!("0 * {inf}"),
                message: "0·(±∞) is undefined".into(),
            }),
            PosInf if lambda > 0.0 => Ok(PosInf),
            PosInf => Ok(NegInf),
            NegInf if lambda > 0.0 => Ok(NegInf),
            NegInf => Ok(PosInf),
        }
    }

    /// Product of two extended reals under the sign rules above.
    pub fn mul(self, other: Self) -> Result<Self> {
        match (self, other) {
            (ExtendedReal::Finite(a), b) => b.scale(a),
            (a, ExtendedReal::Finite(b)) => a.scale(b),
            (a, b) => {
                let same = a.is_pos_inf() == b.is_pos_inf();
                Ok(if same { PosInf } else { NegInf })
            }
        }
    }

    /// Infimum of a collection; `+∞` for the empty collection.
    pub fn inf<I: IntoIterator<Item = ExtendedReal>>(values: I) -> Self {
        values.into_iter().fold(PosInf, |acc, v| acc.min(v))
    }

    /// Supremum of a collection; `-∞` for the empty collection.
    pub fn sup<I: IntoIterator<Item = ExtendedReal>>(values: I) -> Self {
        values.into_iter().fold(NegInf, |acc, v| acc.max(v))
    }

    pub fn min(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    pub fn max(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    fn rank(&self) -> u8 {
        match self {
            NegInf => 0,
            ExtendedReal::Finite(_) => 1,
            PosInf => 2,
        }
    }
}

/// Total addition; `+∞` absorbs `-∞`.
pub fn ext_add(a: ExtendedReal, b: ExtendedReal) -> ExtendedReal {
    match (a, b) {
        (PosInf, _) | (_, PosInf) => PosInf,
        (NegInf, _) | (_, NegInf) => NegInf,
        (ExtendedReal::Finite(x), ExtendedReal::Finite(y)) => {
            ExtendedReal::from_f64(x + y).unwrap_or(PosInf)
        }
    }
}

impl Add for ExtendedReal {
    type Output = ExtendedReal;
    fn add(self, rhs: Self) -> Self {
        ext_add(self, rhs)
    }
}

impl Neg for ExtendedReal {
    type Output = ExtendedReal;
    fn neg(self) -> Self {
        match self {
            NegInf => PosInf,
            PosInf => NegInf,
            ExtendedReal::Finite(x) => ExtendedReal::Finite(-x),
        }
    }
}

/// `a - b := a + (-b)`, so `(+∞) - (+∞) = +∞`.
impl Sub for ExtendedReal {
    type Output = ExtendedReal;
    fn sub(self, rhs: Self) -> Self {
        ext_add(self, -rhs)
    }
}

impl From<f64> for ExtendedReal {
    fn from(x: f64) -> Self {
        ExtendedReal::finite(x)
    }
}

impl PartialOrd for ExtendedReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (ExtendedReal::Finite(a), ExtendedReal::Finite(b)) => a.partial_cmp(b),
            _ => Some(self.rank().cmp(&other.rank())),
        }
    }
}

impl fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NegInf => write!(f, "-inf"),
            PosInf => write!(f, "+inf"),
            ExtendedReal::Finite(x) => write!(f, "{x}"),
        }
    }
}

impl Serialize for ExtendedReal {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            NegInf => s.serialize_str("-inf"),
            PosInf => s.serialize_str("+inf"),
            ExtendedReal::Finite(x) => s.serialize_f64(*x),
        }
    }
}

struct ExtVisitor;

impl<'de> Visitor<'de> for ExtVisitor {
    type Value = ExtendedReal;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str("a number, \"+inf\" or \"-inf\"")
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Self::Value, E> {
        ExtendedReal::from_f64(v).ok_or_else(|| E::custom("NaN"))
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Self::Value, E> {
        Ok(ExtendedReal::Finite(v as f64))
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Self::Value, E> {
        Ok(ExtendedReal::Finite(v as f64))
    }

    fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Self::Value, E> {
        match v {
            "+inf" | "inf" => Ok(PosInf),
            "-inf" => Ok(NegInf),
            other => Err(E::custom(format!("invalid extended real `{other}`"))),
        }
    }
}

impl<'de> Deserialize<'de> for ExtendedReal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        d.deserialize_any(ExtVisitor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ExtendedReal::Finite;

    #[test]
    fn addition_table() {
        assert_eq!(ext_add(PosInf, NegInf), PosInf);
        assert_eq!(ext_add(NegInf, PosInf), PosInf);
        assert_eq!(ext_add(Finite(3.0), NegInf), NegInf);
        assert_eq!(ext_add(Finite(2.0), Finite(2.0)), Finite(4.0));
        assert_eq!(PosInf - PosInf, PosInf);
    }

    #[test]
    fn scaling() {
        assert_eq!(PosInf.scale(2.0).unwrap(), PosInf);
        assert_eq!(PosInf.scale(-2.0).unwrap(), NegInf);
        assert_eq!(NegInf.scale(-0.5).unwrap(), PosInf);
        assert!(NegInf.scale(0.0).is_err());
        assert!(Finite(0.0).mul(PosInf).is_err());
    }

    #[test]
    fn empty_inf_sup() {
        assert_eq!(ExtendedReal::inf(Vec::new()), PosInf);
        assert_eq!(ExtendedReal::sup(Vec::new()), NegInf);
        assert_eq!(ExtendedReal::sup(vec![Finite(1.0), NegInf, Finite(-3.0)]), Finite(1.0));
    }

    #[test]
    fn json_encoding() {
        let v = vec![PosInf, Finite(1.5), NegInf];
        let s = serde_json::to_string(&v).unwrap();
        assert_eq!(s, r#"["+inf",1.5,"-inf"]"#);
        let back: Vec<ExtendedReal> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, v);
    }
}
