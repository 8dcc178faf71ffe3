use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Numeric tolerances shared by the geometric engines.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerance {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Radians; used when comparing ray directions.
    pub cone_angle_tol: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs_tol: 1e-6,
            rel_tol: 1e-6,
            cone_angle_tol: 1e-6,
        }
    }
}

impl Tolerance {
    pub fn new(abs_tol: f64, rel_tol: f64, cone_angle_tol: f64) -> Result<Self> {
        let t = Self {
            abs_tol,
            rel_tol,
            cone_angle_tol,
        };
        t.validate()?;
        Ok(t)
    }

    /// Same tolerance in every field.
    pub fn uniform(tol: f64) -> Result<Self> {
        Self::new(tol, tol, tol)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| x.is_finite() && x > 0.0;
        if ok(self.abs_tol) && ok(self.rel_tol) && ok(self.cone_angle_tol) {
            Ok(())
        } else {
            Err(Error::Invalid(format!("tolerances must be strictly positive: {self:?}")))
        }
    }

    /// `|a - b| <= max(abs_tol, rel_tol * max(|a|, |b|))`.
    pub fn close(&self, a: f64, b: f64) -> bool {
        (a - b).abs() <= self.abs_tol.max(self.rel_tol * a.abs().max(b.abs()))
    }

    pub fn bound(&self, scale: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * scale.abs())
    }
}
