use serde::{Deserialize, Serialize};

use super::hrep::{HCone, RANK_TOL};
use super::MAX_EXACT_DIM;
use crate::error::{Error, Result};
use crate::linalg::{angle, dot, lex_cmp, neg, norm, normalize, orth_basis, project_out, Vector};
use crate::lp::{Lp, Rel, FREE, NONNEG};
use crate::tolerance::Tolerance;

/// `cone(rays) + span(lineality)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyCone {
    pub dim: usize,
    pub rays: Vec<Vector>,
    #[serde(default)]
    pub lineality: Vec<Vector>,
}

impl PolyCone {
    /// Builds a cone from arbitrary generators: rays are normalized, moved
    /// off the lineality space, deduplicated and sorted.
    pub fn new(dim: usize, rays: Vec<Vector>, lineality: Vec<Vector>) -> Result<Self> {
        for v in rays.iter().chain(lineality.iter()) {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Invalid("cone generator with non-finite entry".into()));
            }
        }
        let lineality = orth_basis(&lineality, dim, RANK_TOL);
        let mut out: Vec<Vector> = Vec::new();
        for r in rays {
            let scale = norm(&r);
            let p = project_out(&r, &lineality);
            if norm(&p) <= RANK_TOL * scale.max(1e-300) {
                continue;
            }
            let u = normalize(&p).expect("nonzero");
            if !out.iter().any(|o| angle(o, &u) < 1e-12) {
                out.push(u);
            }
        }
        out.sort_by(|a, b| lex_cmp(a, b));
        let mut lineality = lineality;
        canonical_sign(&mut lineality);
        Ok(Self {
            dim,
            rays: out,
            lineality,
        })
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            rays: vec![],
            lineality: vec![],
        }
    }

    pub fn whole(dim: usize) -> Self {
        Self {
            dim,
            rays: vec![],
            lineality: (0..dim).map(|i| crate::linalg::unit(dim, i)).collect(),
        }
    }

    /// `{x : a·x <= 0 (a in ineq), e·x = 0 (e in eq)}`.
    pub fn from_halfspaces(dim: usize, ineq: Vec<Vector>, eq: Vec<Vector>) -> Result<Self> {
        if dim > MAX_EXACT_DIM + 1 {
            return Err(capability(dim));
        }
        let g = HCone::new(dim, ineq, eq).generators()?;
        Self::new(dim, g.rays, g.lineality)
    }

    /// Halfspace description `(ineq, eq)` obtained from the polar's generators.
    pub fn to_halfspaces(&self) -> Result<(Vec<Vector>, Vec<Vector>)> {
        let p = self.polar_unchecked()?;
        Ok((p.rays, p.lineality))
    }

    /// Every generator, with lineality directions listed in both signs.
    pub fn generators(&self) -> Vec<Vector> {
        let mut g = self.rays.clone();
        for l in &self.lineality {
            g.push(l.clone());
            g.push(neg(l));
        }
        g
    }

    pub fn is_zero(&self) -> bool {
        self.rays.is_empty() && self.lineality.is_empty()
    }

    pub fn is_whole(&self) -> bool {
        self.lineality.len() == self.dim
    }

    fn polar_unchecked(&self) -> Result<PolyCone> {
        PolyCone::from_halfspaces(self.dim, self.rays.clone(), self.lineality.clone())
    }

    /// `{w : <v, w> <= 0 for all v in K}`.
    pub fn polar(&self) -> Result<PolyCone> {
        if self.dim > MAX_EXACT_DIM {
            return Err(capability(self.dim));
        }
        self.polar_unchecked()
    }

    /// Minimal generator form, `polar(polar(K))`.
    pub fn canonical(&self) -> Result<PolyCone> {
        self.polar()?.polar()
    }

    /// L1 distance from `v` to the cone, measured via an LP over generator
    /// coefficients (not the Euclidean distance, but zero exactly on the cone).
    pub fn residual(&self, v: &[f64]) -> Result<f64> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: v.len(),
            });
        }
        let mut lp = Lp::minimize();
        let a = lp.vars(self.rays.len(), 0.0, NONNEG);
        let b = lp.vars(self.lineality.len(), 0.0, FREE);
        let sp = lp.vars(self.dim, 1.0, NONNEG);
        let sm = lp.vars(self.dim, 1.0, NONNEG);
        for i in 0..self.dim {
            let mut terms = Vec::new();
            for (k, r) in self.rays.iter().enumerate() {
                terms.push((a[k], r[i]));
            }
            for (k, l) in self.lineality.iter().enumerate() {
                terms.push((b[k], l[i]));
            }
            terms.push((sp[i], 1.0));
            terms.push((sm[i], -1.0));
            lp.constraint(terms, Rel::Eq, v[i]);
        }
        let (_, obj) = lp
            .solve()?
            .optimal()
            .ok_or_else(|| Error::Lp("membership LP not optimal".into()))?;
        Ok(obj.max(0.0))
    }

    /// Membership of the direction of `v`; the residual is compared after
    /// scaling `v` to unit length.
    pub fn contains(&self, v: &[f64], tol: &Tolerance) -> Result<bool> {
        let Some(u) = normalize(v) else {
            return Ok(true);
        };
        let r = self.residual(&u)?;
        Ok(r <= tol.cone_angle_tol * (self.dim as f64).sqrt() + 1e-12)
    }

    pub fn contains_cone(&self, other: &PolyCone, tol: &Tolerance) -> Result<bool> {
        for g in other.generators() {
            if !self.contains(&g, tol)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn set_eq(&self, other: &PolyCone, tol: &Tolerance) -> Result<bool> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        Ok(self.contains_cone(other, tol)? && other.contains_cone(self, tol)?)
    }

    /// Pointed iff no nonzero `v` with `v, -v` both in the cone.
    pub fn is_pointed(&self, tol: &Tolerance) -> Result<bool> {
        if !self.lineality.is_empty() {
            return Ok(false);
        }
        for r in &self.rays {
            if self.contains(&neg(r), tol)? {
                return Ok(false);
            }
        }
        // a positive combination summing to zero also breaks pointedness
        if self.rays.len() > 1 {
            let mut lp = Lp::maximize();
            let a = lp.vars(self.rays.len(), 1.0, (0.0, 1.0));
            for i in 0..self.dim {
                let terms = self.rays.iter().enumerate().map(|(k, r)| (a[k], r[i])).collect();
                lp.constraint(terms, Rel::Eq, 0.0);
            }
            if let Some((_, obj)) = lp.solve()?.optimal() {
                if obj > 1e-9 {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    /// Dimension of the linear span of the cone.
    pub fn span_dim(&self) -> usize {
        orth_basis(&self.generators(), self.dim, RANK_TOL).len()
    }

    pub fn has_interior(&self) -> bool {
        self.span_dim() == self.dim
    }

    /// Intersection of cones via their halfspace descriptions.
    pub fn intersect(&self, other: &PolyCone) -> Result<PolyCone> {
        let (mut i1, mut e1) = self.to_halfspaces()?;
        let (i2, e2) = other.to_halfspaces()?;
        i1.extend(i2);
        e1.extend(e2);
        PolyCone::from_halfspaces(self.dim, i1, e1)
    }

    /// Conic hull of a union.
    pub fn hull_union(cones: &[PolyCone], dim: usize) -> Result<PolyCone> {
        let mut rays = Vec::new();
        let mut lin = Vec::new();
        for c in cones {
            rays.extend(c.rays.iter().cloned());
            lin.extend(c.lineality.iter().cloned());
        }
        PolyCone::new(dim, rays, lin)
    }

    /// `max <g, v>` over unit generators; `+inf`-like behaviour is reported
    /// as a positive value whenever `v` has positive inner product with a
    /// lineality direction.
    pub fn max_generator_dot(&self, v: &[f64]) -> f64 {
        self.generators()
            .iter()
            .map(|g| dot(g, v))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

fn canonical_sign(lin: &mut [Vector]) {
    for l in lin.iter_mut() {
        if let Some(first) = l.iter().find(|x| x.abs() > 1e-12) {
            if *first < 0.0 {
                l.iter_mut().for_each(|x| *x = -*x);
            }
        }
    }
}

fn capability(dim: usize) -> Error {
    Error::Capability(format!(
        "exact polar computation supports ambient dimension <= {MAX_EXACT_DIM}, got {dim}"
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    #[test]
    fn polar_of_whole_space_is_zero() {
        let p = PolyCone::whole(2).polar().unwrap();
        assert!(p.is_zero());
    }

    #[test]
    fn polar_of_single_ray() {
        let k = PolyCone::new(2, vec![vec![1.0, 0.0]], vec![]).unwrap();
        let p = k.polar().unwrap();
        let expected = PolyCone::from_halfspaces(2, vec![vec![1.0, 0.0]], vec![]).unwrap();
        assert!(p.set_eq(&expected, &tol()).unwrap());
        assert!(p.contains(&[-1.0, 5.0], &tol()).unwrap());
        assert!(!p.contains(&[0.1, 5.0], &tol()).unwrap());
    }

    #[test]
    fn pointedness() {
        let q = PolyCone::new(2, vec![vec![-1.0, 0.0], vec![0.0, -1.0]], vec![]).unwrap();
        assert!(q.is_pointed(&tol()).unwrap());
        let line = PolyCone::new(2, vec![vec![1.0, 0.0], vec![-1.0, 0.0]], vec![]).unwrap();
        assert!(!line.is_pointed(&tol()).unwrap());
        assert!(PolyCone::zero(3).is_pointed(&tol()).unwrap());
    }

    #[test]
    fn capability_above_four() {
        assert!(matches!(PolyCone::whole(5).polar(), Err(Error::Capability(_))));
    }
}
