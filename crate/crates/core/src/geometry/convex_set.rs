use serde::{Deserialize, Serialize};

use super::cone::PolyCone;
use super::direction_grid;
use super::hrep::HCone;
use crate::error::{Error, Result};
use crate::ext_real::{ExtendedReal, NegInf, PosInf};
use crate::linalg::{add, dot, lex_cmp, neg, norm, Vector};
use crate::lp::{Lp, LpOutcome, Rel, NONNEG};
use crate::tolerance::Tolerance;

/// `co(vertices) + cone(rays)`; empty iff `vertices` is empty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyConvexSet {
    pub dim: usize,
    pub vertices: Vec<Vector>,
    #[serde(default)]
    pub rays: Vec<Vector>,
}

impl PolyConvexSet {
    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            vertices: vec![],
            rays: vec![],
        }
    }

    pub fn point(p: Vector) -> Self {
        Self {
            dim: p.len(),
            vertices: vec![p],
            rays: vec![],
        }
    }

    /// Builds the set and reduces it to a minimal generator list.
    pub fn new(dim: usize, vertices: Vec<Vector>, rays: Vec<Vector>) -> Result<Self> {
        for v in vertices.iter().chain(rays.iter()) {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: v.len(),
                });
            }
        }
        if vertices.is_empty() {
            return Ok(Self::empty(dim));
        }
        let cone = PolyCone::new(dim, rays, vec![])?;
        let mut s = Self {
            dim,
            vertices,
            rays: cone.generators(),
        };
        s.reduce()?;
        Ok(s)
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn is_bounded(&self) -> bool {
        self.rays.is_empty()
    }

    pub fn recession_cone(&self) -> Result<PolyCone> {
        PolyCone::new(self.dim, self.rays.clone(), vec![])
    }

    fn reduce(&mut self) -> Result<()> {
        // drop duplicate vertices
        let mut verts: Vec<Vector> = Vec::new();
        for v in &self.vertices {
            if !verts.iter().any(|w| crate::linalg::dist(v, w) <= 1e-12 * (1.0 + norm(v))) {
                verts.push(v.clone());
            }
        }
        // drop vertices that are combinations of the others plus rays
        let mut i = 0;
        while i < verts.len() && verts.len() > 1 {
            let others: Vec<Vector> = verts
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, v)| v.clone())
                .collect();
            let r = hull_residual(&others, &self.rays, &verts[i])?;
            if r <= 1e-10 * (1.0 + norm(&verts[i])) {
                verts.remove(i);
            } else {
                i += 1;
            }
        }
        verts.sort_by(|a, b| lex_cmp(a, b));
        self.vertices = verts;
        Ok(())
    }

    /// `{x : a·x <= b for (a, b) in ineq, c·x = d for (c, d) in eq}`.
    pub fn from_halfspaces(
        dim: usize,
        ineq: &[(Vector, f64)],
        eq: &[(Vector, f64)],
    ) -> Result<Self> {
        let lift = |a: &Vector, b: f64| {
            let mut r = a.clone();
            r.push(-b);
            r
        };
        let mut hi: Vec<Vector> = ineq.iter().map(|(a, b)| lift(a, *b)).collect();
        let mut s = vec![0.0; dim + 1];
        s[dim] = -1.0;
        hi.push(s);
        let he: Vec<Vector> = eq.iter().map(|(a, b)| lift(a, *b)).collect();
        let g = HCone::new(dim + 1, hi, he).generators()?;
        let mut vertices = Vec::new();
        let mut rays = Vec::new();
        for z in &g.rays {
            let t = z[dim];
            if t > 1e-9 {
                vertices.push(z[..dim].iter().map(|x| x / t).collect());
            } else {
                rays.push(z[..dim].to_vec());
            }
        }
        for l in &g.lineality {
            rays.push(l[..dim].to_vec());
            rays.push(neg(&l[..dim]));
        }
        if vertices.is_empty() {
            return Ok(Self::empty(dim));
        }
        Self::new(dim, vertices, rays)
    }

    /// `sup {<x, v> : x in S}`.
    pub fn support(&self, v: &[f64]) -> ExtendedReal {
        if self.is_empty() {
            return NegInf;
        }
        if v.iter().all(|x| *x == 0.0) {
            return ExtendedReal::ZERO;
        }
        let nv = norm(v);
        if self.rays.iter().any(|r| dot(r, v) > 1e-12 * nv) {
            return PosInf;
        }
        ExtendedReal::finite(
            self.vertices
                .iter()
                .map(|p| dot(p, v))
                .fold(f64::NEG_INFINITY, f64::max),
        )
    }

    pub fn contains(&self, p: &[f64], tol: &Tolerance) -> Result<bool> {
        if self.is_empty() {
            return Ok(false);
        }
        let r = hull_residual(&self.vertices, &self.rays, p)?;
        Ok(r <= tol.bound(norm(p)) * (self.dim as f64).sqrt())
    }

    pub fn negate(&self) -> Self {
        let mut s = Self {
            dim: self.dim,
            vertices: self.vertices.iter().map(|v| neg(v)).collect(),
            rays: self.rays.iter().map(|v| neg(v)).collect(),
        };
        s.vertices.sort_by(|a, b| lex_cmp(a, b));
        s.rays.sort_by(|a, b| lex_cmp(a, b));
        s
    }

    pub fn minkowski_sum(&self, other: &PolyConvexSet) -> Result<Self> {
        if self.is_empty() || other.is_empty() {
            return Ok(Self::empty(self.dim));
        }
        let mut verts = Vec::new();
        for a in &self.vertices {
            for b in &other.vertices {
                verts.push(add(a, b));
            }
        }
        let mut rays = self.rays.clone();
        rays.extend(other.rays.iter().cloned());
        Self::new(self.dim, verts, rays)
    }

    /// Support of `S ∩ [-r, r]^n` in direction `v`, by LP.
    pub fn support_in_box(&self, v: &[f64], r: f64) -> Result<ExtendedReal> {
        if self.is_empty() {
            return Ok(NegInf);
        }
        let mut lp = Lp::maximize();
        let x: Vec<usize> = v.iter().map(|&c| lp.var(c, (-r, r))).collect();
        let lam = lp.vars(self.vertices.len(), 0.0, NONNEG);
        let mu = lp.vars(self.rays.len(), 0.0, NONNEG);
        for i in 0..self.dim {
            let mut terms = vec![(x[i], -1.0)];
            terms.extend(self.vertices.iter().enumerate().map(|(k, p)| (lam[k], p[i])));
            terms.extend(self.rays.iter().enumerate().map(|(k, d)| (mu[k], d[i])));
            lp.constraint(terms, Rel::Eq, 0.0);
        }
        lp.constraint(lam.iter().map(|&k| (k, 1.0)).collect(), Rel::Eq, 1.0);
        match lp.solve()? {
            LpOutcome::Optimal { objective, .. } => Ok(ExtendedReal::finite(objective)),
            LpOutcome::Infeasible => Ok(NegInf),
            LpOutcome::Unbounded => Err(Error::Lp("bounded LP reported unbounded".into())),
        }
    }

    /// Hausdorff distance between `A ∩ [-r,r]^n` and `B ∩ [-r,r]^n`, estimated
    /// from support functions on the fixed direction grid.
    pub fn hausdorff_in_box(&self, other: &PolyConvexSet, r: f64) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for u in direction_grid(self.dim) {
            let a = self.support_in_box(&u, r)?;
            let b = other.support_in_box(&u, r)?;
            match (a, b) {
                (ExtendedReal::Finite(x), ExtendedReal::Finite(y)) => worst = worst.max((x - y).abs()),
                (x, y) if x == y => {}
                _ => return Ok(f64::INFINITY),
            }
        }
        Ok(worst)
    }

    /// Equality up to tolerance: recession cones agree, each vertex lies in
    /// the other set, and supports agree on the direction grid.
    pub fn set_eq(&self, other: &PolyConvexSet, tol: &Tolerance) -> Result<bool> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        match (self.is_empty(), other.is_empty()) {
            (true, true) => return Ok(true),
            (true, false) | (false, true) => return Ok(false),
            _ => {}
        }
        if !self.recession_cone()?.set_eq(&other.recession_cone()?, tol)? {
            return Ok(false);
        }
        for v in &self.vertices {
            if !other.contains(v, tol)? {
                return Ok(false);
            }
        }
        for v in &other.vertices {
            if !self.contains(v, tol)? {
                return Ok(false);
            }
        }
        for u in direction_grid(self.dim) {
            match (self.support(&u), other.support(&u)) {
                (ExtendedReal::Finite(a), ExtendedReal::Finite(b)) => {
                    if !tol.close(a, b) {
                        return Ok(false);
                    }
                }
                (a, b) if a == b => {}
                _ => return Ok(false),
            }
        }
        Ok(true)
    }
}

/// L1 residual of writing `p` as a convex combination of `vertices` plus a
/// conic combination of `rays`.
pub(crate) fn hull_residual(vertices: &[Vector], rays: &[Vector], p: &[f64]) -> Result<f64> {
    let dim = p.len();
    let mut lp = Lp::minimize();
    let lam = lp.vars(vertices.len(), 0.0, NONNEG);
    let mu = lp.vars(rays.len(), 0.0, NONNEG);
    let sp = lp.vars(dim, 1.0, NONNEG);
    let sm = lp.vars(dim, 1.0, NONNEG);
    for i in 0..dim {
        let mut terms: Vec<(usize, f64)> = Vec::new();
        terms.extend(vertices.iter().enumerate().map(|(k, v)| (lam[k], v[i])));
        terms.extend(rays.iter().enumerate().map(|(k, r)| (mu[k], r[i])));
        terms.push((sp[i], 1.0));
        terms.push((sm[i], -1.0));
        lp.constraint(terms, Rel::Eq, p[i]);
    }
    lp.constraint(lam.iter().map(|&k| (k, 1.0)).collect(), Rel::Eq, 1.0);
    let (_, obj) = lp
        .solve()?
        .optimal()
        .ok_or_else(|| Error::Lp("hull membership LP not optimal".into()))?;
    Ok(obj.max(0.0))
}

/// Minimal-vertex convex hull of a point list; empty input gives the empty set.
pub fn convex_hull(points: &[Vector]) -> Result<PolyConvexSet> {
    match points.first() {
        None => Ok(PolyConvexSet::empty(0)),
        Some(p) => PolyConvexSet::new(p.len(), points.to_vec(), vec![]),
    }
}

/// Certificate for `0 ∈ S + K`: `xi ∈ S`, `w ∈ K`, `xi + w ≈ 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinkowskiCertificate {
    pub xi: Vector,
    pub w: Vector,
    pub residual: f64,
}

/// Decides `0 ∈ S + K` by an LP on generator coefficients.
pub fn minkowski_contains_zero(
    s: &PolyConvexSet,
    k: &PolyCone,
    tol: &Tolerance,
) -> Result<(bool, Option<MinkowskiCertificate>)> {
    if s.dim != k.dim {
        return Err(Error::DimensionMismatch {
            expected: s.dim,
            found: k.dim,
        });
    }
    if s.is_empty() {
        return Ok((false, None));
    }
    let dim = s.dim;
    let kg = k.generators();
    let mut lp = Lp::minimize();
    let lam = lp.vars(s.vertices.len(), 0.0, NONNEG);
    let mu = lp.vars(s.rays.len(), 0.0, NONNEG);
    let al = lp.vars(kg.len(), 0.0, NONNEG);
    let sp = lp.vars(dim, 1.0, NONNEG);
    let sm = lp.vars(dim, 1.0, NONNEG);
    for i in 0..dim {
        let mut terms: Vec<(usize, f64)> = Vec::new();
        terms.extend(s.vertices.iter().enumerate().map(|(j, v)| (lam[j], v[i])));
        terms.extend(s.rays.iter().enumerate().map(|(j, r)| (mu[j], r[i])));
        terms.extend(kg.iter().enumerate().map(|(j, g)| (al[j], g[i])));
        terms.push((sp[i], 1.0));
        terms.push((sm[i], -1.0));
        lp.constraint(terms, Rel::Eq, 0.0);
    }
    lp.constraint(lam.iter().map(|&j| (j, 1.0)).collect(), Rel::Eq, 1.0);
    let (x, obj) = lp
        .solve()?
        .optimal()
        .ok_or_else(|| Error::Lp("Minkowski LP not optimal".into()))?;
    let mut xi = vec![0.0; dim];
    for (j, v) in s.vertices.iter().enumerate() {
        for i in 0..dim {
            xi[i] += x[lam[j]] * v[i];
        }
    }
    for (j, r) in s.rays.iter().enumerate() {
        for i in 0..dim {
            xi[i] += x[mu[j]] * r[i];
        }
    }
    let mut w = vec![0.0; dim];
    for (j, g) in kg.iter().enumerate() {
        for i in 0..dim {
            w[i] += x[al[j]] * g[i];
        }
    }
    let residual = norm(&add(&xi, &w));
    let holds = obj <= tol.abs_tol;
    Ok((
        holds,
        if holds {
            Some(MinkowskiCertificate { xi, w, residual })
        } else {
            None
        },
    ))
}
