//! Conversion from halfspace descriptions to generator descriptions by
//! active-set enumeration. Intended for ambient dimension at most five, where
//! every extreme ray is pinned by `dim - 1` independent active rows.

use crate::error::{Error, Result};
use crate::linalg::{angle, dot, lex_cmp, norm, normalize, null_space, Vector};

/// Rank tolerance used by the null-space computations.
pub(crate) const RANK_TOL: f64 = 1e-9;
/// Hard cap on the ambient dimension of the internal enumeration.
pub(crate) const MAX_INTERNAL_DIM: usize = 5;

/// `{x : a·x <= 0 for a in ineq, e·x = 0 for e in eq}`.
#[derive(Clone, Debug, Default)]
pub struct HCone {
    pub dim: usize,
    pub ineq: Vec<Vector>,
    pub eq: Vec<Vector>,
}

/// Generators of an H-cone: extreme rays of the pointed part plus an
/// orthonormal lineality basis.
#[derive(Clone, Debug)]
pub(crate) struct Generators {
    pub rays: Vec<Vector>,
    pub lineality: Vec<Vector>,
}

fn clean_rows(rows: &[Vector], dim: usize) -> Vec<Vector> {
    let mut out: Vec<Vector> = Vec::new();
    for r in rows {
        debug_assert_eq!(r.len(), dim);
        if let Some(u) = normalize(r) {
            if !out.iter().any(|o| angle(o, &u) < 1e-12) {
                out.push(u);
            }
        }
    }
    out
}

fn for_each_subset(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        // advance
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] < n - k + i {
                idx[i] += 1;
                for j in i + 1..k {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
            if i == 0 {
                return;
            }
        }
    }
}

impl HCone {
    pub fn new(dim: usize, ineq: Vec<Vector>, eq: Vec<Vector>) -> Self {
        Self { dim, ineq, eq }
    }

    pub(crate) fn generators(&self) -> Result<Generators> {
        let dim = self.dim;
        if dim > MAX_INTERNAL_DIM {
            return Err(Error::Capability(format!(
                "exact cone enumeration supports dimension <= {MAX_INTERNAL_DIM}, got {dim}"
            )));
        }
        let ineq = clean_rows(&self.ineq, dim);
        let eq = clean_rows(&self.eq, dim);
        let all: Vec<Vector> = ineq.iter().chain(eq.iter()).cloned().collect();
        let lineality = null_space(&all, dim, RANK_TOL);

        let mut base = eq.clone();
        base.extend(lineality.iter().cloned());
        let base_nullity = null_space(&base, dim, RANK_TOL).len();
        let mut rays: Vec<Vector> = Vec::new();
        if base_nullity == 0 {
            return Ok(Generators { rays, lineality });
        }
        let need = base_nullity - 1;
        let feasible = |z: &[f64]| ineq.iter().all(|a| dot(a, z) <= 1e-9);
        let push = |z: Vector, rays: &mut Vec<Vector>| {
            if !rays.iter().any(|r| angle(r, &z) < 1e-9) {
                rays.push(z);
            }
        };
        if need > ineq.len() {
            return Ok(Generators { rays, lineality });
        }
        for_each_subset(ineq.len(), need, |subset| {
            let mut m = base.clone();
            m.extend(subset.iter().map(|&i| ineq[i].clone()));
            let ns = null_space(&m, dim, RANK_TOL);
            if ns.len() != 1 {
                return;
            }
            let z = &ns[0];
            let nz: Vector = z.iter().map(|x| -x).collect();
            if feasible(z) {
                push(z.clone(), &mut rays);
            }
            if feasible(&nz) {
                push(nz, &mut rays);
            }
        });
        // Both z and -z feasible means z lies in the lineality space, which
        // cannot happen for a pointed remainder; drop such pairs defensively.
        let snapshot = rays.clone();
        rays.retain(|r| {
            !snapshot
                .iter()
                .any(|s| angle(s, r) > std::f64::consts::PI - 1e-9)
        });
        for r in rays.iter_mut() {
            let n = norm(r);
            r.iter_mut().for_each(|x| *x /= n);
            r.iter_mut().for_each(|x| {
                if x.abs() < 1e-15 {
                    *x = 0.0
                }
            });
        }
        rays.sort_by(|a, b| lex_cmp(a, b));
        Ok(Generators { rays, lineality })
    }
}
