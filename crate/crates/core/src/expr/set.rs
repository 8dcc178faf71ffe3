//! Constraint sets `{x : g_k(x) rel_k c_k}` with membership, gradients and
//! Euclidean projection.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ast::Expr;
use super::eval::{eval_expr, grad_expr};
use super::func::FuncDesc;
use super::pa::{and_cells, as_affine, sublevel_cells, Cell};
use super::parse::{directives, parse_constraints, Relation};
use crate::error::{Error, Result};
use crate::linalg::{axpy, dist, dot, norm, norm_inf, normalize, Vector};
use crate::tolerance::Tolerance;

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub expr: Expr,
    pub rel: Relation,
    pub rhs: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetKind {
    Polyhedral,
    Smooth,
    Mixed,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SetDesc {
    pub dim: usize,
    pub constraints: Vec<Constraint>,
    pub source: String,
    /// Set when the set is the epigraph of this function; lets samplers
    /// reach boundary points directly.
    pub epigraph_of: Option<Box<FuncDesc>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceResult {
    pub distance: f64,
    pub nearest: Vec<Vector>,
    /// True when the projection came from local search only.
    pub local_only: bool,
}

impl SetDesc {
    pub fn parse(src: &str, dim: Option<usize>) -> Result<Self> {
        let d = directives(src)?;
        let declared = d.dim.or(dim);
        let cons = parse_constraints(src, declared)?;
        let arity = cons.iter().map(|(e, _, _)| e.arity()).max().unwrap_or(0);
        let dim = declared.unwrap_or(arity.max(1));
        Ok(Self {
            dim,
            constraints: cons
                .into_iter()
                .map(|(expr, rel, rhs)| Constraint { expr, rel, rhs })
                .collect(),
            source: src.trim().to_string(),
            epigraph_of: None,
        })
    }

    pub fn whole(dim: usize) -> Self {
        Self {
            dim,
            constraints: vec![],
            source: String::new(),
            epigraph_of: None,
        }
    }

    /// `epi f = {(x, y) : f(x) - y <= 0}` in `R^{n+1}`.
    pub fn epigraph(f: &FuncDesc) -> Result<Self> {
        let Some(e) = f.expr() else {
            return Err(Error::Capability(
                "epigraph construction needs an expression-valued function".into(),
            ));
        };
        let n = f.dim;
        let g = Expr::sub(e.clone(), Expr::var(n));
        Ok(Self {
            dim: n + 1,
            source: format!("{g} <= 0"),
            constraints: vec![Constraint {
                expr: g,
                rel: Relation::Le,
                rhs: 0.0,
            }],
            epigraph_of: Some(Box::new(f.clone())),
        })
    }

    pub fn kind(&self) -> SetKind {
        let affine = self
            .constraints
            .iter()
            .filter(|c| as_affine(&c.expr, self.dim).is_some())
            .count();
        if affine == self.constraints.len() {
            SetKind::Polyhedral
        } else if affine == 0 {
            SetKind::Smooth
        } else {
            SetKind::Mixed
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

    /// Constraint values in `h(x) <= 0` form; equalities contribute both signs.
    pub fn le_values(&self, x: &[f64]) -> Vec<f64> {
        let mut out = Vec::new();
        for c in &self.constraints {
            let mut of = false;
            let g = eval_expr(&c.expr, x, &mut of)
                .map(|v| v.to_f64())
                .unwrap_or(f64::NAN);
            let g = if g.is_nan() { f64::INFINITY } else { g };
            match c.rel {
                Relation::Le => out.push(g - c.rhs),
                Relation::Ge => out.push(c.rhs - g),
                Relation::Eq => {
                    out.push(g - c.rhs);
                    out.push(c.rhs - g);
                }
            }
        }
        out
    }

    /// Largest constraint violation (0 inside).
    pub fn violation(&self, x: &[f64]) -> f64 {
        self.le_values(x).into_iter().fold(0.0, f64::max)
    }

    fn feas_tol(tol: &Tolerance, x: &[f64]) -> f64 {
        tol.abs_tol * (1e-6 * norm_inf(x)).max(1.0)
    }

    pub fn contains(&self, x: &[f64], tol: &Tolerance) -> Result<bool> {
        self.check_dim(x)?;
        Ok(self.violation(x) <= Self::feas_tol(tol, x))
    }

    /// Gradients (in `h <= 0` form) of constraints with `h(x) >= -act`.
    pub fn active_normals(&self, x: &[f64], act: f64) -> Vec<Vector> {
        let mut out = Vec::new();
        for c in &self.constraints {
            let g = grad_expr(&c.expr, x, 0.0);
            let (Some(v), Some(gv)) = (g.value.as_finite(), g.gradient) else {
                continue;
            };
            let push_le = |sign: f64, out: &mut Vec<Vector>| {
                if sign * (v - c.rhs) >= -act {
                    out.push(gv.iter().map(|d| sign * d).collect());
                }
            };
            match c.rel {
                Relation::Le => push_le(1.0, &mut out),
                Relation::Ge => push_le(-1.0, &mut out),
                Relation::Eq => {
                    push_le(1.0, &mut out);
                    push_le(-1.0, &mut out);
                }
            }
        }
        out
    }

    /// `(h(x), ∇h(x))` in `h <= 0` form for constraints differentiable at `x`.
    pub fn values_and_normals(&self, x: &[f64]) -> Vec<(f64, Vector)> {
        let mut out = Vec::new();
        for c in &self.constraints {
            let g = grad_expr(&c.expr, x, 0.0);
            let (Some(v), Some(gv)) = (g.value.as_finite(), g.gradient) else {
                continue;
            };
            let signs: &[f64] = match c.rel {
                Relation::Le => &[1.0],
                Relation::Ge => &[-1.0],
                Relation::Eq => &[1.0, -1.0],
            };
            for &s in signs {
                out.push((s * (v - c.rhs), gv.iter().map(|d| s * d).collect()));
            }
        }
        out
    }

    /// Union of polyhedral cells when every constraint is piecewise affine.
    pub fn polyhedral_cells(&self) -> Result<Vec<Cell>> {
        let mut acc: Vec<Cell> = vec![vec![]];
        for c in &self.constraints {
            let cells = match c.rel {
                Relation::Le => sublevel_cells(&c.expr, self.dim, c.rhs, 1.0)?,
                Relation::Ge => sublevel_cells(&c.expr, self.dim, c.rhs, -1.0)?,
                Relation::Eq => {
                    let a = sublevel_cells(&c.expr, self.dim, c.rhs, 1.0)?;
                    let b = sublevel_cells(&c.expr, self.dim, c.rhs, -1.0)?;
                    and_cells(&a, &b, self.dim)?
                }
            };
            acc = and_cells(&acc, &cells, self.dim)?;
        }
        Ok(acc)
    }

    pub fn is_piecewise_polyhedral(&self) -> bool {
        self.polyhedral_cells().is_ok()
    }

    /// Euclidean distance and nearest point. Exact on piecewise-polyhedral
    /// sets; local multistart search otherwise.
    pub fn distance(&self, y: &[f64]) -> Result<DistanceResult> {
        self.projector().distance(y)
    }

    /// Distance oracle with the polyhedral cells computed once.
    pub fn projector(&self) -> Projector<'_> {
        Projector {
            set: self,
            cells: self.polyhedral_cells().ok(),
            starts: 16,
        }
    }

    /// Local projection from `starts` deterministic starting points.
    pub fn local_projection(&self, y: &[f64], starts: usize) -> Result<DistanceResult> {
        if self.violation(y) <= 1e-12 * (1.0 + norm_inf(y)) {
            return Ok(DistanceResult {
                distance: 0.0,
                nearest: vec![y.to_vec()],
                local_only: true,
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let rho = 1.0f64.max(0.1 * norm(y));
        let mut best: Option<Vector> = None;
        for k in 0..starts.max(1) {
            let start: Vector = if k == 0 {
                y.to_vec()
            } else {
                let u: Vector = (0..self.dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let u = normalize(&u).unwrap_or_else(|| crate::linalg::unit(self.dim, 0));
                axpy(y, rho, &u)
            };
            let Some(mut x) = self.restore(&start) else {
                continue;
            };
            let mut alpha = 0.5;
            for _ in 0..200 {
                let z: Vector = x.iter().zip(y).map(|(a, b)| a + alpha * (b - a)).collect();
                match self.restore(&z) {
                    Some(xn) if dist(&xn, y) < dist(&x, y) - 1e-15 * (1.0 + norm(y)) => {
                        x = xn;
                        alpha = (alpha * 2.0).min(1.0);
                    }
                    _ => {
                        alpha *= 0.5;
                        if alpha < 1e-10 {
                            break;
                        }
                    }
                }
            }
            if best.as_ref().is_none_or(|b| dist(&x, y) < dist(b, y)) {
                best = Some(x);
            }
        }
        let p = best.ok_or(Error::Infeasible)?;
        Ok(DistanceResult {
            distance: dist(&p, y),
            nearest: vec![p],
            local_only: true,
        })
    }

    /// Gauss-Newton restoration onto the most violated constraint, repeated.
    pub(crate) fn restore(&self, start: &[f64]) -> Option<Vector> {
        let mut z = start.to_vec();
        for it in 0..80 {
            let vals = self.le_values(&z);
            let tol = 1e-12 * (1.0 + norm_inf(&z));
            let (k, h) = vals
                .iter()
                .enumerate()
                .fold((usize::MAX, tol), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
            if k == usize::MAX {
                return Some(z);
            }
            if !h.is_finite() {
                return None;
            }
            let (ci, sign) = self.le_index(k);
            let c = &self.constraints[ci];
            let g = grad_expr(&c.expr, &z, 0.0);
            match g.gradient {
                Some(gv) if norm(&gv) > 1e-14 => {
                    let gg = dot(&gv, &gv);
                    z = axpy(&z, -sign * h / gg, &gv);
                }
                _ => {
                    // flat or kinked spot: nudge deterministically
                    let j = it % self.dim;
                    z[j] += 1e-3 * (1.0 + z[j].abs());
                }
            }
        }
        None
    }

    fn le_index(&self, k: usize) -> (usize, f64) {
        let mut idx = 0;
        for (ci, c) in self.constraints.iter().enumerate() {
            let signs: &[f64] = match c.rel {
                Relation::Le => &[1.0],
                Relation::Ge => &[-1.0],
                Relation::Eq => &[1.0, -1.0],
            };
            for &s in signs {
                if idx == k {
                    return (ci, s);
                }
                idx += 1;
            }
        }
        unreachable!("constraint index out of range")
    }
}

/// Cached distance oracle for repeated queries.
pub struct Projector<'a> {
    set: &'a SetDesc,
    cells: Option<Vec<Cell>>,
    starts: usize,
}

impl Projector<'_> {
    pub fn is_exact(&self) -> bool {
        self.cells.is_some()
    }

    /// Number of local-search starts on non-polyhedral sets.
    pub fn with_starts(mut self, starts: usize) -> Self {
        self.starts = starts;
        self
    }

    pub fn distance(&self, y: &[f64]) -> Result<DistanceResult> {
        self.set.check_dim(y)?;
        let Some(cells) = &self.cells else {
            return self.set.local_projection(y, self.starts);
        };
        if cells.is_empty() {
            return Err(Error::Infeasible);
        }
        let mut best: Option<Vector> = None;
        for cell in cells {
            if let Some(p) = project_cell(cell, y) {
                if best.as_ref().is_none_or(|b| dist(&p, y) < dist(b, y)) {
                    best = Some(p);
                }
            }
        }
        let p = best.ok_or(Error::Infeasible)?;
        Ok(DistanceResult {
            distance: dist(&p, y),
            nearest: vec![p],
            local_only: false,
        })
    }
}

/// Exact projection onto `{x : a_i·x <= b_i}` by active-set enumeration.
fn project_cell(cell: &Cell, y: &[f64]) -> Option<Vector> {
    let dim = y.len();
    let feasible = |z: &[f64]| {
        cell.iter()
            .all(|h| dot(&h.a, z) <= h.b + 1e-9 * (1.0 + h.b.abs() + norm_inf(z)))
    };
    if cell.iter().all(|h| dot(&h.a, y) <= h.b) {
        return Some(y.to_vec());
    }
    let m = cell.len();
    let mut best: Option<Vector> = None;
    let kmax = dim.min(m);
    for k in 1..=kmax {
        let mut idx: Vec<usize> = (0..k).collect();
        loop {
            let rows: Vec<&Vector> = idx.iter().map(|&i| &cell[i].a).collect();
            let gram: Vec<Vector> = rows
                .iter()
                .map(|r| rows.iter().map(|s| dot(r, s)).collect())
                .collect();
            let rhs: Vec<f64> = idx.iter().map(|&i| dot(&cell[i].a, y) - cell[i].b).collect();
            if let Some(lam) = crate::linalg::solve_square(&gram, &rhs) {
                if lam.iter().all(|l| *l >= -1e-12) && lam.iter().all(|l| l.is_finite()) {
                    let mut z = y.to_vec();
                    for (l, r) in lam.iter().zip(&rows) {
                        z = axpy(&z, -l, r);
                    }
                    if feasible(&z) && best.as_ref().is_none_or(|b| dist(&z, y) < dist(b, y)) {
                        best = Some(z);
                    }
                }
            }
            // next combination
            let mut i = k;
            let mut advanced = false;
            while i > 0 {
                i -= 1;
                if idx[i] < m - k + i {
                    idx[i] += 1;
                    for j in i + 1..k {
                        idx[j] = idx[j - 1] + 1;
                    }
                    advanced = true;
                    break;
                }
            }
            if !advanced {
                break;
            }
        }
    }
    best
}

#[derive(Serialize, Deserialize)]
struct SetRepr {
    dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    source: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    epigraph_of: Option<FuncDesc>,
}

impl Serialize for SetDesc {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let repr = match &self.epigraph_of {
            Some(f) => SetRepr {
                dim: self.dim,
                source: None,
                epigraph_of: Some((**f).clone()),
            },
            None => SetRepr {
                dim: self.dim,
                source: Some(self.source.clone()),
                epigraph_of: None,
            },
        };
        repr.serialize(s)
    }
}

impl<'de> Deserialize<'de> for SetDesc {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = SetRepr::deserialize(d)?;
        let out = match (r.epigraph_of, r.source) {
            (Some(f), _) => SetDesc::epigraph(&f),
            (None, Some(src)) => SetDesc::parse(&src, Some(r.dim)),
            (None, None) => Ok(SetDesc::whole(r.dim)),
        };
        out.map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn halfspace_distance() {
        let c = SetDesc::parse("x2 <= 0", Some(2)).unwrap();
        assert_eq!(c.kind(), SetKind::Polyhedral);
        let d = c.distance(&[0.0, 2.0]).unwrap();
        assert!((d.distance - 2.0).abs() < 1e-12);
        assert!(dist(&d.nearest[0], &[0.0, 0.0]) < 1e-12);
        assert!(!d.local_only);
        assert_eq!(c.distance(&[3.0, -1.0]).unwrap().distance, 0.0);
    }

    #[test]
    fn hyperbola_set_projection_is_local() {
        let c = SetDesc::parse("x1 >= 0; x2 >= 0; x1*x2 >= 1", None).unwrap();
        assert_eq!(c.kind(), SetKind::Mixed);
        let t = Tolerance::default();
        assert!(c.contains(&[1.0, 1.0], &t).unwrap());
        assert!(!c.contains(&[0.5, 0.5], &t).unwrap());
        let d = c.distance(&[0.0, 0.0]).unwrap();
        assert!(d.local_only);
        assert!((d.distance - 2f64.sqrt()).abs() < 1e-4, "{}", d.distance);
    }

    #[test]
    fn infeasible_polyhedron() {
        let c = SetDesc::parse("x1 <= -1; x1 >= 1", None).unwrap();
        assert!(matches!(c.distance(&[0.0]), Err(Error::Infeasible)));
    }
}
