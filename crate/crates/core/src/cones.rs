//! Tangent and normal cones at infinity: exact face enumeration for
//! (unions of) polyhedra, limiting normals for smooth constraint sets.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{set_rungs, tangent_membership, Membership, SetShell};
use crate::expr::pa::{Cell, Halfspace};
use crate::expr::{FuncDesc, SetDesc};
use crate::geometry::{PolyCone, MAX_EXACT_DIM};
use crate::ladder::{IndexSet, LadderConfig};
use crate::linalg::{angle, dot, norm, normalize, Vector};
use crate::lp::{Lp, LpOutcome, Rel, FREE};
use crate::tolerance::Tolerance;

/// Hyperplane cap for the face enumeration.
pub const MAX_HYPERPLANES: usize = 64;

const FACE_MARGIN: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConeMethod {
    ExactPolyhedral,
    SampledLimitingNormals,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaceRecord {
    pub face_id: usize,
    /// Hyperplanes (indices into the arrangement) containing the face.
    pub active: Vec<usize>,
    pub sample: Vector,
    pub unbounded: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConePairAtInfinity {
    pub tangent: PolyCone,
    pub normal: PolyCone,
    pub method: ConeMethod,
    pub index_set: IndexSet,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub faces: Vec<FaceRecord>,
}

/// Normalized hyperplane `a·x = b` with `a` of unit length and first nonzero
/// entry positive.
#[derive(Clone, Debug)]
struct Hyperplane {
    a: Vector,
    b: f64,
}

/// Cell constraint `o·(a_h·x − b_h) <= 0`.
type Oriented = (usize, i8);

fn register(hs: &mut Vec<Hyperplane>, h: &Halfspace) -> Option<Oriented> {
    let n = norm(&h.a);
    if n <= 1e-14 {
        return None;
    }
    let mut a: Vector = h.a.iter().map(|x| x / n).collect();
    let mut b = h.b / n;
    let lead = a.iter().find(|x| x.abs() > 1e-12).copied().unwrap_or(1.0);
    let o: i8 = if lead < 0.0 { -1 } else { 1 };
    if o < 0 {
        a.iter_mut().for_each(|x| *x = -*x);
        b = -b;
    }
    let same = |p: &Hyperplane| {
        (p.b - b).abs() <= 1e-10 * (1.0 + b.abs())
            && p.a.iter().zip(&a).all(|(x, y)| (x - y).abs() <= 1e-12)
    };
    let idx = match hs.iter().position(same) {
        Some(i) => i,
        None => {
            hs.push(Hyperplane { a, b });
            hs.len() - 1
        }
    };
    Some((idx, o))
}

#[derive(Clone, Debug)]
struct Face {
    signs: Vec<i8>,
    point: Vector,
}

/// Relative-interior point of the face with the given sign vector.
fn face_point(hs: &[Hyperplane], signs: &[i8], dim: usize) -> Result<Option<Vector>> {
    let mut lp = Lp::maximize();
    let x = lp.vars(dim, 0.0, FREE);
    let s = lp.var(1.0, (0.0, 1.0));
    for (h, &sg) in hs.iter().zip(signs) {
        let mut terms: Vec<(usize, f64)> = x.iter().zip(&h.a).map(|(&i, &c)| (i, c)).collect();
        match sg {
            0 => lp.constraint(terms, Rel::Eq, h.b),
            -1 => {
                terms.push((s, 1.0));
                lp.constraint(terms, Rel::Le, h.b)
            }
            _ => {
                terms.push((s, -1.0));
                lp.constraint(terms, Rel::Ge, h.b)
            }
        }
    }
    match lp.solve()? {
        LpOutcome::Optimal { x: sol, objective } => {
            let strict = signs.iter().any(|&g| g != 0);
            if strict && objective <= FACE_MARGIN {
                return Ok(None);
            }
            Ok(Some(sol[..dim].to_vec()))
        }
        _ => Ok(None),
    }
}

/// Whether the closure of the face has a recession direction moving `π`.
fn face_unbounded(hs: &[Hyperplane], signs: &[i8], dim: usize, coords: &[usize]) -> Result<bool> {
    for &i in coords {
        for dir in [1.0, -1.0] {
            let mut lp = Lp::maximize();
            let d: Vec<usize> = (0..dim)
                .map(|j| lp.var(if j == i { dir } else { 0.0 }, (-1.0, 1.0)))
                .collect();
            for (h, &sg) in hs.iter().zip(signs) {
                let terms: Vec<(usize, f64)> = d.iter().zip(&h.a).map(|(&k, &c)| (k, c)).collect();
                let rel = match sg {
                    0 => Rel::Eq,
                    -1 => Rel::Le,
                    _ => Rel::Ge,
                };
                lp.constraint(terms, rel, 0.0);
            }
            if let LpOutcome::Optimal { objective, .. } = lp.solve()? {
                if objective > FACE_MARGIN {
                    return Ok(true);
                }
            }
        }
    }
    Ok(false)
}

/// Faces of the arrangement that are unbounded under `π`; faces bounded in
/// `π` are pruned as soon as they appear since their subfaces stay bounded.
fn unbounded_faces(hs: &[Hyperplane], dim: usize, coords: &[usize]) -> Result<Vec<Face>> {
    let mut faces = vec![Face {
        signs: vec![],
        point: vec![0.0; dim],
    }];
    for k in 0..hs.len() {
        let mut next = Vec::new();
        for f in &faces {
            for sg in [-1i8, 0, 1] {
                let mut signs = f.signs.clone();
                signs.push(sg);
                let Some(point) = face_point(&hs[..=k], &signs, dim)? else {
                    continue;
                };
                if face_unbounded(&hs[..=k], &signs, dim, coords)? {
                    next.push(Face { signs, point });
                }
            }
        }
        faces = next;
    }
    Ok(faces)
}

type ConeKey = BTreeSet<Oriented>;

/// Drops cones whose constraint set contains another's (syntactic subset).
fn prune(cones: Vec<ConeKey>) -> Vec<ConeKey> {
    let mut sorted: Vec<ConeKey> = cones.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
    sorted.sort_by_key(|c| c.len());
    let mut out: Vec<ConeKey> = Vec::new();
    for c in sorted {
        if !out.iter().any(|o| o.is_subset(&c)) {
            out.push(c);
        }
    }
    out
}

/// Exact cones at infinity of a union of closed polyhedral cells.
pub fn exact_cones_cells(dim: usize, cells: &[Cell], index: &IndexSet) -> Result<ConePairAtInfinity> {
    if dim > MAX_EXACT_DIM {
        return Err(Error::Capability(format!(
            "exact cones need dimension <= {MAX_EXACT_DIM}, got {dim}"
        )));
    }
    if cells.is_empty() {
        return Err(Error::Infeasible);
    }
    let mut hs = Vec::new();
    let mut oriented: Vec<Vec<Oriented>> = Vec::new();
    for cell in cells {
        oriented.push(cell.iter().filter_map(|h| register(&mut hs, h)).collect());
    }
    if hs.len() > MAX_HYPERPLANES {
        return Err(Error::Capability(format!(
            "face enumeration is capped at {MAX_HYPERPLANES} hyperplanes, got {}",
            hs.len()
        )));
    }
    let coords = index.zero_based();
    let faces = unbounded_faces(&hs, dim, &coords)?;

    let mut records = Vec::new();
    let mut per_face: BTreeSet<Vec<ConeKey>> = BTreeSet::new();
    for (id, face) in faces.iter().enumerate() {
        let mut local: Vec<ConeKey> = Vec::new();
        for cons in &oriented {
            let inside = cons.iter().all(|&(h, o)| o * face.signs[h] <= 0);
            if inside {
                local.push(cons.iter().filter(|&&(h, _)| face.signs[h] == 0).copied().collect());
            }
        }
        if local.is_empty() {
            continue;
        }
        records.push(FaceRecord {
            face_id: id,
            active: (0..hs.len()).filter(|&h| face.signs[h] == 0).collect(),
            sample: face.point.clone(),
            unbounded: true,
        });
        let local = prune(local);
        if local.iter().any(|c| c.is_empty()) {
            continue;
        }
        per_face.insert(local);
    }
    if records.is_empty() {
        return Err(Error::UnboundedCheck(
            "π(C) must be unbounded, but no face of C escapes under π".into(),
        ));
    }
    // ∩_F ∪_j T_j(F), distributed into a union of convex cones
    let mut acc: Vec<ConeKey> = vec![ConeKey::new()];
    for local in &per_face {
        let mut next = Vec::new();
        for a in &acc {
            for c in local {
                next.push(a.union(c).copied().collect());
            }
        }
        acc = prune(next);
    }
    let mut pieces = Vec::new();
    for key in &acc {
        let rows: Vec<Vector> = key
            .iter()
            .map(|&(h, o)| hs[h].a.iter().map(|x| f64::from(o) * x).collect())
            .collect();
        pieces.push(PolyCone::from_halfspaces(dim, rows, vec![])?);
    }
    let tangent = PolyCone::hull_union(&pieces, dim)?.canonical()?;
    let normal = tangent.polar()?;
    Ok(ConePairAtInfinity {
        tangent,
        normal,
        method: ConeMethod::ExactPolyhedral,
        index_set: index.clone(),
        faces: records,
    })
}

/// Exact cones at infinity of a polyhedral (or piecewise-polyhedral) set.
pub fn exact_cones_polyhedral(c: &SetDesc, index: &IndexSet) -> Result<ConePairAtInfinity> {
    let cells = c.polyhedral_cells().map_err(|_| {
        Error::Capability("exact cones need affine constraints; use the sampler".into())
    })?;
    exact_cones_cells(c.dim, &cells, index)
}

/// Cells of `epi f` in `R^{n+1}` from the affine pieces of `f`. Non-affine
/// pieces are accepted only on regions bounded in `x`, which cannot reach
/// infinity; they are replaced by the zero form.
pub fn epigraph_cells(f: &FuncDesc) -> Result<Vec<Cell>> {
    let n = f.dim;
    let mut cells = Vec::new();
    for piece in f.pieces()? {
        let form = match piece.form {
            Some(form) => form,
            None => {
                let all: Vec<usize> = (0..n).collect();
                if !crate::expr::pa::cell_bounded(&piece.region, n, &all)? {
                    return Err(Error::Capability(
                        "a non-affine branch reaches infinity; use the samplers".into(),
                    ));
                }
                crate::expr::pa::AffineForm::constant(n, 0.0)
            }
        };
        let mut cell: Cell = piece
            .region
            .iter()
            .map(|h| {
                let mut a = h.a.clone();
                a.push(0.0);
                Halfspace { a, b: h.b }
            })
            .collect();
        let mut a = form.a.clone();
        a.push(-1.0);
        cell.push(Halfspace { a, b: -form.c });
        cells.push(cell);
    }
    Ok(cells)
}

/// Exact cones at infinity of `epi f`, escaping along the `x` coordinates.
pub fn epigraph_cones_piecewise_affine(f: &FuncDesc) -> Result<ConePairAtInfinity> {
    let cells = epigraph_cells(f)?;
    exact_cones_cells(f.dim + 1, &cells, &IndexSet::all(f.dim))
}

// ---------------------------------------------------------------------------
// sampled limiting normals

/// Gradients of constraints active at `x` in the distance sense
/// `h(x)/‖∇h(x)‖ >= −dist_tol`, normalized.
fn active_unit_normals(c: &SetDesc, x: &[f64], dist_tol: f64) -> Vec<Vector> {
    c.values_and_normals(x)
        .into_iter()
        .filter_map(|(h, g)| {
            let n = norm(&g);
            (n > 1e-300 && h / n >= -dist_tol).then(|| g.iter().map(|v| v / n).collect())
        })
        .collect()
}

/// Agglomerative clustering on the unit sphere; representatives are the
/// normalized means.
pub fn cluster_directions(dirs: &[Vector], threshold: f64) -> Vec<Vector> {
    let mut clusters: Vec<(Vector, Vec<Vector>)> = Vec::new();
    for d in dirs {
        match clusters.iter_mut().find(|(rep, _)| angle(rep, d) <= threshold) {
            Some((rep, members)) => {
                members.push(d.clone());
                let sum = members.iter().fold(vec![0.0; d.len()], |acc, m| {
                    acc.iter().zip(m).map(|(a, b)| a + b).collect()
                });
                *rep = normalize(&sum).unwrap_or_else(|| d.clone());
            }
            None => clusters.push((d.clone(), vec![d.clone()])),
        }
    }
    let mut reps: Vec<Vector> = clusters.into_iter().map(|(r, _)| r).collect();
    reps.sort_by(|a, b| crate::linalg::lex_cmp(a, b));
    reps
}

/// Clusters rung-tagged directions and returns, per cluster, the mean
/// direction on each rung (ordered as the tags).
fn cluster_by_rung(dirs: &[(usize, Vector)], threshold: f64) -> Vec<Vec<Vector>> {
    let mut clusters: Vec<(Vector, Vec<(usize, Vector)>)> = Vec::new();
    for (tag, d) in dirs {
        match clusters.iter_mut().find(|(rep, _)| angle(rep, d) <= threshold) {
            Some((rep, members)) => {
                members.push((*tag, d.clone()));
                let sum = members.iter().fold(vec![0.0; d.len()], |acc, (_, m)| {
                    acc.iter().zip(m).map(|(a, b)| a + b).collect()
                });
                *rep = normalize(&sum).unwrap_or_else(|| d.clone());
            }
            None => clusters.push((d.clone(), vec![(*tag, d.clone())])),
        }
    }
    clusters
        .into_iter()
        .map(|(_, members)| {
            let mut tags: Vec<usize> = members.iter().map(|m| m.0).collect();
            tags.sort_unstable();
            tags.dedup();
            tags.into_iter()
                .filter_map(|t| {
                    let sum = members
                        .iter()
                        .filter(|m| m.0 == t)
                        .fold(vec![0.0; members[0].1.len()], |acc, (_, m)| {
                            acc.iter().zip(m).map(|(a, b)| a + b).collect()
                        });
                    normalize(&sum)
                })
                .collect()
        })
        .collect()
}

/// Limit of a cluster's per-rung means: components that shrink at least
/// geometrically (ratio <= 1/2, constant sign) across the rungs go to zero,
/// the rest keep their outermost value; residue below `floor` is dropped.
fn limit_direction(per_rung: &[Vector], floor: f64) -> Option<Vector> {
    let last = per_rung.last()?;
    let v: Vector = (0..last.len())
        .map(|i| {
            let c: Vec<f64> = per_rung.iter().map(|r| r[i]).collect();
            let vanishing = c.len() >= 2
                && c.windows(2).all(|w| w[0] * w[1] >= 0.0 && w[1].abs() <= 0.5 * w[0].abs());
            if vanishing || c[c.len() - 1].abs() < floor {
                0.0
            } else {
                c[c.len() - 1]
            }
        })
        .collect();
    normalize(&v)
}

/// Limiting normals collected on the three outermost usable shells.
pub fn sampled_normal_cone(
    c: &SetDesc,
    index: &IndexSet,
    cfg: &LadderConfig,
    tol: &Tolerance,
) -> Result<ConePairAtInfinity> {
    cfg.validate()?;
    let shell = SetShell::new(c, index, cfg)?;
    let ladder = set_rungs(&shell, cfg)?;
    let top = ladder.len().saturating_sub(3);
    let mut dirs = Vec::new();
    for (k, (_, pts)) in ladder[top..].iter().enumerate() {
        for x in pts {
            let dist_tol = 1e-9 * (1.0 + crate::linalg::norm_inf(x)).sqrt();
            dirs.extend(active_unit_normals(c, x, dist_tol).into_iter().map(|d| (k, d)));
        }
    }
    let mut reps: Vec<Vector> = cluster_by_rung(&dirs, tol.cone_angle_tol * 1e3)
        .iter()
        .filter_map(|per_rung| limit_direction(per_rung, tol.cone_angle_tol))
        .collect();
    reps.sort_by(|a, b| crate::linalg::lex_cmp(a, b));
    let normal = if reps.is_empty() {
        PolyCone::zero(c.dim)
    } else {
        PolyCone::new(c.dim, reps, vec![])?
    };
    let tangent = normal.polar()?;
    Ok(ConePairAtInfinity {
        tangent,
        normal,
        method: ConeMethod::SampledLimitingNormals,
        index_set: index.clone(),
        faces: vec![],
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointednessReport {
    pub normal_pointed: bool,
    pub tangent_has_interior: bool,
    /// The two facts must agree for a polar pair.
    pub consistent: bool,
}

pub fn pointedness_check(pair: &ConePairAtInfinity, tol: &Tolerance) -> Result<PointednessReport> {
    let normal_pointed = pair.normal.is_pointed(tol)?;
    let tangent_has_interior = pair.tangent.has_interior();
    Ok(PointednessReport {
        normal_pointed,
        tangent_has_interior,
        consistent: normal_pointed == tangent_has_interior,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossCheck {
    pub direction: Vector,
    pub expected: Membership,
    pub sampled: Membership,
    pub agrees: bool,
}

/// Runs the tangent sampler on every tangent generator (expected member)
/// and every normal ray (expected nonmember).
pub fn cross_check_pair(
    c: &SetDesc,
    pair: &ConePairAtInfinity,
    cfg: &LadderConfig,
) -> Result<Vec<CrossCheck>> {
    let mut out = Vec::new();
    let mut probe = |v: Vector, expected: Membership| -> Result<()> {
        let got = tangent_membership(c, &v, &pair.index_set, cfg)?.verdict;
        out.push(CrossCheck {
            agrees: got == expected,
            direction: v,
            expected,
            sampled: got,
        });
        Ok(())
    };
    for g in pair.tangent.generators() {
        probe(g, Membership::Member)?;
    }
    for w in pair.normal.generators() {
        if dot(&w, &w) > 0.0 && !pair.tangent.contains(&w, &Tolerance::default())? {
            probe(w, Membership::Nonmember)?;
        }
    }
    Ok(out)
}

/// Exact cones for polyhedral sets, sampled limiting normals otherwise.
pub fn cones_at_infinity(
    c: &SetDesc,
    index: &IndexSet,
    cfg: &LadderConfig,
    tol: &Tolerance,
) -> Result<ConePairAtInfinity> {
    match exact_cones_polyhedral(c, index) {
        Ok(p) => Ok(p),
        Err(Error::Capability(_)) => sampled_normal_cone(c, index, cfg, tol),
        Err(e) => Err(e),
    }
}
