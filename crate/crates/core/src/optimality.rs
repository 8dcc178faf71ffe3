//! Necessary optimality conditions at infinity: the Fermat rule and its
//! set-constrained counterpart, both gated by a sampled check that the
//! infimum really escapes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cones::cones_at_infinity;
use crate::error::{Error, Result};
use crate::estimators::upper_subderivative;
use crate::expr::{FuncDesc, SetDesc};
use crate::ext_real::{ExtendedReal, NegInf, PosInf};
use crate::geometry::{minkowski_contains_zero, PolyCone, PolyConvexSet};
use crate::ladder::{classify, sphere_directions, IndexSet, LadderConfig, RungRecord, Trend};
use crate::linalg::{add, axpy, norm, normalize, scale, unit, Vector};
use crate::subdiff::{classify_lipschitz_at_infinity, subgradients_best, Lipschitz, Route};
use crate::tolerance::Tolerance;

const DESCENT_ITERS: usize = 200;
const DESCENT_STARTS: usize = 4;
const CONIC_SAMPLES: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimizingSequenceReport {
    /// Best point of every annulus that improves (or ties) the running
    /// minimum, innermost first.
    pub points: Vec<Vector>,
    pub values: Vec<ExtendedReal>,
    /// Withheld when the running minima oscillate.
    pub inf_estimate: Option<ExtendedReal>,
    pub trend: Trend,
    pub escapes_to_infinity: bool,
    pub attained_flag: bool,
    /// `(outer radius, best value)` per annulus; `None` when no feasible
    /// sample was found.
    pub annuli: Vec<(f64, Option<ExtendedReal>)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl MinimizingSequenceReport {
    pub fn unbounded_below(&self) -> bool {
        self.inf_estimate == Some(NegInf)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionKind {
    FermatInfinity,
    ConstrainedInfinity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateVerdict {
    Holds,
    Violated,
    NotApplicable,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionalRow {
    pub direction: Vector,
    pub estimate: Option<ExtendedReal>,
    pub error_bar: f64,
    /// `None` when the estimate was withheld.
    pub nonnegative: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub xi: Vector,
    pub w: Vector,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimalityCertificate {
    pub condition: ConditionKind,
    pub verdict: CertificateVerdict,
    /// Outcome of the membership test and the directional table. Reported
    /// even when the verdict is `not_applicable` and the condition could be
    /// evaluated.
    pub holds: bool,
    pub route: Option<Route>,
    /// Residual of the membership certificate.
    pub margin: Option<f64>,
    pub decomposition: Option<Decomposition>,
    pub directional_check: Vec<DirectionalRow>,
    /// `"witnessed"` or `"unverified"`.
    pub hypothesis: String,
    pub hypothesis_witness: Option<Vector>,
    pub subgradients: Option<PolyConvexSet>,
    pub normal_cone: Option<PolyCone>,
    pub sequence: MinimizingSequenceReport,
    pub notes: Vec<String>,
}

// ---------------------------------------------------------------------------
// Minimizing sequences

struct Search<'a> {
    f: &'a FuncDesc,
    c: Option<&'a SetDesc>,
    tol: Tolerance,
}

impl Search<'_> {
    /// Finite value at a feasible point; `None` for infeasible points,
    /// domain errors and overflow. Overflow towards `−∞` is reported as
    /// `−∞`.
    fn value(&self, x: &[f64]) -> Result<Option<ExtendedReal>> {
        if let Some(c) = self.c {
            if !c.contains(x, &self.tol)? {
                return Ok(None);
            }
        }
        match self.f.eval_checked(x) {
            Ok(o) if o.overflow => Ok((o.value == NegInf).then_some(NegInf)),
            Ok(o) if o.value == PosInf => Ok(None),
            Ok(o) => Ok(Some(o.value)),
            Err(Error::Eval { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    }

    fn clamp(x: Vector, lo: f64, hi: f64) -> Option<Vector> {
        let r = norm(&x);
        if r > hi {
            Some(scale(&x, hi / r))
        } else if r < lo {
            (r > 0.0).then(|| scale(&x, lo / r))
        } else {
            Some(x)
        }
    }

    /// Pattern search inside the annulus `lo <= ‖x‖ <= hi`, trying the
    /// negative gradient first when it exists.
    fn descend(&self, mut x: Vector, mut fx: f64, lo: f64, hi: f64) -> Result<(Vector, ExtendedReal)> {
        let n = x.len();
        let mut step = (hi - lo).max(hi / 4.0) / 4.0;
        let floor = 1e-12_f64.max(1e-15 * hi);
        for _ in 0..DESCENT_ITERS {
            if step < floor {
                break;
            }
            let mut dirs: Vec<Vector> = Vec::with_capacity(2 * n + 1);
            if let Ok(g) = self.f.grad(&x, &self.tol) {
                if let Some(d) = g.gradient.and_then(|g| normalize(&g)) {
                    dirs.push(scale(&d, -1.0));
                }
            }
            for i in 0..n {
                dirs.push(unit(n, i));
                dirs.push(scale(&unit(n, i), -1.0));
            }
            let mut best: Option<(Vector, f64)> = None;
            for d in dirs {
                let Some(y) = Self::clamp(axpy(&x, step, &d), lo, hi) else {
                    continue;
                };
                match self.value(&y)? {
                    Some(NegInf) => return Ok((y, NegInf)),
                    Some(ExtendedReal::Finite(v)) if v < best.as_ref().map_or(fx, |b| b.1) => {
                        best = Some((y, v));
                    }
                    _ => {}
                }
            }
            match best {
                Some((y, v)) => {
                    x = y;
                    fx = v;
                }
                None => step /= 2.0,
            }
        }
        Ok((x, ExtendedReal::finite(fx)))
    }

    fn annulus(&self, lo: f64, hi: f64, dirs: &[Vector]) -> Result<Option<(Vector, ExtendedReal)>> {
        let n = self.f.dim;
        let mut radii = vec![hi, (lo.max(hi / 100.0) * hi).sqrt()];
        if lo == 0.0 {
            radii.push(hi / 4.0);
        } else {
            radii.push(lo);
        }
        let mut cands: Vec<(Vector, f64)> = Vec::new();
        if lo == 0.0 {
            let o = vec![0.0; n];
            match self.value(&o)? {
                Some(NegInf) => return Ok(Some((o, NegInf))),
                Some(ExtendedReal::Finite(v)) => cands.push((o, v)),
                _ => {}
            }
        }
        for r in radii {
            for d in dirs {
                let x = scale(d, r);
                match self.value(&x)? {
                    Some(NegInf) => return Ok(Some((x, NegInf))),
                    Some(ExtendedReal::Finite(v)) => cands.push((x, v)),
                    _ => {}
                }
            }
        }
        // lower value first, larger norm on ties
        let tie = |v: f64| self.tol.abs_tol * v.abs().max(1.0);
        let order = |a: &(Vector, f64), b: &(Vector, f64)| {
            if (a.1 - b.1).abs() <= tie(a.1) {
                norm(&b.0).total_cmp(&norm(&a.0))
            } else {
                a.1.total_cmp(&b.1)
            }
        };
        cands.sort_by(|a, b| a.1.total_cmp(&b.1).then(norm(&b.0).total_cmp(&norm(&a.0))));
        let mut best: Option<(Vector, f64)> = None;
        for (x, v) in cands.into_iter().take(DESCENT_STARTS) {
            let (y, fy) = self.descend(x, v, lo, hi)?;
            let fy = match fy {
                NegInf => return Ok(Some((y, NegInf))),
                ExtendedReal::Finite(v) => v,
                PosInf => continue,
            };
            let better = match &best {
                None => true,
                Some(b) => order(&(y.clone(), fy), b) == std::cmp::Ordering::Less,
            };
            if better {
                best = Some((y, fy));
            }
        }
        Ok(best.map(|(x, v)| (x, ExtendedReal::finite(v))))
    }
}

/// Best values over the ball of the smallest radius and over each annulus
/// between consecutive radii, with local descent in every region.
pub fn find_minimizing_sequence(
    f: &FuncDesc,
    c: Option<&SetDesc>,
    cfg: &LadderConfig,
    tol: &Tolerance,
) -> Result<MinimizingSequenceReport> {
    cfg.validate()?;
    if let Some(c) = c {
        if c.dim != f.dim {
            return Err(Error::DimensionMismatch {
                expected: f.dim,
                found: c.dim,
            });
        }
    }
    let search = Search { f, c, tol: *tol };
    let dirs = sphere_directions(f.dim, cfg.samples_per_shell, cfg.seed);
    let mut radii = cfg.radii.clone();
    radii.sort_by(f64::total_cmp);

    let mut regions: Vec<(f64, Option<(Vector, ExtendedReal)>)> = Vec::new();
    let mut lo = 0.0;
    for &hi in &radii {
        regions.push((hi, search.annulus(lo, hi, &dirs)?));
        lo = hi;
    }

    let mut notes = Vec::new();
    let annuli: Vec<(f64, Option<ExtendedReal>)> =
        regions.iter().map(|(r, b)| (*r, b.as_ref().map(|b| b.1))).collect();

    // running minima and the retained sequence
    let mut records = Vec::new();
    let mut points = Vec::new();
    let mut values = Vec::new();
    let mut run: Option<ExtendedReal> = None;
    for (r, b) in &regions {
        if let Some((x, v)) = b {
            let improves = match run {
                None => true,
                Some(m) => match (v.as_finite(), m.as_finite()) {
                    (Some(a), Some(b)) => a <= b + tol.abs_tol * b.abs().max(1.0),
                    _ => *v <= m,
                },
            };
            if improves {
                points.push(x.clone());
                values.push(*v);
                run = Some(match run {
                    Some(m) => m.min(*v),
                    None => *v,
                });
            }
        }
        records.push(RungRecord {
            radius: *r,
            step: 0.0,
            value: run,
            note: None,
        });
    }
    if records.iter().all(|r| r.value.is_none()) {
        notes.push("no feasible sample in any region".into());
        return Ok(MinimizingSequenceReport {
            points,
            values,
            inf_estimate: None,
            trend: Trend::Oscillating,
            escapes_to_infinity: false,
            attained_flag: false,
            annuli,
            notes,
        });
    }
    let (inf_estimate, trend, _) = classify(&records, cfg)?;

    if inf_estimate == Some(NegInf) {
        return Ok(MinimizingSequenceReport {
            points,
            values,
            inf_estimate,
            trend,
            escapes_to_infinity: true,
            attained_flag: false,
            annuli,
            notes,
        });
    }

    let close = |v: f64, m: f64| v <= m + tol.abs_tol * m.abs().max(1.0);
    let attained_flag = match (inf_estimate.and_then(|v| v.as_finite()), &regions[0].1) {
        (Some(m), Some((_, ExtendedReal::Finite(v)))) => close(*v, m),
        _ => false,
    };

    // the outermost region keeps up with every inner one while the
    // per-region minimizers move outwards
    let k = regions.len();
    let escapes_to_infinity = k >= 3
        && match &regions[k - 1].1 {
            Some((_, ExtendedReal::Finite(top))) => {
                let inner_best = regions[..k - 1]
                    .iter()
                    .filter_map(|(_, b)| b.as_ref().and_then(|b| b.1.as_finite()))
                    .fold(f64::INFINITY, f64::min);
                let top3: Option<Vec<f64>> =
                    regions[k - 3..].iter().map(|(_, b)| b.as_ref().map(|b| norm(&b.0))).collect();
                close(*top, inner_best)
                    && top3.is_some_and(|r| r.windows(2).all(|w| w[1] > w[0]))
            }
            _ => false,
        };
    if regions.iter().any(|(_, b)| b.is_none()) {
        notes.push("some regions had no feasible sample".into());
    }
    Ok(MinimizingSequenceReport {
        points,
        values,
        inf_estimate,
        trend,
        escapes_to_infinity,
        attained_flag,
        annuli,
        notes,
    })
}

// ---------------------------------------------------------------------------
// Certificates

/// `None` when the condition applies, otherwise the reason it does not.
fn applicability(seq: &MinimizingSequenceReport) -> (CertificateVerdict, Option<String>) {
    match seq.inf_estimate {
        Some(NegInf) => (CertificateVerdict::NotApplicable, Some("unbounded below".into())),
        None => (
            CertificateVerdict::Inconclusive,
            Some("infimum estimate withheld".into()),
        ),
        Some(_) if seq.attained_flag => (
            CertificateVerdict::NotApplicable,
            Some("infimum attained at a bounded point".into()),
        ),
        Some(_) if !seq.escapes_to_infinity => (
            CertificateVerdict::NotApplicable,
            Some("no escaping minimizing sequence found".into()),
        ),
        Some(_) => (CertificateVerdict::Holds, None),
    }
}

fn subgradients(f: &FuncDesc, cfg: &LadderConfig, tol: &Tolerance) -> Result<(PolyConvexSet, Route, Tolerance)> {
    let lipschitz = classify_lipschitz_at_infinity(f, cfg, tol)
        .map(|v| v.verdict == Lipschitz::LipschitzAtInfinity)
        .unwrap_or(false);
    let s = subgradients_best(f, cfg, tol, lipschitz)?;
    // sampled routes are only good to the ladder tolerance
    let mtol = match s.route {
        Route::EpigraphPolar => *tol,
        _ => Tolerance::new(tol.abs_tol.max(cfg.conv_abs), tol.rel_tol.max(cfg.conv_rel), tol.cone_angle_tol)?,
    };
    Ok((s.set, s.route, mtol))
}

fn empty_certificate(
    condition: ConditionKind,
    verdict: CertificateVerdict,
    seq: MinimizingSequenceReport,
    notes: Vec<String>,
) -> OptimalityCertificate {
    OptimalityCertificate {
        condition,
        verdict,
        holds: false,
        route: None,
        margin: None,
        decomposition: None,
        directional_check: vec![],
        hypothesis: "unverified".into(),
        hypothesis_witness: None,
        subgradients: None,
        normal_cone: None,
        sequence: seq,
        notes,
    }
}

/// `0 ∈ ∂f(∞)` for functions whose infimum is finite and only approached
/// along sequences escaping to infinity.
pub fn fermat_at_infinity(f: &FuncDesc, cfg: &LadderConfig, tol: &Tolerance) -> Result<OptimalityCertificate> {
    let seq = find_minimizing_sequence(f, None, cfg, tol)?;
    let (pre, reason) = applicability(&seq);
    let mut notes: Vec<String> = reason.into_iter().collect();
    if pre == CertificateVerdict::Inconclusive || seq.unbounded_below() || !seq.escapes_to_infinity {
        return Ok(empty_certificate(ConditionKind::FermatInfinity, pre, seq, notes));
    }
    let (set, route, mtol) = subgradients(f, cfg, tol)?;
    let zero = vec![0.0; f.dim];
    let (holds, cert) = minkowski_contains_zero(&set, &PolyCone::zero(f.dim), &mtol)?;
    let holds = holds && set.contains(&zero, &mtol)?;
    let verdict = match pre {
        CertificateVerdict::Holds if holds => CertificateVerdict::Holds,
        CertificateVerdict::Holds => CertificateVerdict::Violated,
        other => other,
    };
    if set.is_empty() {
        notes.push("subgradient set at infinity is empty".into());
    }
    Ok(OptimalityCertificate {
        condition: ConditionKind::FermatInfinity,
        verdict,
        holds,
        route: Some(route),
        margin: cert.as_ref().map(|c| c.residual),
        decomposition: None,
        directional_check: vec![],
        hypothesis: "witnessed".into(),
        hypothesis_witness: None,
        subgradients: Some(set),
        normal_cone: None,
        sequence: seq,
        notes,
    })
}

/// Tangent generators followed by seeded conic combinations of them.
fn tangent_directions(t: &PolyCone, seed: u64) -> Vec<Vector> {
    let gens = t.generators();
    let mut out = gens.clone();
    if gens.len() >= 2 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5bd1_e995);
        for _ in 0..CONIC_SAMPLES {
            let mut v = vec![0.0; t.dim];
            for g in &gens {
                v = add(&v, &scale(g, rng.gen_range(0.0..1.0)));
            }
            if let Some(u) = normalize(&v) {
                out.push(u.iter().map(|x| (x * 4096.0).round() / 4096.0).collect());
            }
        }
    }
    out
}

/// `0 ∈ ∂f(∞) + N_C(∞)` together with `f↑(∞; v) >= 0` on sampled tangent
/// directions of `C` at infinity.
pub fn constrained_condition_at_infinity(
    f: &FuncDesc,
    c: &SetDesc,
    cfg: &LadderConfig,
    tol: &Tolerance,
) -> Result<OptimalityCertificate> {
    let seq = find_minimizing_sequence(f, Some(c), cfg, tol)?;
    let (pre, reason) = applicability(&seq);
    let mut notes: Vec<String> = reason.into_iter().collect();
    if pre == CertificateVerdict::Inconclusive || seq.unbounded_below() || !seq.escapes_to_infinity {
        return Ok(empty_certificate(ConditionKind::ConstrainedInfinity, pre, seq, notes));
    }
    let pair = match cones_at_infinity(c, &IndexSet::all(c.dim), cfg, tol) {
        Ok(p) => p,
        Err(e @ (Error::UnboundedCheck(_) | Error::Inconclusive(_) | Error::Sampling(_))) => {
            notes.push(format!("cones at infinity unavailable: {e}"));
            return Ok(empty_certificate(
                ConditionKind::ConstrainedInfinity,
                CertificateVerdict::Inconclusive,
                seq,
                notes,
            ));
        }
        Err(e) => return Err(e),
    };
    let (set, route, mtol) = subgradients(f, cfg, tol)?;
    let (member, cert) = minkowski_contains_zero(&set, &pair.normal, &mtol)?;

    let mut rows = Vec::new();
    let mut witness = None;
    for v in tangent_directions(&pair.tangent, cfg.seed) {
        let est = upper_subderivative(f, &v, cfg)?;
        let bar = if est.error_bar.is_finite() { est.error_bar } else { 0.0 };
        let nonnegative = est.value.map(|x| x.to_f64() >= -(bar + cfg.conv_abs));
        rows.push(DirectionalRow {
            direction: v,
            estimate: est.value,
            error_bar: est.error_bar,
            nonnegative,
        });
    }
    // qualification: some direction with finite f↑ interior to T
    if pair.tangent.has_interior() {
        let gens = pair.tangent.generators();
        let centre = gens.iter().fold(vec![0.0; f.dim], |acc, g| add(&acc, g));
        if let Some(u) = normalize(&centre) {
            if pair.tangent.lineality.is_empty() || gens.len() > 2 * pair.tangent.lineality.len() {
                let est = upper_subderivative(f, &u, cfg)?;
                if est.value.is_some_and(|x| x < PosInf) {
                    witness = Some(u);
                }
            }
        }
        if witness.is_none() && pair.tangent.is_whole() {
            witness = Some(unit(f.dim, 0));
        }
    }
    let table_ok = rows.iter().all(|r| r.nonnegative != Some(false));
    if rows.iter().any(|r| r.nonnegative.is_none()) {
        notes.push("some directional estimates were withheld".into());
    }
    let holds = member && table_ok;
    let verdict = match pre {
        CertificateVerdict::Holds if holds => CertificateVerdict::Holds,
        CertificateVerdict::Holds => CertificateVerdict::Violated,
        other => other,
    };
    Ok(OptimalityCertificate {
        condition: ConditionKind::ConstrainedInfinity,
        verdict,
        holds,
        route: Some(route),
        margin: cert.as_ref().map(|c| c.residual),
        decomposition: cert.map(|c| Decomposition {
            xi: c.xi,
            w: c.w,
            residual: c.residual,
        }),
        directional_check: rows,
        hypothesis: if witness.is_some() { "witnessed" } else { "unverified" }.into(),
        hypothesis_witness: witness,
        subgradients: Some(set),
        normal_cone: Some(pair.normal),
        sequence: seq,
        notes,
    })
}
