//! Subgradients at infinity: three routes to `∂f(∞)`, singular
//! subgradients, Lipschitz classification and the sum rule.

use serde::{Deserialize, Serialize};

use crate::cones::{
    cluster_directions, epigraph_cones_piecewise_affine, sampled_normal_cone, ConePairAtInfinity,
};
use crate::error::{Error, Result};
use crate::estimators::{
    clarke_derivative_at_infinity, dagger_derivative, interior_tangent_test, set_rungs,
    upper_subderivative, Interiority, SetShell,
};
use crate::expr::{FuncDesc, SetDesc};
use crate::ext_real::{ext_add, ExtendedReal, NegInf, PosInf};
use crate::geometry::{convex_hull, PolyCone, PolyConvexSet};
use crate::ladder::{
    classify, run_rungs, IndexSet, LadderConfig, LimitEstimate, RungRecord, RungValue,
    ShellSampler,
};
use crate::linalg::{axpy, dist, norm, unit, Vector};
use crate::tolerance::Tolerance;

/// Generator parts shorter than this are treated as zero when slicing.
const SLICE_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    EpigraphPolar,
    GradientSampling,
    SupportReconstruction,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RouteDiagnostics {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    /// `(radius, max ‖∇f‖)` per rung.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gradient_norms: Vec<(f64, f64)>,
    /// `f↑(∞; v)` per grid direction.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub support_estimates: Vec<(Vector, LimitEstimate)>,
    /// Only an outer approximation of the true set.
    #[serde(default)]
    pub outer_approximation: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubgradientSetAtInfinity {
    pub set: PolyConvexSet,
    pub route: Route,
    pub diagnostics: RouteDiagnostics,
}

/// `{ξ : (ξ, −1) ∈ N}`, i.e. `⟨g_x, ξ⟩ <= g_r` for every tangent
/// generator `g = (g_x, g_r)`.
fn slice_normal(pair: &ConePairAtInfinity, n: usize) -> Result<PolyConvexSet> {
    let mut rows: Vec<(Vector, f64)> = Vec::new();
    for g in pair.tangent.generators() {
        if norm(&g[..n]) <= SLICE_TOL {
            if g[n] < -SLICE_TOL {
                return Ok(PolyConvexSet::empty(n));
            }
            continue;
        }
        rows.push((g[..n].to_vec(), g[n]));
    }
    PolyConvexSet::from_halfspaces(n, &rows, &[])
}

/// `{w : (w, 0) ∈ N}`.
fn slice_cone(pair: &ConePairAtInfinity, n: usize) -> Result<PolyCone> {
    let rows: Vec<Vector> = pair
        .tangent
        .generators()
        .into_iter()
        .map(|g| g[..n].to_vec())
        .filter(|r| norm(r) > SLICE_TOL)
        .collect();
    PolyCone::from_halfspaces(n, rows, vec![])
}

/// Exact `∂f(∞) = {ξ : (ξ, −1) ∈ N_epi f(∞)}` for piecewise-affine `f`.
pub fn subgradients_epigraph_polar(f: &FuncDesc) -> Result<SubgradientSetAtInfinity> {
    let pair = epigraph_cones_piecewise_affine(f)?;
    Ok(SubgradientSetAtInfinity {
        set: slice_normal(&pair, f.dim)?,
        route: Route::EpigraphPolar,
        diagnostics: RouteDiagnostics::default(),
    })
}

fn jitter_dirs(n: usize) -> Vec<Vector> {
    let mut d = vec![vec![1.0; n]];
    for i in 0..n {
        d.push(unit(n, i));
    }
    d
}

/// Gradient at `x`, or at a deterministic jitter of it when `x` sits on a
/// kink. `None` when no nearby point is differentiable or on overflow.
fn gradient_near(f: &FuncDesc, x: &[f64], tol: &Tolerance) -> Result<Option<Vector>> {
    let h = 10.0 * tol.abs_tol * (1.0 + crate::linalg::norm_inf(x));
    let mut cands = vec![x.to_vec()];
    for d in jitter_dirs(x.len()) {
        cands.push(axpy(x, h, &d));
    }
    for y in cands {
        let g = match f.grad(&y, tol) {
            Ok(g) => g,
            Err(Error::Eval { .. }) => continue,
            Err(e) => return Err(e),
        };
        if g.nondifferentiable || !g.value.is_finite() {
            continue;
        }
        if let Some(v) = g.gradient {
            if v.iter().all(|c| c.is_finite()) {
                return Ok(Some(v));
            }
        }
    }
    Ok(None)
}

/// `co {lim ∇f(x_k)}` from gradients on the outermost shells.
pub fn subgradients_gradient_sampling(
    f: &FuncDesc,
    cfg: &LadderConfig,
    tol: &Tolerance,
) -> Result<SubgradientSetAtInfinity> {
    cfg.validate()?;
    let n = f.dim;
    let sampler = ShellSampler::new(n, &IndexSet::all(n), cfg.samples_per_shell, cfg.seed);
    let mut per_rung: Vec<(f64, Vec<Vector>)> = Vec::new();
    let mut norms = Vec::new();
    let mut skipped = 0usize;
    run_rungs(cfg, |rung| {
        let mut grads = Vec::new();
        for x in sampler.points(rung.radius) {
            match f.eval_checked(&x) {
                Ok(o) if o.overflow => return Ok(RungValue::Invalid("overflow".into())),
                Ok(o) if !o.value.is_finite() => continue,
                Err(Error::Eval { .. }) => continue,
                Err(e) => return Err(e),
                Ok(_) => {}
            }
            match gradient_near(f, &x, tol)? {
                Some(g) => grads.push(g),
                None => skipped += 1,
            }
        }
        if grads.is_empty() {
            return Ok(RungValue::Invalid("no differentiable points".into()));
        }
        let m = grads.iter().map(|g| norm(g)).fold(0.0, f64::max);
        norms.push((rung.radius, m));
        per_rung.push((rung.radius, grads));
        Ok(RungValue::Value(ExtendedReal::finite(m)))
    })?;
    if per_rung.is_empty() {
        return Err(Error::Sampling("every sampled point was nondifferentiable".into()));
    }
    per_rung.sort_by(|a, b| a.0.total_cmp(&b.0));
    norms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let top: Vec<&(f64, Vec<Vector>)> = per_rung.iter().rev().take(3).collect();
    let need = top.len();
    let threshold = tol.cone_angle_tol * 1e3;
    // clusters of gradient vectors, tagged with the rungs supporting them
    let mut clusters: Vec<(Vector, Vec<Vector>, Vec<usize>)> = Vec::new();
    for (k, (_, grads)) in top.iter().enumerate() {
        for g in grads {
            let near = clusters
                .iter_mut()
                .find(|(rep, _, _)| dist(rep, g) <= threshold * (1.0 + norm(rep)));
            match near {
                Some((rep, members, tags)) => {
                    members.push(g.clone());
                    if !tags.contains(&k) {
                        tags.push(k);
                    }
                    let m = members.len() as f64;
                    *rep = members.iter().fold(vec![0.0; n], |acc, v| {
                        acc.iter().zip(v).map(|(a, b)| a + b / m).collect()
                    });
                }
                None => clusters.push((g.clone(), vec![g.clone()], vec![k])),
            }
        }
    }
    let reps: Vec<Vector> = clusters
        .into_iter()
        .filter(|(_, _, tags)| tags.len() >= need)
        .map(|(r, _, _)| r)
        .collect();
    if reps.is_empty() {
        return Err(Error::Sampling("no gradient cluster persists across rungs".into()));
    }
    let mut notes = Vec::new();
    if skipped > 0 {
        notes.push(format!("{skipped} kink points skipped after jitter"));
    }
    let growth: Vec<RungRecord> = norms
        .iter()
        .map(|(r, m)| RungRecord {
            radius: *r,
            step: 0.0,
            value: Some(ExtendedReal::finite(*m)),
            note: None,
        })
        .collect();
    if let Ok((Some(PosInf), _, _)) = classify(&growth, cfg) {
        notes.push("gradient norms diverge: evidence against Lipschitz at infinity".into());
    }
    Ok(SubgradientSetAtInfinity {
        set: convex_hull(&reps)?,
        route: Route::GradientSampling,
        diagnostics: RouteDiagnostics {
            notes,
            gradient_norms: norms,
            ..Default::default()
        },
    })
}

/// `±e_i` and the normalized corners `{±1}^n/√n` (deduplicated for `n = 1`).
pub fn support_grid(n: usize) -> Vec<Vector> {
    let mut out: Vec<Vector> = Vec::new();
    for i in 0..n {
        out.push(unit(n, i));
        out.push(unit(n, i).iter().map(|x| -x).collect());
    }
    if n > 1 {
        let c = (n as f64).sqrt();
        for code in 0..(1usize << n) {
            out.push(
                (0..n)
                    .map(|i| if code >> i & 1 == 1 { 1.0 / c } else { -1.0 / c })
                    .collect(),
            );
        }
    }
    out
}

/// Outer approximation `∩_v {ξ : ⟨ξ, v⟩ <= f↑(∞; v)}` over a direction grid.
pub fn subgradients_support_reconstruction(
    f: &FuncDesc,
    cfg: &LadderConfig,
    directions: &[Vector],
) -> Result<SubgradientSetAtInfinity> {
    let n = f.dim;
    let at_zero = upper_subderivative(f, &vec![0.0; n], cfg)?;
    let mut diag = RouteDiagnostics {
        outer_approximation: true,
        ..Default::default()
    };
    if at_zero.is_neg_inf() {
        diag.notes.push("f↑(∞; 0) = −∞".into());
        diag.support_estimates.push((vec![0.0; n], at_zero));
        return Ok(SubgradientSetAtInfinity {
            set: PolyConvexSet::empty(n),
            route: Route::SupportReconstruction,
            diagnostics: diag,
        });
    }
    let mut rows = Vec::new();
    let mut unknown = 0;
    let mut empty = false;
    for v in directions {
        let e = upper_subderivative(f, v, cfg)?;
        match e.value {
            Some(ExtendedReal::Finite(s)) => rows.push((v.clone(), s)),
            Some(PosInf) => {}
            Some(NegInf) => empty = true,
            None => unknown += 1,
        }
        diag.support_estimates.push((v.clone(), e));
    }
    if 2 * unknown > directions.len() {
        return Err(Error::Inconclusive(format!(
            "{unknown} of {} support estimates withheld",
            directions.len()
        )));
    }
    if unknown > 0 {
        diag.notes.push(format!("{unknown} directions skipped (oscillating)"));
    }
    let set = if empty {
        PolyConvexSet::empty(n)
    } else {
        PolyConvexSet::from_halfspaces(n, &rows, &[])?
    };
    Ok(SubgradientSetAtInfinity {
        set,
        route: Route::SupportReconstruction,
        diagnostics: diag,
    })
}

/// Exact epigraph cones when `f` is piecewise affine on its unbounded
/// regions, sampled limiting normals of `epi f` otherwise.
pub fn epigraph_pair(f: &FuncDesc, cfg: &LadderConfig, tol: &Tolerance) -> Result<ConePairAtInfinity> {
    match epigraph_cones_piecewise_affine(f) {
        Ok(p) => Ok(p),
        Err(Error::Capability(_)) => {
            let epi = SetDesc::epigraph(f)?;
            sampled_normal_cone(&epi, &IndexSet::all(f.dim), cfg, tol)
        }
        Err(e) => Err(e),
    }
}

/// `∂^∞f(∞) = {w : (w, 0) ∈ N_epi f(∞)}`.
pub fn singular_subgradients(f: &FuncDesc, cfg: &LadderConfig, tol: &Tolerance) -> Result<PolyCone> {
    let pair = epigraph_pair(f, cfg, tol)?;
    slice_cone(&pair, f.dim)
}

/// Best available route: exact, then gradient sampling when `lipschitz`
/// holds, then support reconstruction.
pub fn subgradients_best(
    f: &FuncDesc,
    cfg: &LadderConfig,
    tol: &Tolerance,
    lipschitz: bool,
) -> Result<SubgradientSetAtInfinity> {
    match subgradients_epigraph_polar(f) {
        Ok(s) => return Ok(s),
        Err(Error::Capability(_)) => {}
        Err(e) => return Err(e),
    }
    if lipschitz {
        if let Ok(s) = subgradients_gradient_sampling(f, cfg, tol) {
            return Ok(s);
        }
    }
    subgradients_support_reconstruction(f, cfg, &support_grid(f.dim))
}

// ---------------------------------------------------------------------------
// Lipschitz classification

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionResult {
    pub item: String,
    pub result: Condition,
    pub detail: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lipschitz {
    LipschitzAtInfinity,
    NotLipschitz,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipschitzVerdict {
    pub verdict: Lipschitz,
    pub evidence: Vec<ConditionResult>,
    pub constant: Option<f64>,
    pub radius: Option<f64>,
    /// Pair `(x, y)` with the largest difference ratio on the top rung.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<(Vector, Vector)>,
}

fn cond(item: &str, result: Condition, detail: String) -> ConditionResult {
    ConditionResult {
        item: item.into(),
        result,
        detail,
    }
}

/// Largest `|f(x) − f(y)|/‖x − y‖` over shell pairs, per rung.
fn two_point_ladder(
    f: &FuncDesc,
    cfg: &LadderConfig,
) -> Result<(Vec<RungRecord>, Option<(Vector, Vector)>)> {
    let n = f.dim;
    let sampler = ShellSampler::new(n, &IndexSet::all(n), cfg.samples_per_shell, cfg.seed);
    let mut offsets = Vec::new();
    for i in 0..n {
        offsets.push(unit(n, i));
        offsets.push(unit(n, i).iter().map(|x| -x).collect::<Vector>());
    }
    let mut witness = None;
    let recs = run_rungs(cfg, |rung| {
        let mut best = 0.0f64;
        let mut arg = None;
        for x in sampler.points(rung.radius) {
            let fx = match f.eval_checked(&x) {
                Ok(o) if o.overflow => return Ok(RungValue::Invalid("overflow".into())),
                Ok(o) => o.value,
                Err(Error::Eval { .. }) => continue,
                Err(e) => return Err(e),
            };
            let Some(fx) = fx.as_finite() else { continue };
            for h in [1.0, rung.step] {
                for u in &offsets {
                    let y = axpy(&x, h, u);
                    let fy = match f.eval_checked(&y) {
                        Ok(o) if o.overflow => return Ok(RungValue::Invalid("overflow".into())),
                        Ok(o) => o.value,
                        Err(Error::Eval { .. }) => continue,
                        Err(e) => return Err(e),
                    };
                    let ratio = match fy.as_finite() {
                        Some(fy) => (fy - fx).abs() / dist(&x, &y),
                        None => f64::INFINITY,
                    };
                    if ratio > best {
                        best = ratio;
                        arg = Some((x.clone(), y));
                    }
                }
            }
        }
        witness = arg.or(witness.take());
        Ok(RungValue::Value(ExtendedReal::from_f64(best).unwrap_or(PosInf)))
    })?;
    Ok((recs, witness))
}

/// Aggregates conditions (i), (iv), (v) and (vi) of the equivalence list for
/// Lipschitz continuity at infinity.
pub fn classify_lipschitz_at_infinity(
    f: &FuncDesc,
    cfg: &LadderConfig,
    tol: &Tolerance,
) -> Result<LipschitzVerdict> {
    let n = f.dim;
    let mut evidence = Vec::new();

    // (i) ∂f(∞) nonempty and compact
    let sub = match subgradients_epigraph_polar(f) {
        Ok(s) => Ok(s),
        Err(Error::Capability(_)) => subgradients_support_reconstruction(f, cfg, &support_grid(n)),
        Err(e) => Err(e),
    };
    evidence.push(match sub {
        Ok(s) if s.set.is_empty() => cond("i", Condition::Fail, "∂f(∞) is empty".into()),
        Ok(s) if !s.set.is_bounded() => cond("i", Condition::Fail, "∂f(∞) is unbounded".into()),
        Ok(s) => cond("i", Condition::Pass, format!("∂f(∞) compact ({:?} route)", s.route)),
        Err(e) => cond("i", Condition::Inconclusive, e.to_string()),
    });

    // (iv) two-point Lipschitz bound outside a ball
    let (recs, witness) = two_point_ladder(f, cfg)?;
    let mut constant = None;
    let mut radius = None;
    evidence.push(match classify(&recs, cfg) {
        Ok((Some(ExtendedReal::Finite(l)), _, _)) => {
            constant = Some(l);
            radius = recs.iter().rev().find(|r| r.value.is_some()).map(|r| r.radius);
            cond("iv", Condition::Pass, format!("ratio converges to L = {l}"))
        }
        Ok((Some(PosInf), _, _)) => cond("iv", Condition::Fail, "difference ratios diverge".into()),
        Ok(_) => cond("iv", Condition::Inconclusive, "difference ratios oscillate".into()),
        Err(e) => cond("iv", Condition::Inconclusive, e.to_string()),
    });

    // (v) f⁰(∞; ±e_i) finite
    let mut any_inf = false;
    let mut all_finite = true;
    for i in 0..n {
        for s in [1.0, -1.0] {
            let v: Vector = unit(n, i).iter().map(|x| s * x).collect();
            match clarke_derivative_at_infinity(f, &v, cfg) {
                Ok(e) if e.is_pos_inf() => {
                    any_inf = true;
                    all_finite = false;
                }
                Ok(e) if e.finite().is_some() || e.is_neg_inf() => {}
                _ => all_finite = false,
            }
        }
    }
    evidence.push(if any_inf {
        cond("v", Condition::Fail, "f⁰(∞; ±e_i) = +∞ on some axis".into())
    } else if all_finite {
        cond("v", Condition::Pass, "f⁰(∞; ±e_i) finite on all axes".into())
    } else {
        cond("v", Condition::Inconclusive, "some axis estimates withheld".into())
    });

    // (vi) ∂^∞f(∞) = {0}
    evidence.push(match singular_subgradients(f, cfg, tol) {
        Ok(c) if c.is_zero() => cond("vi", Condition::Pass, "singular subgradients {0}".into()),
        Ok(_) => cond("vi", Condition::Fail, "nonzero singular subgradients".into()),
        Err(e) => cond("vi", Condition::Inconclusive, e.to_string()),
    });

    let passes = evidence.iter().filter(|c| c.result == Condition::Pass).count();
    let fails = evidence.iter().filter(|c| c.result == Condition::Fail).count();
    let verdict = if passes >= 2 && fails == 0 {
        Lipschitz::LipschitzAtInfinity
    } else if fails >= 1 && passes == 0 {
        Lipschitz::NotLipschitz
    } else {
        Lipschitz::Inconclusive
    };
    if verdict != Lipschitz::LipschitzAtInfinity {
        constant = None;
        radius = None;
    }
    Ok(LipschitzVerdict {
        verdict,
        evidence,
        constant,
        radius,
        witness,
    })
}

// ---------------------------------------------------------------------------
// directional Lipschitz test

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Answer {
    Yes,
    No,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirLipReport {
    pub answer: Answer,
    pub dagger: LimitEstimate,
    /// `r` used for the interior test of `(v, r)` on `epi f`.
    pub r: f64,
    pub interior: Interiority,
    pub agree: bool,
}

/// Primary evidence: `f†(∞; v) < ∞`. Dual evidence: `(v, r) ∈ int T_epi f`.
pub fn directionally_lipschitz_test(f: &FuncDesc, v: &[f64], cfg: &LadderConfig) -> Result<DirLipReport> {
    let dagger = dagger_derivative(f, v, cfg)?;
    let primary = match dagger.value {
        Some(PosInf) => Answer::No,
        Some(_) => Answer::Yes,
        None => Answer::Inconclusive,
    };
    let r = match dagger.value {
        Some(ExtendedReal::Finite(d)) => d + 1.0,
        Some(NegInf) => -1.0,
        _ => 1e3 * (1.0 + norm(v)),
    };
    let epi = SetDesc::epigraph(f)?;
    let mut w = v.to_vec();
    w.push(r);
    let interior = interior_tangent_test(&epi, &w, &IndexSet::all(f.dim), cfg)?.verdict;
    let dual = match interior {
        Interiority::Interior => Answer::Yes,
        Interiority::NotInterior => Answer::No,
        Interiority::Inconclusive => Answer::Inconclusive,
    };
    let agree = primary == dual && primary != Answer::Inconclusive;
    Ok(DirLipReport {
        answer: if agree { primary } else { Answer::Inconclusive },
        dagger,
        r,
        interior,
        agree,
    })
}

// ---------------------------------------------------------------------------
// sum rule

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SumRuleRow {
    pub direction: Vector,
    pub sum_support: ExtendedReal,
    pub parts_support: ExtendedReal,
    pub sum_upper: Option<ExtendedReal>,
    pub parts_upper: Option<ExtendedReal>,
    pub inclusion_ok: bool,
    pub subderivative_ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SumRuleReport {
    pub sum: SubgradientSetAtInfinity,
    pub first: SubgradientSetAtInfinity,
    pub second: SubgradientSetAtInfinity,
    /// `∂(f1+f2)(∞)` is empty, so the inclusion is trivial.
    pub empty_branch: bool,
    pub hypothesis_witnessed: bool,
    pub rows: Vec<SumRuleRow>,
    pub inclusion_holds: bool,
    pub subderivative_holds: bool,
    pub label: String,
}

fn le_with_bar(a: ExtendedReal, b: ExtendedReal, bar: f64) -> bool {
    match (a, b) {
        (NegInf, _) | (_, PosInf) => true,
        (_, NegInf) | (PosInf, _) => false,
        (ExtendedReal::Finite(x), ExtendedReal::Finite(y)) => x <= y + bar,
    }
}

pub fn sum_rule_check(
    f1: &FuncDesc,
    f2: &FuncDesc,
    cfg: &LadderConfig,
    tol: &Tolerance,
) -> Result<SumRuleReport> {
    let f0 = f1.sum(f2)?;
    let s0 = subgradients_best(&f0, cfg, tol, false)?;
    let s1 = subgradients_best(f1, cfg, tol, false)?;
    let s2 = subgradients_best(f2, cfg, tol, false)?;
    let grid = crate::geometry::direction_grid(f0.dim);
    let bar = 10.0 * cfg.conv_abs;
    let mut rows = Vec::new();
    let mut hypothesis = false;
    for v in &grid {
        let u0 = upper_subderivative(&f0, v, cfg)?;
        let u1 = upper_subderivative(f1, v, cfg)?;
        let u2 = upper_subderivative(f2, v, cfg)?;
        if u1.finite().is_some() && u2.finite().is_some() {
            // f2↑ finite on a small ball around v
            let ball_ok = (0..v.len()).all(|i| {
                [0.25, -0.25].iter().all(|s| {
                    upper_subderivative(f2, &axpy(v, *s, &unit(v.len(), i)), cfg)
                        .map(|e| e.finite().is_some())
                        .unwrap_or(false)
                })
            });
            hypothesis |= ball_ok;
        }
        let ps = ext_add(s1.set.support(v), s2.set.support(v));
        let ss = s0.set.support(v);
        let parts_upper = match (u1.value, u2.value) {
            (Some(a), Some(b)) => Some(ext_add(a, b)),
            _ => None,
        };
        let sub_ok = match (u0.value, parts_upper) {
            (Some(a), Some(b)) => le_with_bar(a, b, bar + u0.error_bar + u1.error_bar + u2.error_bar),
            _ => true,
        };
        rows.push(SumRuleRow {
            direction: v.clone(),
            inclusion_ok: le_with_bar(ss, ps, bar),
            subderivative_ok: sub_ok,
            sum_support: ss,
            parts_support: ps,
            sum_upper: u0.value,
            parts_upper,
        });
    }
    let empty_branch = s0.set.is_empty();
    let inclusion_holds = empty_branch || rows.iter().all(|r| r.inclusion_ok);
    let subderivative_holds = rows.iter().all(|r| r.subderivative_ok);
    let label = if empty_branch {
        "trivial: ∂(f1+f2)(∞) is empty".to_string()
    } else if hypothesis {
        "qualification witnessed (sampled)".to_string()
    } else {
        "hypothesis unverified".to_string()
    };
    Ok(SumRuleReport {
        sum: s0,
        first: s1,
        second: s2,
        empty_branch,
        hypothesis_witnessed: hypothesis,
        rows,
        inclusion_holds,
        subderivative_holds,
        label,
    })
}

// ---------------------------------------------------------------------------
// distance function

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceSubgradients {
    pub result: SubgradientSetAtInfinity,
    /// Clustered limits of unit perpendiculars.
    pub perpendiculars: Vec<Vector>,
    pub perpendiculars_empty: bool,
    /// Gradient-sampling cross-check on the lifted distance function.
    pub cross_check: Option<bool>,
}

/// `∂d_C(∞) = co({0} ∪ A)` with `A` the limits of unit perpendiculars at far
/// boundary points.
pub fn distance_subgradients_at_infinity(
    c: &SetDesc,
    cfg: &LadderConfig,
    tol: &Tolerance,
) -> Result<DistanceSubgradients> {
    cfg.validate()?;
    let index = IndexSet::all(c.dim);
    let shell = SetShell::new(c, &index, cfg)?;
    // unboundedness check and overflow refinement
    let ladder = set_rungs(&shell, cfg)?;
    let mut dirs = Vec::new();
    for (rung, _) in ladder.iter().rev().take(3) {
        dirs.extend(shell.perpendiculars(rung.radius)?);
    }
    let reps = cluster_directions(&dirs, tol.cone_angle_tol * 1e3);
    let mut pts = vec![vec![0.0; c.dim]];
    pts.extend(reps.iter().cloned());
    let set = convex_hull(&pts)?;
    let lifted = FuncDesc::lift_distance(c);
    let cross_check = subgradients_gradient_sampling(&lifted, cfg, tol)
        .ok()
        .map(|g| g.set.set_eq(&set, &Tolerance { abs_tol: 1e-3, rel_tol: 1e-3, ..*tol }).unwrap_or(false));
    let mut notes = Vec::new();
    if reps.is_empty() {
        notes.push("A empty (sampled)".into());
    }
    Ok(DistanceSubgradients {
        result: SubgradientSetAtInfinity {
            set,
            route: Route::GradientSampling,
            diagnostics: RouteDiagnostics {
                notes,
                ..Default::default()
            },
        },
        perpendiculars_empty: reps.is_empty(),
        perpendiculars: reps,
        cross_check,
    })
}
