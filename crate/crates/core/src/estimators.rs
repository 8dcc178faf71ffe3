//! Ladder estimates of subderivatives at infinity and sampled tangent tests.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{FuncDesc, Projector, SetDesc};
use crate::ext_real::{ExtendedReal, NegInf, PosInf};
use crate::ladder::{
    ball_grid, classify, estimate_from, outer_eps_limit, rungs, run_rungs, IndexSet,
    LadderConfig, LimitEstimate, Rung, RungRecord, RungValue, ShellSampler,
};
use crate::linalg::{axpy, norm_inf, Vector};
use crate::tolerance::Tolerance;

const BALL_EXTRA: usize = 8;

enum FVal {
    Value(ExtendedReal),
    Overflow,
    Skip,
}

fn fval(f: &FuncDesc, x: &[f64]) -> Result<FVal> {
    match f.eval_checked(x) {
        Ok(o) if o.overflow => Ok(FVal::Overflow),
        Ok(o) => Ok(FVal::Value(o.value)),
        Err(Error::Eval { .. }) => Ok(FVal::Skip),
        Err(e) => Err(e),
    }
}

/// `[f(x+tw) − f(x)]/t` for finite `f(x)`; `None` on overflow.
fn quotient(f: &FuncDesc, x: &[f64], fx: f64, t: f64, w: &[f64]) -> Result<Option<ExtendedReal>> {
    let y = axpy(x, t, w);
    match fval(f, &y)? {
        FVal::Overflow => Ok(None),
        FVal::Skip => Ok(Some(PosInf)),
        FVal::Value(PosInf) => Ok(Some(PosInf)),
        FVal::Value(NegInf) => Ok(Some(NegInf)),
        FVal::Value(ExtendedReal::Finite(fy)) => {
            let q = (fy - fx) / t;
            Ok(if q.is_finite() { Some(ExtendedReal::finite(q)) } else { None })
        }
    }
}

fn check_dir(f: &FuncDesc, v: &[f64]) -> Result<()> {
    if v.len() != f.dim {
        return Err(Error::DimensionMismatch {
            expected: f.dim,
            found: v.len(),
        });
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Invalid("direction must be finite".into()));
    }
    Ok(())
}

/// Finite-valued shell points of `f` on one rung, or the reason the rung is
/// unusable.
fn shell_values(
    f: &FuncDesc,
    sampler: &ShellSampler,
    radius: f64,
) -> Result<std::result::Result<Vec<(Vector, f64)>, String>> {
    let mut out = Vec::new();
    for x in sampler.points(radius) {
        match fval(f, &x)? {
            FVal::Overflow => return Ok(Err(format!("overflow at radius {radius}"))),
            FVal::Value(ExtendedReal::Finite(fx)) => out.push((x, fx)),
            _ => {}
        }
    }
    if out.is_empty() {
        return Ok(Err(format!("no finite samples at radius {radius}")));
    }
    Ok(Ok(out))
}

/// Shared driver: `inner(x, fx, rung)` returns the rung contribution of one
/// shell point (`None` on overflow); the rung value is the max over points.
fn sup_over_shell(
    f: &FuncDesc,
    cfg: &LadderConfig,
    mut inner: impl FnMut(&[f64], f64, &Rung) -> Result<Option<ExtendedReal>>,
) -> Result<Vec<RungRecord>> {
    cfg.validate()?;
    let sampler = ShellSampler::new(f.dim, &IndexSet::all(f.dim), cfg.samples_per_shell, cfg.seed);
    run_rungs(cfg, |rung| {
        let pts = match shell_values(f, &sampler, rung.radius)? {
            Ok(p) => p,
            Err(why) => return Ok(RungValue::Invalid(why)),
        };
        let mut best = NegInf;
        for (x, fx) in &pts {
            match inner(x, *fx, rung)? {
                Some(q) => best = best.max(q),
                None => return Ok(RungValue::Invalid(format!("overflow at radius {}", rung.radius))),
            }
        }
        Ok(RungValue::Value(best))
    })
}

/// `lim_{ε↘0} limsup_{x→∞, t↘0} inf_{w∈B_ε(v)} [f(x+tw) − f(x)]/t`.
pub fn upper_subderivative(f: &FuncDesc, v: &[f64], cfg: &LadderConfig) -> Result<LimitEstimate> {
    check_dir(f, v)?;
    let mut per_eps = Vec::new();
    for &eps in &cfg.eps_ball {
        let grid = ball_grid(v, eps, BALL_EXTRA, cfg.seed);
        let recs = sup_over_shell(f, cfg, |x, fx, rung| {
            let mut low = PosInf;
            for w in &grid {
                match quotient(f, x, fx, rung.step, w)? {
                    Some(q) => low = low.min(q),
                    None => return Ok(None),
                }
            }
            Ok(Some(low))
        })?;
        per_eps.push((eps, estimate_from(recs, cfg)?));
    }
    outer_eps_limit(per_eps, cfg)
}

/// `limsup_{x→∞, t↘0, w→v} [f(x+tw) − f(x)]/t`, as the limit over the ε
/// ladder of the sup over `B_ε(v)`.
pub fn dagger_derivative(f: &FuncDesc, v: &[f64], cfg: &LadderConfig) -> Result<LimitEstimate> {
    check_dir(f, v)?;
    let mut per_eps = Vec::new();
    for &eps in &cfg.eps_ball {
        let grid = ball_grid(v, eps, BALL_EXTRA, cfg.seed);
        let recs = sup_over_shell(f, cfg, |x, fx, rung| {
            let mut high = NegInf;
            for w in &grid {
                match quotient(f, x, fx, rung.step, w)? {
                    Some(q) => high = high.max(q),
                    None => return Ok(None),
                }
            }
            Ok(Some(high))
        })?;
        per_eps.push((eps, estimate_from(recs, cfg)?));
    }
    outer_eps_limit(per_eps, cfg)
}

/// `limsup_{x→∞, t↘0} [f(x+tv) − f(x)]/t`.
pub fn clarke_derivative_at_infinity(
    f: &FuncDesc,
    v: &[f64],
    cfg: &LadderConfig,
) -> Result<LimitEstimate> {
    check_dir(f, v)?;
    let recs = sup_over_shell(f, cfg, |x, fx, rung| quotient(f, x, fx, rung.step, v))?;
    estimate_from(recs, cfg)
}

// ---------------------------------------------------------------------------
// set-based tests

/// Far points of a set `C` on the shell `‖π(x)‖ ≈ R`.
pub(crate) struct SetShell<'a> {
    set: &'a SetDesc,
    index: IndexSet,
    sampler: ShellSampler,
    proj: Projector<'a>,
    tol: Tolerance,
}

pub(crate) enum ShellPoints {
    Points(Vec<Vector>),
    Overflow,
}

impl<'a> SetShell<'a> {
    pub(crate) fn new(set: &'a SetDesc, index: &IndexSet, cfg: &LadderConfig) -> Result<Self> {
        if index.coords.iter().any(|&c| c == 0 || c > set.dim) {
            return Err(Error::Invalid(format!(
                "index set {:?} outside 1..={}",
                index.coords, set.dim
            )));
        }
        Ok(Self {
            set,
            index: index.clone(),
            sampler: ShellSampler::new(set.dim, index, cfg.samples_per_shell, cfg.seed),
            proj: set.projector().with_starts(4),
            tol: Tolerance {
                abs_tol: 1e-9,
                ..Tolerance::default()
            },
        })
    }

    fn far_enough(&self, q: &[f64], radius: f64) -> bool {
        self.index.proj_norm(q) >= 0.5 * radius
    }

    pub(crate) fn points(&self, radius: f64) -> Result<ShellPoints> {
        let mut out = Vec::new();
        for p in self.sampler.points(radius) {
            if let Some(f) = self.set.epigraph_of.as_deref() {
                let n = f.dim;
                match fval(f, &p[..n])? {
                    FVal::Overflow => return Ok(ShellPoints::Overflow),
                    FVal::Value(ExtendedReal::Finite(fx)) => {
                        let mut b = p.clone();
                        b[n] = fx;
                        if self.far_enough(&b, radius) {
                            out.push(b.clone());
                        }
                        if p[n] > fx {
                            b[n] = p[n];
                            if self.far_enough(&b, radius) {
                                out.push(b);
                            }
                        }
                    }
                    _ => {}
                }
                continue;
            }
            let vals = self.set.le_values(&p);
            if vals.iter().any(|h| h.is_nan()) {
                return Ok(ShellPoints::Overflow);
            }
            if self.set.contains(&p, &self.tol)? {
                if self.far_enough(&p, radius) {
                    out.push(p);
                }
                continue;
            }
            let d = match self.proj.distance(&p) {
                Ok(d) => d,
                Err(Error::Infeasible) => continue,
                Err(e) => return Err(e),
            };
            let q = &d.nearest[0];
            if self.set.contains(q, &self.tol)? && self.far_enough(q, radius) {
                out.push(q.clone());
            }
        }
        Ok(ShellPoints::Points(out))
    }

    /// Unit perpendiculars `(p − q)/‖p − q‖` from shell points `p` outside
    /// `C` to their nearest points `q`, kept when `q` is far.
    pub(crate) fn perpendiculars(&self, radius: f64) -> Result<Vec<Vector>> {
        let mut out = Vec::new();
        for p in self.sampler.points(radius) {
            if self.set.le_values(&p).iter().any(|h| h.is_nan()) || self.contains(&p)? {
                continue;
            }
            let d = match self.proj.distance(&p) {
                Ok(d) => d,
                Err(Error::Infeasible) => continue,
                Err(e) => return Err(e),
            };
            let q = &d.nearest[0];
            if d.distance > 0.0 && self.far_enough(q, radius) {
                out.push(p.iter().zip(q).map(|(a, b)| (a - b) / d.distance).collect());
            }
        }
        Ok(out)
    }

    /// `d_C(y)`, short-circuited to an upper bound once it is `<= cap`.
    pub(crate) fn distance_capped(&self, y: &[f64], cap: f64) -> Result<f64> {
        if self.set.violation(y) <= 0.0 {
            return Ok(0.0);
        }
        let mut upper = f64::INFINITY;
        if let Some(f) = self.set.epigraph_of.as_deref() {
            let n = f.dim;
            if let FVal::Value(ExtendedReal::Finite(fx)) = fval(f, &y[..n])? {
                upper = (fx - y[n]).max(0.0);
            }
        }
        if upper <= cap {
            return Ok(upper);
        }
        match self.proj.distance(y) {
            Ok(d) => Ok(d.distance.min(upper)),
            Err(Error::Infeasible) => Ok(upper),
            Err(e) => Err(e),
        }
    }

    pub(crate) fn contains(&self, y: &[f64]) -> Result<bool> {
        self.set.contains(y, &self.tol)
    }
}

fn check_set_dir(c: &SetDesc, v: &[f64]) -> Result<()> {
    if v.len() != c.dim {
        return Err(Error::DimensionMismatch {
            expected: c.dim,
            found: v.len(),
        });
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Membership {
    Member,
    Nonmember,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TangentWitness {
    pub eps: f64,
    pub radius: f64,
    pub x: Vector,
    pub t: f64,
    /// `d_C(x + t v)`, which exceeds `t·eps`.
    pub distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RungStat {
    pub eps: f64,
    pub radius: f64,
    pub step: f64,
    pub samples: usize,
    pub failures: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TangentVerdict {
    pub verdict: Membership,
    pub witness: Option<TangentWitness>,
    pub rungs: Vec<RungStat>,
    /// Always `"sampled"`: the ladder can falsify but not prove.
    pub evidence: String,
}

/// Valid rungs of a set ladder, with far points, after overflow refinement.
pub(crate) fn set_rungs(shell: &SetShell, cfg: &LadderConfig) -> Result<Vec<(Rung, Vec<Vector>)>> {
    let mut kept: Vec<(Rung, Vec<Vector>)> = Vec::new();
    let mut empty_at: Option<f64> = None;
    let top = rungs(cfg).last().map(|r| r.radius);
    run_rungs(cfg, |rung| {
        Ok(match shell.points(rung.radius)? {
            ShellPoints::Overflow => RungValue::Invalid("overflow".into()),
            ShellPoints::Points(p) if p.is_empty() => {
                if Some(rung.radius) == top {
                    empty_at = Some(rung.radius);
                }
                RungValue::Invalid("no far points".into())
            }
            ShellPoints::Points(p) => {
                kept.push((*rung, p));
                RungValue::Value(ExtendedReal::ZERO)
            }
        })
    })?;
    if let Some(r) = empty_at {
        return Err(Error::UnboundedCheck(format!(
            "no points of the set found with ‖π(x)‖ >= {}",
            0.5 * r
        )));
    }
    if kept.is_empty() {
        return Err(Error::UnboundedCheck("every shell overflowed".into()));
    }
    kept.sort_by(|a, b| a.0.radius.total_cmp(&b.0.radius));
    Ok(kept)
}

fn slack(x: &[f64]) -> f64 {
    4.0 * f64::EPSILON * (1.0 + norm_inf(x))
}

/// Sampled check of the ε-characterization of `T_C(∞_I)`.
pub fn tangent_membership(
    c: &SetDesc,
    v: &[f64],
    index: &IndexSet,
    cfg: &LadderConfig,
) -> Result<TangentVerdict> {
    cfg.validate()?;
    check_set_dir(c, v)?;
    let shell = SetShell::new(c, index, cfg)?;
    let ladder = set_rungs(&shell, cfg)?;
    let mut stats = Vec::new();
    let mut witness: Option<TangentWitness> = None;
    let mut all_pass = true;
    for &eps in &cfg.eps_ball {
        let mut fails = Vec::new();
        for (rung, pts) in &ladder {
            let mut failures = 0;
            let mut first: Option<TangentWitness> = None;
            for x in pts {
                for t in [rung.step, rung.step / 16.0] {
                    let y = axpy(x, t, v);
                    let cap = t * eps;
                    let d = shell.distance_capped(&y, cap)?;
                    if d > cap + slack(x) {
                        failures += 1;
                        if first.is_none() {
                            first = Some(TangentWitness {
                                eps,
                                radius: rung.radius,
                                x: x.clone(),
                                t,
                                distance: d,
                            });
                        }
                    }
                }
            }
            stats.push(RungStat {
                eps,
                radius: rung.radius,
                step: rung.step,
                samples: pts.len(),
                failures,
            });
            fails.push(first);
        }
        let k = fails.len();
        let top = &fails[k.saturating_sub(2)..];
        if top.iter().all(|w| w.is_some()) {
            if witness.is_none() {
                witness = fails.pop().flatten();
            }
        } else if !top.iter().all(|w| w.is_none()) {
            all_pass = false;
        }
    }
    let verdict = if witness.is_some() {
        Membership::Nonmember
    } else if all_pass {
        Membership::Member
    } else {
        Membership::Inconclusive
    };
    Ok(TangentVerdict {
        verdict,
        witness,
        rungs: stats,
        evidence: "sampled".into(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interiority {
    Interior,
    NotInterior,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InteriorVerdict {
    pub verdict: Interiority,
    /// The passing `(ε, R, λ)` triple when interior.
    pub triple: Option<(f64, f64, f64)>,
    pub rungs: Vec<RungStat>,
    pub evidence: String,
}

/// Sampled check of `v ∈ int T_C(∞_I)`: some `(ε, R, λ)` with
/// `x + t v' ∈ C` for all far `x ∈ C`, `t <= λ`, `v' ∈ B_ε(v)`.
pub fn interior_tangent_test(
    c: &SetDesc,
    v: &[f64],
    index: &IndexSet,
    cfg: &LadderConfig,
) -> Result<InteriorVerdict> {
    cfg.validate()?;
    check_set_dir(c, v)?;
    let shell = SetShell::new(c, index, cfg)?;
    let ladder = set_rungs(&shell, cfg)?;
    let mut stats = Vec::new();
    let mut triple = None;
    let mut every_eps_fails = true;
    for &eps in &cfg.eps_ball {
        let grid = ball_grid(v, eps, BALL_EXTRA, cfg.seed);
        let mut passes = Vec::new();
        for (rung, pts) in &ladder {
            let mut failures = 0;
            for x in pts {
                for t in [rung.step, rung.step / 16.0] {
                    for w in &grid {
                        if !shell.contains(&axpy(x, t, w))? {
                            failures += 1;
                        }
                    }
                }
            }
            stats.push(RungStat {
                eps,
                radius: rung.radius,
                step: rung.step,
                samples: pts.len(),
                failures,
            });
            passes.push(failures == 0);
        }
        let k = passes.len();
        // a passing tail of at least two rungs
        let mut start = k;
        while start > 0 && passes[start - 1] {
            start -= 1;
        }
        if k - start >= 2.min(k) && start < k && triple.is_none() {
            let (r, _) = &ladder[start];
            triple = Some((eps, r.radius, r.step));
        }
        if !(passes[k.saturating_sub(2)..].iter().all(|p| !p)) {
            every_eps_fails = false;
        }
    }
    let verdict = if triple.is_some() {
        Interiority::Interior
    } else if every_eps_fails {
        Interiority::NotInterior
    } else {
        Interiority::Inconclusive
    };
    Ok(InteriorVerdict {
        verdict,
        triple,
        rungs: stats,
        evidence: "sampled".into(),
    })
}

/// `limsup [d_C(x+tv) − d_C(x)]/t` over `π(x) → ∞`, `d_C(x) → 0`, `t ↘ 0`,
/// with `I` all coordinates.
pub fn distance_characterization(c: &SetDesc, v: &[f64], cfg: &LadderConfig) -> Result<LimitEstimate> {
    distance_characterization_on(c, v, &IndexSet::all(c.dim), cfg)
}

pub fn distance_characterization_on(
    c: &SetDesc,
    v: &[f64],
    index: &IndexSet,
    cfg: &LadderConfig,
) -> Result<LimitEstimate> {
    cfg.validate()?;
    check_set_dir(c, v)?;
    let shell = SetShell::new(c, index, cfg)?;
    let ladder = set_rungs(&shell, cfg)?;
    let unit_dirs = crate::ladder::sphere_directions(c.dim, 0, 0);
    let mut recs = Vec::new();
    for (rung, pts) in &ladder {
        let t = rung.step;
        let mut best = NegInf;
        for q in pts {
            // points of C and points at distance <= t from it
            let mut starts = vec![q.clone()];
            for u in &unit_dirs {
                starts.push(axpy(q, t, u));
            }
            for x in starts {
                let dx = shell.distance_capped(&x, 0.0)?;
                let dy = shell.distance_capped(&axpy(&x, t, v), 0.0)?;
                let val = (dy - dx) / t;
                if val.is_finite() {
                    best = best.max(ExtendedReal::finite(val));
                }
            }
        }
        recs.push(RungRecord {
            radius: rung.radius,
            step: rung.step,
            value: Some(best),
            note: None,
        });
    }
    let (value, trend, error_bar) = classify(&recs, cfg)?;
    Ok(LimitEstimate {
        value,
        trend,
        rung_values: recs,
        error_bar,
        eps_values: vec![],
    })
}

/// Zero-vs-positive reading of a distance characterization estimate.
pub fn distance_is_zero(est: &LimitEstimate, cfg: &LadderConfig) -> Option<bool> {
    match est.value {
        Some(ExtendedReal::Finite(g)) => Some(g <= 10.0 * cfg.conv_abs + est.error_bar),
        Some(PosInf) => Some(false),
        _ => None,
    }
}
