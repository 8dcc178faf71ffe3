//! Radius/step/ball ladders, shell sampling and classification of the
//! resulting rung sequences into limits.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ext_real::{ExtendedReal, NegInf, PosInf};
use crate::linalg::{normalize, unit, Vector};

/// Discretization of `x → ∞, t ↘ 0` and of the shrinking balls.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LadderConfig {
    pub radii: Vec<f64>,
    pub steps: Vec<f64>,
    pub eps_ball: Vec<f64>,
    pub samples_per_shell: usize,
    pub seed: u64,
    /// Two consecutive rungs closer than `max(conv_abs, conv_rel·|v|)`
    /// count as converged.
    pub conv_abs: f64,
    pub conv_rel: f64,
}

impl Default for LadderConfig {
    fn default() -> Self {
        Self {
            radii: (1..=6).map(|k| 10f64.powi(k)).collect(),
            steps: (1..=6).map(|k| 10f64.powi(-k)).collect(),
            eps_ball: vec![1.0, 0.3, 0.1, 0.03],
            samples_per_shell: 256,
            seed: 0,
            conv_abs: 1e-3,
            conv_rel: 1e-3,
        }
    }
}

impl LadderConfig {
    pub fn validate(&self) -> Result<()> {
        let inc = self.radii.windows(2).all(|w| w[0] < w[1]);
        let dec = self.steps.windows(2).all(|w| w[0] > w[1]);
        let eps_dec = self.eps_ball.windows(2).all(|w| w[0] > w[1]);
        let pos = |v: &[f64]| v.iter().all(|x| x.is_finite() && *x > 0.0);
        if self.radii.is_empty() || !inc || !pos(&self.radii) {
            return Err(Error::Invalid("radii must be positive and strictly increasing".into()));
        }
        if self.steps.len() != self.radii.len() || !dec || !pos(&self.steps) {
            return Err(Error::Invalid(
                "steps must be positive, strictly decreasing and one per radius".into(),
            ));
        }
        if self.eps_ball.is_empty() || !eps_dec || !pos(&self.eps_ball) {
            return Err(Error::Invalid("eps_ball must be positive and strictly decreasing".into()));
        }
        if self.samples_per_shell == 0 {
            return Err(Error::Invalid("samples_per_shell must be positive".into()));
        }
        if !(self.conv_abs > 0.0 && self.conv_rel > 0.0) {
            return Err(Error::Invalid("convergence tolerances must be positive".into()));
        }
        Ok(())
    }

    /// Smaller ladder for quick checks: same radii, fewer samples.
    pub fn with_samples(mut self, n: usize) -> Self {
        self.samples_per_shell = n;
        self
    }
}

/// Coordinates (1-based) along which points escape to infinity.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexSet {
    pub coords: Vec<usize>,
}

impl IndexSet {
    pub fn all(n: usize) -> Self {
        Self {
            coords: (1..=n).collect(),
        }
    }

    pub fn new(mut coords: Vec<usize>, n: usize) -> Result<Self> {
        coords.sort_unstable();
        coords.dedup();
        if coords.is_empty() || coords.iter().any(|&c| c == 0 || c > n) {
            return Err(Error::Invalid(format!(
                "index set must be a nonempty subset of 1..={n}, got {coords:?}"
            )));
        }
        Ok(Self { coords })
    }

    pub fn zero_based(&self) -> Vec<usize> {
        self.coords.iter().map(|c| c - 1).collect()
    }

    /// `‖π(x)‖`.
    pub fn proj_norm(&self, x: &[f64]) -> f64 {
        self.coords.iter().map(|&c| x[c - 1] * x[c - 1]).sum::<f64>().sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trend {
    Converged,
    DivergingUp,
    DivergingDown,
    Oscillating,
}

/// One rung of a ladder.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rung {
    pub radius: f64,
    pub step: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RungRecord {
    pub radius: f64,
    pub step: f64,
    pub value: Option<ExtendedReal>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Outcome of evaluating one rung.
pub enum RungValue {
    Value(ExtendedReal),
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitEstimate {
    /// Withheld (`None`) when the rungs neither converge nor diverge cleanly.
    pub value: Option<ExtendedReal>,
    pub trend: Trend,
    pub rung_values: Vec<RungRecord>,
    pub error_bar: f64,
    /// Per-ε limits for the nested estimators, smallest ε last.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub eps_values: Vec<(f64, Option<ExtendedReal>)>,
}

impl LimitEstimate {
    pub fn finite(&self) -> Option<f64> {
        self.value.and_then(|v| v.as_finite())
    }

    pub fn is_pos_inf(&self) -> bool {
        self.value == Some(PosInf)
    }

    pub fn is_neg_inf(&self) -> bool {
        self.value == Some(NegInf)
    }
}

fn snap_step(t: f64) -> f64 {
    2f64.powi(t.log2().round() as i32)
}

/// Configured rungs with snapped steps.
pub fn rungs(cfg: &LadderConfig) -> Vec<Rung> {
    cfg.radii
        .iter()
        .zip(&cfg.steps)
        .map(|(&r, &t)| Rung {
            radius: r,
            step: snap_step(t),
        })
        .collect()
}

fn interpolate(a: &Rung, b: &Rung, r: f64) -> Rung {
    let s = (r.ln() - a.radius.ln()) / (b.radius.ln() - a.radius.ln());
    let t = (a.step.ln() + s * (b.step.ln() - a.step.ln())).exp();
    Rung {
        radius: r,
        step: snap_step(t),
    }
}

/// Evaluates every rung; when a rung turns invalid after a valid one, the
/// gap is bisected in log-radius until five rungs are valid or eight extra
/// attempts were made, and the ladder stops there.
pub fn run_rungs(
    cfg: &LadderConfig,
    mut eval: impl FnMut(&Rung) -> Result<RungValue>,
) -> Result<Vec<RungRecord>> {
    let mut records: Vec<RungRecord> = Vec::new();
    let mut last_valid: Option<Rung> = None;
    let record = |r: &Rung, v: RungValue| match v {
        RungValue::Value(x) => RungRecord {
            radius: r.radius,
            step: r.step,
            value: Some(x),
            note: None,
        },
        RungValue::Invalid(why) => RungRecord {
            radius: r.radius,
            step: r.step,
            value: None,
            note: Some(why),
        },
    };
    for rung in rungs(cfg) {
        let v = eval(&rung)?;
        let valid = matches!(v, RungValue::Value(_));
        records.push(record(&rung, v));
        if valid {
            last_valid = Some(rung);
            continue;
        }
        if let Some(good0) = last_valid {
            let mut good = good0;
            let mut bad = rung;
            let mut attempts = 0;
            while records.iter().filter(|r| r.value.is_some()).count() < 5 && attempts < 8 {
                let mid_r = (good.radius * bad.radius).sqrt();
                let mid = interpolate(&good0, &rung, mid_r);
                let v = eval(&mid)?;
                if matches!(v, RungValue::Value(_)) {
                    good = mid;
                } else {
                    bad = mid;
                }
                records.push(record(&mid, v));
                attempts += 1;
            }
            break;
        }
    }
    records.sort_by(|a, b| a.radius.total_cmp(&b.radius));
    Ok(records)
}

/// Classifies the valid rung values of a ladder.
pub fn classify(records: &[RungRecord], cfg: &LadderConfig) -> Result<(Option<ExtendedReal>, Trend, f64)> {
    let vals: Vec<ExtendedReal> = records.iter().filter_map(|r| r.value).collect();
    if vals.is_empty() {
        return Err(Error::EstimateUnavailable("every rung was invalid".into()));
    }
    let n = vals.len();
    let last = vals[n - 1];
    // exact infinities on the top rungs
    let tail = &vals[n.saturating_sub(2)..];
    if tail.iter().all(|v| v.is_pos_inf()) {
        return Ok((Some(PosInf), Trend::DivergingUp, f64::INFINITY));
    }
    if tail.iter().all(|v| v.is_neg_inf()) {
        return Ok((Some(NegInf), Trend::DivergingDown, f64::INFINITY));
    }
    if n >= 3 {
        let t3 = &vals[n - 3..];
        let f: Vec<f64> = t3.iter().map(|v| v.to_f64()).collect();
        let grows = |sign: f64| {
            f.iter().all(|x| sign * x > 1.0)
                && f.windows(2).all(|w| {
                    let (a, b) = (sign * w[0], sign * w[1]);
                    b.is_infinite() || b >= 10.0 * a * (1.0 - 1e-9)
                })
                && sign * f[2] >= 1e3
        };
        if grows(1.0) {
            return Ok((Some(PosInf), Trend::DivergingUp, f64::INFINITY));
        }
        if grows(-1.0) {
            return Ok((Some(NegInf), Trend::DivergingDown, f64::INFINITY));
        }
    }
    if n >= 2 {
        if let (Some(a), Some(b)) = (vals[n - 2].as_finite(), last.as_finite()) {
            let diff = (a - b).abs();
            if diff < cfg.conv_abs.max(cfg.conv_rel * b.abs()) {
                return Ok((Some(last), Trend::Converged, diff));
            }
            return Ok((None, Trend::Oscillating, diff));
        }
    }
    Ok((None, Trend::Oscillating, f64::INFINITY))
}

/// Builds a `LimitEstimate` from rung records.
pub fn estimate_from(records: Vec<RungRecord>, cfg: &LadderConfig) -> Result<LimitEstimate> {
    let (value, trend, error_bar) = classify(&records, cfg)?;
    Ok(LimitEstimate {
        value,
        trend,
        rung_values: records,
        error_bar,
        eps_values: vec![],
    })
}

/// Combines per-ε limits (ε decreasing) into the outer limit `ε ↘ 0`:
/// infinite tail values are taken as is; two finite tail values are
/// extrapolated linearly to `ε = 0`.
pub fn outer_eps_limit(
    per_eps: Vec<(f64, LimitEstimate)>,
    cfg: &LadderConfig,
) -> Result<LimitEstimate> {
    let n = per_eps.len();
    if n == 0 {
        return Err(Error::EstimateUnavailable("no ε rungs".into()));
    }
    let eps_values: Vec<(f64, Option<ExtendedReal>)> =
        per_eps.iter().map(|(e, l)| (*e, l.value)).collect();
    let (e_last, l_last) = &per_eps[n - 1];
    let rung_values = l_last.rung_values.clone();
    let mk = |value, trend, error_bar| LimitEstimate {
        value,
        trend,
        rung_values: rung_values.clone(),
        error_bar,
        eps_values: eps_values.clone(),
    };
    match l_last.value {
        None => Ok(mk(None, Trend::Oscillating, l_last.error_bar)),
        Some(PosInf) => Ok(mk(Some(PosInf), Trend::DivergingUp, f64::INFINITY)),
        Some(NegInf) => Ok(mk(Some(NegInf), Trend::DivergingDown, f64::INFINITY)),
        Some(ExtendedReal::Finite(b)) => {
            let prev = if n >= 2 { per_eps[n - 2].1.finite() } else { None };
            match prev {
                Some(a) => {
                    let e_prev = per_eps[n - 2].0;
                    let slope = (b - a) / (e_last - e_prev);
                    let v0 = b - slope * e_last;
                    let bar = (v0 - b).abs() + l_last.error_bar + cfg.conv_abs;
                    Ok(mk(Some(ExtendedReal::finite(v0)), Trend::Converged, bar))
                }
                None => Ok(mk(
                    Some(ExtendedReal::finite(b)),
                    Trend::Converged,
                    l_last.error_bar + cfg.conv_abs,
                )),
            }
        }
    }
}

/// Rounds to the nearest multiple of `2^-12` (or to an integer on shells of
/// radius at least 10), so that sums with dyadic steps stay exact.
pub fn snap(x: f64, radius: f64) -> f64 {
    if radius >= 10.0 {
        x.round()
    } else {
        (x * 4096.0).round() / 4096.0
    }
}

/// Deterministic directions on the unit sphere of `R^k`: the `2k` axis
/// directions followed by `samples` seeded uniform directions.
pub fn sphere_directions(k: usize, samples: usize, seed: u64) -> Vec<Vector> {
    let mut out = Vec::new();
    for i in 0..k {
        out.push(unit(k, i));
        let mut m = vec![0.0; k];
        m[i] = -1.0;
        out.push(m);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while out.len() < 2 * k + samples {
        let g: Vector = (0..k).map(|_| gaussian(&mut rng)).collect();
        if let Some(u) = normalize(&g) {
            out.push(u);
        }
    }
    out
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let u1: f64 = rng.gen_range(1e-12..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Far points `x` with `‖π(x)‖ ≈ R`: π-coordinates on the sphere of radius
/// `R`, complementary coordinates drawn from `[-R, R]`. The same base
/// directions are reused on every rung.
#[derive(Clone, Debug)]
pub struct ShellSampler {
    dim: usize,
    index: Vec<usize>,
    dirs: Vec<Vector>,
    comp: Vec<Vector>,
}

impl ShellSampler {
    pub fn new(dim: usize, index: &IndexSet, samples: usize, seed: u64) -> Self {
        let idx = index.zero_based();
        let dirs = sphere_directions(idx.len(), samples, seed);
        let ncomp = dim - idx.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
        let comp = dirs
            .iter()
            .enumerate()
            .map(|(j, _)| {
                (0..ncomp)
                    .map(|_| if j < 2 * idx.len() { 0.0 } else { rng.gen_range(-1.0..1.0) })
                    .collect()
            })
            .collect();
        Self {
            dim,
            index: idx,
            dirs,
            comp,
        }
    }

    pub fn len(&self) -> usize {
        self.dirs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }

    pub fn points(&self, radius: f64) -> Vec<Vector> {
        let others: Vec<usize> = (0..self.dim).filter(|i| !self.index.contains(i)).collect();
        self.dirs
            .iter()
            .zip(&self.comp)
            .map(|(d, c)| {
                let mut x = vec![0.0; self.dim];
                for (k, &i) in self.index.iter().enumerate() {
                    x[i] = snap(radius * d[k], radius);
                }
                for (k, &i) in others.iter().enumerate() {
                    x[i] = snap(radius * c[k], radius);
                }
                x
            })
            .collect()
    }
}

/// Grid on the closed ball `B_eps(v)`: the center, `v ± eps·e_i`, the
/// normalized corners and `extra` seeded interior points. Everything except
/// the center is snapped to multiples of `2^-12`.
pub fn ball_grid(v: &[f64], eps: f64, extra: usize, seed: u64) -> Vec<Vector> {
    let n = v.len();
    let snap12 = |x: f64| (x * 4096.0).round() / 4096.0;
    let mut out = vec![v.to_vec()];
    for i in 0..n {
        for s in [1.0, -1.0] {
            let mut w = v.to_vec();
            w[i] += s * eps;
            out.push(w.iter().map(|x| snap12(*x)).collect());
        }
    }
    if n > 1 && n <= 4 {
        for code in 0..(1usize << n) {
            let c = (n as f64).sqrt();
            let w: Vector = (0..n)
                .map(|i| {
                    let s = if code >> i & 1 == 1 { 1.0 } else { -1.0 };
                    snap12(v[i] + s * eps / c)
                })
                .collect();
            out.push(w);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(101));
    for _ in 0..extra {
        let g: Vector = (0..n).map(|_| gaussian(&mut rng)).collect();
        let Some(u) = normalize(&g) else { continue };
        let r = eps * rng.gen_range(0.0f64..1.0).powf(1.0 / n as f64);
        out.push((0..n).map(|i| snap12(v[i] + r * u[i])).collect());
    }
    out
}
