//! Batch requests, JSON reports, the golden-case corpus runner and CSV
//! plot data.

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::cones::{cones_at_infinity, pointedness_check, ConePairAtInfinity, PointednessReport};
use crate::error::{Error, Result};
use crate::estimators::{tangent_membership, upper_subderivative, TangentVerdict};
use crate::expr::{FuncDesc, SetDesc};
use crate::ext_real::{ExtendedReal, NegInf, PosInf};
use crate::geometry::{PolyCone, PolyConvexSet};
use crate::ladder::{sphere_directions, IndexSet, LadderConfig};
use crate::linalg::Vector;
use crate::optimality::{constrained_condition_at_infinity, fermat_at_infinity, OptimalityCertificate};
use crate::subdiff::{
    classify_lipschitz_at_infinity, directionally_lipschitz_test, distance_subgradients_at_infinity,
    epigraph_pair, singular_subgradients, subgradients_best, sum_rule_check, DirLipReport,
    DistanceSubgradients, Lipschitz, LipschitzVerdict, Route, SubgradientSetAtInfinity, SumRuleReport,
};
use crate::tolerance::Tolerance;

pub const SCHEMA: u32 = 1;
pub const DUALITY_DIRECTIONS: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RequestKind {
    Cones,
    Subdiff,
    Lipschitz,
    Dirlip,
    Sumrule,
    Distance,
    Optcheck,
    TangentTest,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisRequest {
    pub kind: RequestKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub function: Option<String>,
    /// Second summand for `sumrule`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub second: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub set: Option<String>,
    /// Ambient dimension for sets (inferred from the variables otherwise).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<Vec<f64>>,
    /// 1-based coordinates that escape to infinity; all by default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<Vec<usize>>,
    #[serde(default)]
    pub config: LadderConfig,
    #[serde(default)]
    pub tolerance: Tolerance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

impl AnalysisRequest {
    pub fn new(kind: RequestKind) -> Self {
        Self {
            kind,
            function: None,
            second: None,
            set: None,
            dim: None,
            direction: None,
            index: None,
            config: LadderConfig::default(),
            tolerance: Tolerance::default(),
            output: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        use RequestKind::*;
        let need = |field: &Option<String>, name: &str| -> Result<()> {
            match field {
                Some(s) if !s.trim().is_empty() => Ok(()),
                _ => Err(Error::Invalid(format!("{} request needs `{name}`", self.kind.name()))),
            }
        };
        match self.kind {
            Cones => {
                if self.function.is_none() && self.set.is_none() {
                    return Err(Error::Invalid("cones request needs `function` or `set`".into()));
                }
            }
            Subdiff | Lipschitz => need(&self.function, "function")?,
            Dirlip => {
                need(&self.function, "function")?;
                if self.direction.is_none() {
                    return Err(Error::Invalid("dirlip request needs `direction`".into()));
                }
            }
            Sumrule => {
                need(&self.function, "function")?;
                need(&self.second, "second")?;
            }
            Distance => need(&self.set, "set")?,
            Optcheck => need(&self.function, "function")?,
            TangentTest => {
                need(&self.set, "set")?;
                if self.direction.is_none() {
                    return Err(Error::Invalid("tangent-test request needs `direction`".into()));
                }
            }
        }
        self.config.validate()?;
        self.tolerance.validate()
    }

    fn function(&self) -> Result<FuncDesc> {
        FuncDesc::parse_with_dim(self.function.as_deref().unwrap_or_default(), self.dim)
    }

    fn set(&self, dim: Option<usize>) -> Result<SetDesc> {
        SetDesc::parse(self.set.as_deref().unwrap_or_default(), dim.or(self.dim))
    }

    fn index(&self, dim: usize) -> Result<IndexSet> {
        match &self.index {
            Some(c) => IndexSet::new(c.clone(), dim),
            None => Ok(IndexSet::all(dim)),
        }
    }
}

impl RequestKind {
    pub fn name(&self) -> &'static str {
        match self {
            RequestKind::Cones => "cones",
            RequestKind::Subdiff => "subdiff",
            RequestKind::Lipschitz => "lipschitz",
            RequestKind::Dirlip => "dirlip",
            RequestKind::Sumrule => "sumrule",
            RequestKind::Distance => "distance",
            RequestKind::Optcheck => "optcheck",
            RequestKind::TangentTest => "tangent-test",
        }
    }
}

/// Subgradient set without the per-direction ladders.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetSummary {
    pub set: PolyConvexSet,
    pub route: Route,
    pub outer_approximation: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl From<&SubgradientSetAtInfinity> for SetSummary {
    fn from(s: &SubgradientSetAtInfinity) -> Self {
        Self {
            set: s.set.clone(),
            route: s.route,
            outer_approximation: s.diagnostics.outer_approximation,
            notes: s.diagnostics.notes.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualityRow {
    pub angle: f64,
    pub direction: Vector,
    /// `f↑(∞; v)`; withheld when the ladder oscillates.
    pub estimate: Option<ExtendedReal>,
    pub support: ExtendedReal,
    /// `|support − estimate|`, zero for matching infinities.
    pub residual: Option<ExtendedReal>,
    pub error_bar: ExtendedReal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubdiffResult {
    pub subgradients: SetSummary,
    pub empty: bool,
    pub lipschitz: LipschitzVerdict,
    pub singular: PolyCone,
    pub duality_residuals: Vec<DualityRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipschitzResult {
    pub verdict: LipschitzVerdict,
    pub subgradients: SetSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConesResult {
    pub pair: ConePairAtInfinity,
    pub pointedness: PointednessReport,
    /// `epi f` when the request named a function.
    pub epigraph: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SumRuleResult {
    pub sum: SetSummary,
    pub first: SetSummary,
    pub second: SetSummary,
    pub empty_branch: bool,
    pub hypothesis_witnessed: bool,
    pub rows: Vec<crate::subdiff::SumRuleRow>,
    pub inclusion_holds: bool,
    pub subderivative_holds: bool,
    pub label: String,
}

impl From<SumRuleReport> for SumRuleResult {
    fn from(r: SumRuleReport) -> Self {
        Self {
            sum: (&r.sum).into(),
            first: (&r.first).into(),
            second: (&r.second).into(),
            empty_branch: r.empty_branch,
            hypothesis_witnessed: r.hypothesis_witnessed,
            rows: r.rows,
            inclusion_holds: r.inclusion_holds,
            subderivative_holds: r.subderivative_holds,
            label: r.label,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceResult {
    pub subgradients: SetSummary,
    pub perpendiculars: Vec<Vector>,
    pub perpendiculars_empty: bool,
    pub cross_check: Option<bool>,
}

impl From<DistanceSubgradients> for DistanceResult {
    fn from(d: DistanceSubgradients) -> Self {
        Self {
            subgradients: (&d.result).into(),
            perpendiculars: d.perpendiculars,
            perpendiculars_empty: d.perpendiculars_empty,
            cross_check: d.cross_check,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalysisResult {
    Cones(ConesResult),
    Subdiff(SubdiffResult),
    Lipschitz(LipschitzResult),
    Dirlip(DirLipReport),
    Sumrule(SumRuleResult),
    Distance(DistanceResult),
    Optcheck(OptimalityCertificate),
    TangentTest(TangentVerdict),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub wall_time_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: u32,
    pub version: String,
    pub seed: u64,
    pub request: AnalysisRequest,
    pub result: AnalysisResult,
    pub timing: Timing,
}

impl Report {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// The report with the `timing` block removed; identical requests give
    /// identical strings.
    pub fn deterministic_json(&self) -> Result<String> {
        let mut v = serde_json::to_value(self)?;
        if let Value::Object(m) = &mut v {
            m.remove("timing");
        }
        Ok(serde_json::to_string_pretty(&v)?)
    }
}

/// Directions for the duality table: the unit circle at `k·2π/16` in the
/// first two coordinates (its first coordinate alone in dimension one),
/// seeded sphere directions in higher dimensions.
pub fn duality_grid(dim: usize, seed: u64) -> Vec<(f64, Vector)> {
    let step = 2.0 * std::f64::consts::PI / DUALITY_DIRECTIONS as f64;
    let round = |x: f64| (x * 4096.0).round() / 4096.0;
    match dim {
        1 => (0..DUALITY_DIRECTIONS)
            .map(|k| (k as f64 * step, vec![round((k as f64 * step).cos())]))
            .collect(),
        2 => (0..DUALITY_DIRECTIONS)
            .map(|k| {
                let a = k as f64 * step;
                (a, vec![round(a.cos()), round(a.sin())])
            })
            .collect(),
        _ => sphere_directions(dim, DUALITY_DIRECTIONS, seed)
            .into_iter()
            .skip(2 * dim)
            .enumerate()
            .map(|(k, v)| (k as f64 * step, v.into_iter().map(round).collect()))
            .collect(),
    }
}

fn residual(support: ExtendedReal, est: Option<ExtendedReal>) -> Option<ExtendedReal> {
    match (support, est?) {
        (PosInf, PosInf) | (NegInf, NegInf) => Some(ExtendedReal::ZERO),
        (ExtendedReal::Finite(a), ExtendedReal::Finite(b)) => Some(ExtendedReal::finite((a - b).abs())),
        _ => Some(PosInf),
    }
}

pub fn duality_rows(f: &FuncDesc, set: &PolyConvexSet, cfg: &LadderConfig) -> Result<Vec<DualityRow>> {
    let mut rows = Vec::new();
    for (angle, v) in duality_grid(f.dim, cfg.seed) {
        let est = upper_subderivative(f, &v, cfg)?;
        let support = set.support(&v);
        rows.push(DualityRow {
            angle,
            residual: residual(support, est.value),
            estimate: est.value,
            support,
            direction: v,
            error_bar: ExtendedReal::from_f64(est.error_bar).unwrap_or(PosInf),
        });
    }
    Ok(rows)
}

fn dispatch(req: &AnalysisRequest) -> Result<AnalysisResult> {
    let cfg = &req.config;
    let tol = &req.tolerance;
    Ok(match req.kind {
        RequestKind::Cones => {
            let (pair, epigraph) = match &req.set {
                Some(_) => {
                    let c = req.set(None)?;
                    let index = req.index(c.dim)?;
                    (cones_at_infinity(&c, &index, cfg, tol)?, false)
                }
                None => (epigraph_pair(&req.function()?, cfg, tol)?, true),
            };
            let pointedness = pointedness_check(&pair, tol)?;
            AnalysisResult::Cones(ConesResult {
                pair,
                pointedness,
                epigraph,
            })
        }
        RequestKind::Subdiff => {
            let f = req.function()?;
            let lipschitz = classify_lipschitz_at_infinity(&f, cfg, tol)?;
            let s = subgradients_best(&f, cfg, tol, lipschitz.verdict == Lipschitz::LipschitzAtInfinity)?;
            let singular = singular_subgradients(&f, cfg, tol)?;
            let duality_residuals = duality_rows(&f, &s.set, cfg)?;
            AnalysisResult::Subdiff(SubdiffResult {
                empty: s.set.is_empty(),
                subgradients: (&s).into(),
                lipschitz,
                singular,
                duality_residuals,
            })
        }
        RequestKind::Lipschitz => {
            let f = req.function()?;
            let verdict = classify_lipschitz_at_infinity(&f, cfg, tol)?;
            let s = subgradients_best(&f, cfg, tol, verdict.verdict == Lipschitz::LipschitzAtInfinity)?;
            AnalysisResult::Lipschitz(LipschitzResult {
                verdict,
                subgradients: (&s).into(),
            })
        }
        RequestKind::Dirlip => {
            let f = req.function()?;
            let v = req.direction.clone().unwrap_or_default();
            AnalysisResult::Dirlip(directionally_lipschitz_test(&f, &v, cfg)?)
        }
        RequestKind::Sumrule => {
            let f1 = req.function()?;
            let f2 = FuncDesc::parse_with_dim(req.second.as_deref().unwrap_or_default(), Some(f1.dim))?;
            AnalysisResult::Sumrule(sum_rule_check(&f1, &f2, cfg, tol)?.into())
        }
        RequestKind::Distance => {
            let c = req.set(None)?;
            AnalysisResult::Distance(distance_subgradients_at_infinity(&c, cfg, tol)?.into())
        }
        RequestKind::Optcheck => {
            let f = req.function()?;
            match &req.set {
                Some(_) => {
                    let c = req.set(Some(f.dim))?;
                    AnalysisResult::Optcheck(constrained_condition_at_infinity(&f, &c, cfg, tol)?)
                }
                None => AnalysisResult::Optcheck(fermat_at_infinity(&f, cfg, tol)?),
            }
        }
        RequestKind::TangentTest => {
            let v = req.direction.clone().unwrap_or_default();
            let c = req.set(Some(v.len()))?;
            let index = req.index(c.dim)?;
            AnalysisResult::TangentTest(tangent_membership(&c, &v, &index, cfg)?)
        }
    })
}

pub fn run_request(req: &AnalysisRequest) -> Result<Report> {
    req.validate()?;
    let start = Instant::now();
    let result = dispatch(req)?;
    let wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
    let timestamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    Ok(Report {
        schema: SCHEMA,
        version: env!("CARGO_PKG_VERSION").into(),
        seed: req.config.seed,
        request: req.clone(),
        result,
        timing: Timing {
            timestamp,
            wall_time_ms,
        },
    })
}

// ---------------------------------------------------------------------------
// Corpus

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Paper,
    Trivial,
    DerivedOracle,
}

/// What a golden case checks. Every field is optional; absent fields are
/// not compared.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expected {
    /// Compared with `set_eq`.
    pub subgradients: Option<PolyConvexSet>,
    /// Compare subgradients by Hausdorff distance in this box instead.
    pub hausdorff_box: Option<f64>,
    pub empty: Option<bool>,
    pub normal_cone: Option<PolyCone>,
    pub tangent_cone: Option<PolyCone>,
    /// Verdict label: lipschitz / dirlip / optcheck / tangent-test.
    pub verdict: Option<String>,
    /// Closed interval for the Lipschitz constant.
    pub lipschitz_constant: Option<[f64; 2]>,
    /// Upper bound on the largest duality residual.
    pub max_duality_residual: Option<f64>,
    pub holds: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoldenCase {
    pub id: String,
    /// Cases without a tag are refused.
    #[serde(default)]
    pub provenance: Option<Provenance>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    pub request: AnalysisRequest,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected: Option<Expected>,
    /// Expected block kept in a separate file, relative to the case.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_file: Option<String>,
    /// Replaces the request tolerance for the comparison.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<Tolerance>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseOutcome {
    pub id: String,
    pub file: String,
    pub passed: bool,
    pub failures: Vec<String>,
    pub wall_time_ms: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub cases: Vec<CaseOutcome>,
    pub warnings: Vec<String>,
    /// Cases whose expected block could not be found.
    pub missing_expected: Vec<String>,
    /// Deterministic part of every report, by case id.
    #[serde(skip)]
    pub reports: Vec<(String, String)>,
}

impl CorpusSummary {
    pub fn all_passed(&self) -> bool {
        self.cases.iter().all(|c| c.passed) && self.missing_expected.is_empty()
    }

    pub fn failures(&self) -> usize {
        self.cases.iter().filter(|c| !c.passed).count()
    }

    pub fn junit_xml(&self) -> String {
        let esc = |s: &str| {
            s.replace('&', "&amp;")
                .replace('<', "&lt;")
                .replace('>', "&gt;")
                .replace('"', "&quot;")
        };
        let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
        out.push_str(&format!(
            "<testsuite name=\"corpus\" tests=\"{}\" failures=\"{}\">\n",
            self.cases.len(),
            self.failures()
        ));
        for c in &self.cases {
            out.push_str(&format!(
                "  <testcase name=\"{}\" classname=\"{}\" time=\"{:.3}\"",
                esc(&c.id),
                esc(&c.file),
                c.wall_time_ms / 1e3
            ));
            if c.passed {
                out.push_str("/>\n");
            } else {
                out.push_str(">\n");
                out.push_str(&format!(
                    "    <failure message=\"{}\"/>\n",
                    esc(&c.failures.join("; "))
                ));
                out.push_str("  </testcase>\n");
            }
        }
        out.push_str("</testsuite>\n");
        out
    }
}

fn set_matches(got: &PolyConvexSet, want: &PolyConvexSet, boxr: Option<f64>, tol: &Tolerance) -> Result<bool> {
    match boxr {
        Some(r) => {
            if got.is_empty() || want.is_empty() {
                return Ok(got.is_empty() == want.is_empty());
            }
            Ok(got.hausdorff_in_box(want, r)? < tol.abs_tol)
        }
        None => got.set_eq(want, tol),
    }
}

fn verdict_label(result: &AnalysisResult) -> Result<Option<String>> {
    let label = |v: Value| v.as_str().map(str::to_string);
    Ok(match result {
        AnalysisResult::Lipschitz(r) => label(serde_json::to_value(r.verdict.verdict)?),
        AnalysisResult::Subdiff(r) => label(serde_json::to_value(r.lipschitz.verdict)?),
        AnalysisResult::Dirlip(r) => label(serde_json::to_value(r.answer)?),
        AnalysisResult::Optcheck(r) => label(serde_json::to_value(r.verdict)?),
        AnalysisResult::TangentTest(r) => label(serde_json::to_value(r.verdict)?),
        _ => None,
    })
}

/// Compares a result with its expected block; returns the failed checks.
pub fn compare(result: &AnalysisResult, want: &Expected, tol: &Tolerance) -> Result<Vec<String>> {
    let mut fails = Vec::new();
    let subgradients: Option<&SetSummary> = match result {
        AnalysisResult::Subdiff(r) => Some(&r.subgradients),
        AnalysisResult::Lipschitz(r) => Some(&r.subgradients),
        AnalysisResult::Sumrule(r) => Some(&r.sum),
        AnalysisResult::Distance(r) => Some(&r.subgradients),
        _ => None,
    };
    let optimality_set = match result {
        AnalysisResult::Optcheck(c) => c.subgradients.as_ref(),
        _ => None,
    };
    let got_set = subgradients.map(|s| &s.set).or(optimality_set);
    if let Some(w) = &want.subgradients {
        match got_set {
            Some(g) if set_matches(g, w, want.hausdorff_box, tol)? => {}
            Some(g) => fails.push(format!("subgradients: got {}", serde_json::to_string(g)?)),
            None => fails.push("subgradients: result has no subgradient set".into()),
        }
    }
    if let Some(e) = want.empty {
        match got_set {
            Some(g) if g.is_empty() == e => {}
            _ => fails.push(format!("empty: expected {e}")),
        }
    }
    let pair_cones = match result {
        AnalysisResult::Cones(r) => Some((&r.pair.tangent, &r.pair.normal)),
        _ => None,
    };
    if let Some(w) = &want.normal_cone {
        let got = pair_cones.map(|p| p.1).or(match result {
            AnalysisResult::Optcheck(c) => c.normal_cone.as_ref(),
            _ => None,
        });
        match got {
            Some(g) if g.set_eq(w, tol)? => {}
            Some(g) => fails.push(format!("normal_cone: got {}", serde_json::to_string(g)?)),
            None => fails.push("normal_cone: result has no normal cone".into()),
        }
    }
    if let Some(w) = &want.tangent_cone {
        match pair_cones {
            Some((t, _)) if t.set_eq(w, tol)? => {}
            Some((t, _)) => fails.push(format!("tangent_cone: got {}", serde_json::to_string(t)?)),
            None => fails.push("tangent_cone: result has no tangent cone".into()),
        }
    }
    if let Some(w) = &want.verdict {
        let got = verdict_label(result)?;
        if got.as_deref() != Some(w.as_str()) {
            fails.push(format!("verdict: expected {w}, got {got:?}"));
        }
    }
    if let Some([lo, hi]) = want.lipschitz_constant {
        let l = match result {
            AnalysisResult::Lipschitz(r) => r.verdict.constant,
            AnalysisResult::Subdiff(r) => r.lipschitz.constant,
            _ => None,
        };
        if !l.is_some_and(|l| (lo..=hi).contains(&l)) {
            fails.push(format!("lipschitz_constant: {l:?} outside [{lo}, {hi}]"));
        }
    }
    if let Some(bound) = want.max_duality_residual {
        match result {
            AnalysisResult::Subdiff(r) => {
                for row in &r.duality_residuals {
                    let ok = row.residual.is_some_and(|x| x.to_f64() <= bound);
                    if !ok {
                        fails.push(format!("duality residual at angle {}: {:?}", row.angle, row.residual));
                    }
                }
            }
            _ => fails.push("max_duality_residual: not a subdiff result".into()),
        }
    }
    if let Some(h) = want.holds {
        match result {
            AnalysisResult::Optcheck(c) if c.holds == h => {}
            AnalysisResult::Optcheck(c) => fails.push(format!("holds: expected {h}, got {}", c.holds)),
            _ => fails.push("holds: not an optcheck result".into()),
        }
    }
    Ok(fails)
}

fn load_expected(case: &GoldenCase, dir: &Path) -> Option<Expected> {
    if let Some(e) = &case.expected {
        return Some(e.clone());
    }
    let p = dir.join(case.expected_file.as_ref()?);
    let text = std::fs::read_to_string(p).ok()?;
    serde_json::from_str(&text).ok()
}

/// Case files (`*.json`, excluding `*.expected.json`) in name order.
pub fn corpus_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
            name.ends_with(".json") && !name.ends_with(".expected.json")
        })
        .collect();
    files.sort();
    Ok(files)
}

pub fn run_case(case: &GoldenCase, dir: &Path, file: &str, summary: &mut CorpusSummary) -> Result<()> {
    let mut failures = Vec::new();
    let start = Instant::now();
    let expected = load_expected(case, dir);
    if case.provenance.is_none() {
        failures.push("untagged case refused: provenance is required".into());
    } else if expected.is_none() {
        summary.missing_expected.push(case.id.clone());
        failures.push("expected block missing".into());
    } else {
        match run_request(&case.request) {
            Ok(report) => {
                let tol = case.tolerance.unwrap_or(case.request.tolerance);
                failures.extend(compare(&report.result, expected.as_ref().unwrap_or(&Expected::default()), &tol)?);
                summary.reports.push((case.id.clone(), report.deterministic_json()?));
            }
            Err(e) => failures.push(format!("{} error: {e}", e.provenance())),
        }
    }
    summary.cases.push(CaseOutcome {
        id: case.id.clone(),
        file: file.into(),
        passed: failures.is_empty(),
        failures,
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
    });
    Ok(())
}

/// Runs every golden case in `dir`; cases are reported in id order.
pub fn run_corpus(dir: &Path) -> Result<CorpusSummary> {
    let mut summary = CorpusSummary::default();
    let files = corpus_files(dir)?;
    if files.is_empty() {
        summary.warnings.push(format!("no cases in {}", dir.display()));
    }
    for p in files {
        let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("").to_string();
        let text = std::fs::read_to_string(&p)?;
        match serde_json::from_str::<GoldenCase>(&text) {
            Ok(case) => run_case(&case, dir, &name, &mut summary)?,
            Err(e) => summary.cases.push(CaseOutcome {
                id: name.clone(),
                file: name,
                passed: false,
                failures: vec![format!("unreadable case: {e}")],
                wall_time_ms: 0.0,
            }),
        }
    }
    summary.cases.sort_by(|a, b| a.id.cmp(&b.id));
    summary.reports.sort();
    Ok(summary)
}

// ---------------------------------------------------------------------------
// Plot data

fn ext_cell(v: Option<&Value>) -> String {
    match v {
        Some(Value::String(s)) => s.clone(),
        Some(Value::Number(n)) => n.to_string(),
        _ => "nan".into(),
    }
}

/// CSV `angle,estimate,support,residual` from the duality table of a
/// subdiff report (given as JSON).
pub fn emit_plot_data(report: &Value) -> Result<String> {
    let rows = report
        .pointer("/result/subdiff/duality_residuals")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Invalid("report has no subderivative table".into()))?;
    let mut out = String::from("angle,estimate,support,residual\n");
    for r in rows {
        let angle = r.get("angle").and_then(Value::as_f64).unwrap_or(f64::NAN);
        out.push_str(&format!(
            "{angle:.6},{},{},{}\n",
            ext_cell(r.get("estimate")),
            ext_cell(r.get("support")),
            ext_cell(r.get("residual"))
        ));
    }
    Ok(out)
}

pub fn emit_plot_data_for(report: &Report) -> Result<String> {
    emit_plot_data(&serde_json::to_value(report)?)
}
