//! Acceptance criteria. Each criterion is its own test and prints one
//! `criterion N: PASS|FAIL` line (visible with `--nocapture`).

mod common;

use std::path::Path;
use std::time::{Duration, Instant};

use clarke_inf::cones::sampled_normal_cone;
use clarke_inf::estimators::upper_subderivative;
use clarke_inf::ladder::{IndexSet, LadderConfig};
use clarke_inf::linalg::angle;
use clarke_inf::optimality::{constrained_condition_at_infinity, fermat_at_infinity, CertificateVerdict};
use clarke_inf::report::{duality_grid, run_corpus, AnalysisRequest, GoldenCase, RequestKind};
use clarke_inf::subdiff::{
    classify_lipschitz_at_infinity, directionally_lipschitz_test, subgradients_best,
    subgradients_epigraph_polar, subgradients_gradient_sampling, subgradients_support_reconstruction,
    sum_rule_check, support_grid, Answer, Condition, Lipschitz, Route,
};
use clarke_inf::{parse_function, parse_set, FuncDesc, PolyCone, PolyConvexSet, Tolerance};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const HINGE: &str = "piecewise(x1 <= 0: 0; else: -x1)";
const HUBER: &str = "piecewise(x1 >= 1: x1; x1 >= -1: 0.5*x1^2 + 0.5; else: -x1)";
const HYPERBOLA: &str = "x1 >= 0; x2 >= 0; x1*x2 >= 1";

type Outcome = Result<String, String>;

fn cfg() -> LadderConfig {
    LadderConfig::default()
}

fn tol() -> Tolerance {
    Tolerance::default()
}

fn f(src: &str) -> FuncDesc {
    parse_function(src).unwrap()
}

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn report(n: usize, name: &str, out: Outcome) {
    match &out {
        Ok(detail) => println!("criterion {n}: PASS  {name}  ({detail})"),
        Err(why) => println!("criterion {n}: FAIL  {name}  ({why})"),
    }
    assert!(out.is_ok(), "criterion {n} failed: {}", out.unwrap_err());
}

fn err<E: std::fmt::Debug>(e: E) -> String {
    format!("{e:?}")
}

fn interval(a: f64, b: f64) -> PolyConvexSet {
    PolyConvexSet::new(1, vec![vec![a], vec![b]], vec![]).unwrap()
}

fn endpoints(s: &PolyConvexSet) -> (f64, f64) {
    (-s.support(&[-1.0]).to_f64(), s.support(&[1.0]).to_f64())
}

fn corpus_dir() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/corpus"))
}

/// Function sources named by the shipped corpus plus the registered
/// examples.
fn corpus_functions() -> Vec<String> {
    let mut out: Vec<String> = [HINGE, "exp(x1)", "x1^3", "-abs(x1)", HUBER, "exp(-x1)", "2*x1", "x1 - 2*x2", "-abs(x1) + x2"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for p in clarke_inf::report::corpus_files(corpus_dir()).unwrap() {
        let case: GoldenCase = serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap();
        for src in [case.request.function, case.request.second].into_iter().flatten() {
            if !out.contains(&src) {
                out.push(src);
            }
        }
    }
    out
}

#[test]
fn criterion_01_subgradient_triple() {
    let start = Instant::now();
    let run = || -> Outcome {
        let s = subgradients_epigraph_polar(&f(HINGE)).map_err(err)?;
        ensure(s.set.set_eq(&interval(-1.0, 0.0), &tol()).map_err(err)?, format!("hinge: {:?}", s.set))?;

        let s = subgradients_support_reconstruction(&f("exp(x1)"), &cfg(), &support_grid(1)).map_err(err)?;
        let want = PolyConvexSet::new(1, vec![vec![0.0]], vec![vec![1.0]]).unwrap();
        let h = s.set.hausdorff_in_box(&want, 1.0).map_err(err)?;
        ensure(h < 1e-2, format!("exp: Hausdorff {h}"))?;

        let s = subgradients_support_reconstruction(&f("x1^3"), &cfg(), &support_grid(1)).map_err(err)?;
        ensure(s.set.is_empty(), format!("cube: {:?}", s.set))?;

        let t = start.elapsed();
        ensure(t < Duration::from_secs(10), format!("took {t:?}"))?;
        Ok(format!("exp Hausdorff {h:.2e}, {:.2} s", t.as_secs_f64()))
    };
    report(1, "hinge / exp / cube subgradient sets", run());
}

#[test]
fn criterion_02_directional_lipschitz() {
    let start = Instant::now();
    let run = || -> Outcome {
        let g = f("exp(x1) + x2");
        let cases = [
            ([-1.0, 0.0], Answer::Yes),
            ([-1.0, 1.0], Answer::Yes),
            ([-0.5, -2.0], Answer::Yes),
            ([1.0, 0.0], Answer::No),
            ([0.0, 1.0], Answer::No),
        ];
        for (v, want) in cases {
            let r = directionally_lipschitz_test(&g, &v, &cfg()).map_err(err)?;
            ensure(r.answer == want, format!("{v:?}: {:?}", r.answer))?;
            ensure(r.agree, format!("{v:?}: channels disagree"))?;
        }
        let t = start.elapsed();
        ensure(t < Duration::from_secs(30), format!("took {t:?}"))?;
        Ok(format!("5 directions, {:.2} s", t.as_secs_f64()))
    };
    report(2, "directional Lipschitz test on exp(x1) + x2", run());
}

#[test]
fn criterion_03_hyperbola_region() {
    let run = || -> Outcome {
        let c = parse_set(HYPERBOLA, Some(2)).map_err(err)?;
        let pair = sampled_normal_cone(&c, &IndexSet::all(2), &cfg(), &tol()).map_err(err)?;
        let want = [vec![-1.0, 0.0], vec![0.0, -1.0]];
        ensure(pair.normal.lineality.is_empty(), "sampled normal cone has lineality")?;
        let mut worst: f64 = 0.0;
        for w in &want {
            let a = pair.normal.rays.iter().map(|r| angle(r, w)).fold(f64::INFINITY, f64::min);
            worst = worst.max(a);
        }
        for r in &pair.normal.rays {
            let a = want.iter().map(|w| angle(r, w)).fold(f64::INFINITY, f64::min);
            worst = worst.max(a);
        }
        ensure(worst < 1e-2, format!("generator angle error {worst}"))?;

        let g = f("x1 + 0*x2");
        let s = subgradients_epigraph_polar(&g).map_err(err)?;
        ensure(
            s.set.set_eq(&PolyConvexSet::point(vec![1.0, 0.0]), &tol()).map_err(err)?,
            format!("subgradients {:?}", s.set),
        )?;

        let cert = constrained_condition_at_infinity(&g, &c, &cfg(), &tol()).map_err(err)?;
        ensure(cert.verdict == CertificateVerdict::Holds && cert.holds, format!("{:?}", cert.verdict))?;
        let d = cert.decomposition.ok_or("no decomposition")?;
        let res = d.xi.iter().zip(&d.w).map(|(a, b)| (a + b).powi(2)).sum::<f64>().sqrt();
        ensure(res < 1e-6, format!("residual {res}"))?;
        Ok(format!("angle error {worst:.1e}, residual {res:.1e}"))
    };
    report(3, "normal cone, subgradients and certificate on the hyperbola region", run());
}

#[test]
fn criterion_04_lipschitz_at_infinity() {
    let run = || -> Outcome {
        let mut detail = Vec::new();
        for src in ["-abs(x1)", HUBER] {
            let g = f(src);
            let s = subgradients_gradient_sampling(&g, &cfg(), &tol()).map_err(err)?;
            let (lo, hi) = endpoints(&s.set);
            ensure(
                (lo + 1.0).abs() < 1e-3 && (hi - 1.0).abs() < 1e-3,
                format!("{src}: [{lo}, {hi}]"),
            )?;
            let v = classify_lipschitz_at_infinity(&g, &cfg(), &tol()).map_err(err)?;
            ensure(v.verdict == Lipschitz::LipschitzAtInfinity, format!("{src}: {:?}", v.verdict))?;
            let l = v.constant.ok_or("no constant")?;
            ensure((1.0..=1.1).contains(&l), format!("{src}: L = {l}"))?;
            detail.push(format!("L = {l:.4}"));
        }
        let v = classify_lipschitz_at_infinity(&f("exp(x1)"), &cfg(), &tol()).map_err(err)?;
        ensure(v.verdict == Lipschitz::NotLipschitz, format!("exp: {:?}", v.verdict))?;
        let item = |id: &str| v.evidence.iter().find(|c| c.item == id).cloned();
        let iv = item("iv").ok_or("no item iv")?;
        let i = item("i").ok_or("no item i")?;
        ensure(iv.result == Condition::Fail, "exp: (iv) not falsified")?;
        ensure(i.result == Condition::Fail && i.detail.contains("unbounded"), "exp: (i) not unbounded")?;
        ensure(
            !v.evidence.iter().any(|c| c.result == Condition::Pass),
            "exp: a condition passed next to a failing one",
        )?;
        Ok(detail.join(", "))
    };
    report(4, "gradient sampling and the Lipschitz classifier", run());
}

#[test]
fn criterion_05_duality() {
    let run = || -> Outcome {
        let mut checked = 0;
        let mut worst: f64 = 0.0;
        for src in corpus_functions() {
            let g = f(&src);
            let lip = classify_lipschitz_at_infinity(&g, &cfg(), &tol())
                .map(|v| v.verdict == Lipschitz::LipschitzAtInfinity)
                .unwrap_or(false);
            let s = subgradients_best(&g, &cfg(), &tol(), lip).map_err(err)?;
            if s.set.is_empty() || !s.set.is_bounded() {
                continue;
            }
            let set_bar = if s.route == Route::EpigraphPolar { 0.0 } else { cfg().conv_abs };
            for (_, v) in duality_grid(g.dim, cfg().seed) {
                let est = upper_subderivative(&g, &v, &cfg()).map_err(err)?;
                let e = est.finite().ok_or(format!("{src} {v:?}: estimate withheld"))?;
                let sup = s.set.support(&v).to_f64();
                let bar = est.error_bar + cfg().conv_abs + set_bar;
                let r = (sup - e).abs();
                ensure(r < bar, format!("{src} {v:?}: |{sup} - {e}| >= {bar}"))?;
                worst = worst.max(r);
            }
            checked += 1;
        }
        ensure(checked >= 5, format!("only {checked} compact cases"))?;
        Ok(format!("{checked} functions x 16 directions, worst residual {worst:.1e}"))
    };
    report(5, "support function versus upper subderivative", run());
}

fn random_cone(rng: &mut ChaCha8Rng) -> PolyCone {
    loop {
        let dim = rng.gen_range(1..=3);
        let k = rng.gen_range(0..=6);
        let gens: Vec<Vec<f64>> = (0..k)
            .map(|_| (0..dim).map(|_| f64::from(rng.gen_range(-3i32..=3))).collect::<Vec<f64>>())
            .filter(|g| g.iter().any(|x| *x != 0.0))
            .collect();
        if let Ok(c) = PolyCone::new(dim, gens, vec![]) {
            return c;
        }
    }
}

#[test]
fn criterion_06_polar_involution_and_route_agreement() {
    let run = || -> Outcome {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for k in 0..200 {
            let c = random_cone(&mut rng);
            let cc = c.polar().map_err(err)?.polar().map_err(err)?;
            ensure(cc.set_eq(&c, &tol()).map_err(err)?, format!("cone {k}: {c:?}"))?;
        }
        let loose = Tolerance::new(1e-3, 1e-3, 1e-3).unwrap();
        let mut compared = 0;
        for src in corpus_functions() {
            let g = f(&src);
            let lip = classify_lipschitz_at_infinity(&g, &cfg(), &tol())
                .map(|v| v.verdict == Lipschitz::LipschitzAtInfinity)
                .unwrap_or(false);
            let mut sets: Vec<(&str, PolyConvexSet)> = Vec::new();
            if let Ok(s) = subgradients_epigraph_polar(&g) {
                sets.push(("epigraph", s.set));
            }
            if lip {
                sets.push(("gradient", subgradients_gradient_sampling(&g, &cfg(), &tol()).map_err(err)?.set));
            }
            // a one-dimensional closed convex set is fixed by its support at ±1
            if g.dim == 1 {
                let s = subgradients_support_reconstruction(&g, &cfg(), &support_grid(1)).map_err(err)?;
                sets.push(("support", s.set));
            }
            if sets.len() < 2 {
                continue;
            }
            for w in sets.windows(2) {
                let (a, b) = (&w[0], &w[1]);
                let same = if a.1.is_bounded() && b.1.is_bounded() {
                    a.1.set_eq(&b.1, &loose).map_err(err)?
                } else {
                    a.1.is_empty() == b.1.is_empty() && a.1.hausdorff_in_box(&b.1, 10.0).map_err(err)? < 1e-2
                };
                ensure(same, format!("{src}: {} {:?} vs {} {:?}", a.0, a.1, b.0, b.1))?;
            }
            compared += 1;
        }
        ensure(compared >= 3, format!("only {compared} functions with two routes"))?;
        Ok(format!("200 cones, {compared} functions with route agreement"))
    };
    report(6, "polar involution and route agreement", run());
}

#[test]
fn criterion_07_sum_rule() {
    let run = || -> Outcome {
        let pairs = [
            (HINGE, "x1"),
            (HINGE, HINGE),
            ("-abs(x1)", "x1"),
            (HUBER, "-abs(x1)"),
            (HUBER, "2*x1"),
            ("-abs(x1)", HINGE),
            ("2*x1", "-3*x1"),
            ("0*x1", HUBER),
            (HINGE, HUBER),
            ("-abs(x1)", "-abs(x1)"),
        ];
        for (a, b) in pairs {
            let r = sum_rule_check(&f(a), &f(b), &cfg(), &tol()).map_err(err)?;
            ensure(r.hypothesis_witnessed, format!("{a} + {b}: qualification not witnessed"))?;
            ensure(r.inclusion_holds, format!("{a} + {b}: inclusion fails"))?;
            ensure(r.subderivative_holds, format!("{a} + {b}: subderivative inequality fails"))?;
        }
        let r = sum_rule_check(&f("x1^3"), &f("0*x1"), &cfg(), &tol()).map_err(err)?;
        ensure(r.empty_branch && r.inclusion_holds, "cube: empty branch not taken")?;
        Ok("10 pairs plus the empty branch".into())
    };
    report(7, "sum rule", run());
}

#[test]
fn criterion_08_fermat() {
    let run = || -> Outcome {
        let c = fermat_at_infinity(&f("exp(-x1)"), &cfg(), &tol()).map_err(err)?;
        ensure(c.verdict == CertificateVerdict::Holds && c.holds, format!("exp(-x): {:?}", c.verdict))?;
        let set = parse_set(HYPERBOLA, Some(2)).map_err(err)?;
        let c = constrained_condition_at_infinity(&f("x1 + 0*x2"), &set, &cfg(), &tol()).map_err(err)?;
        ensure(c.verdict == CertificateVerdict::Holds && c.holds, format!("hyperbola: {:?}", c.verdict))?;
        let c = fermat_at_infinity(&f("x1^2"), &cfg(), &tol()).map_err(err)?;
        ensure(c.verdict == CertificateVerdict::NotApplicable, format!("x^2: {:?}", c.verdict))?;
        ensure(c.sequence.attained_flag, "x^2: infimum not flagged as attained")?;
        let c = fermat_at_infinity(&f("2*x1 - x2"), &cfg(), &tol()).map_err(err)?;
        ensure(c.verdict == CertificateVerdict::NotApplicable, format!("linear: {:?}", c.verdict))?;
        ensure(c.sequence.unbounded_below(), "linear: not unbounded below")?;
        Ok("holds, holds, not applicable (attained), not applicable (unbounded)".into())
    };
    report(8, "Fermat rule at infinity", run());
}

#[test]
fn criterion_09_extended_reals() {
    let fails = common::convention_table_failures();
    let n = common::table_values().len();
    let out = if fails.is_empty() {
        Ok(format!("{} pairs", n * n))
    } else {
        Err(fails.join("; "))
    };
    report(9, "extended-real convention table", out);
}

#[test]
fn criterion_10_determinism() {
    let run = || -> Outcome {
        let a = run_corpus(corpus_dir()).map_err(err)?;
        let b = run_corpus(corpus_dir()).map_err(err)?;
        ensure(a.reports.len() >= 10, format!("{} reports", a.reports.len()))?;
        ensure(a.reports == b.reports, "corpus reports differ between runs")?;
        let mut req = AnalysisRequest::new(RequestKind::Subdiff);
        req.function = Some(HUBER.into());
        let r1 = clarke_inf::report::run_request(&req).map_err(err)?;
        let r2 = clarke_inf::report::run_request(&req).map_err(err)?;
        ensure(
            r1.deterministic_json().map_err(err)? == r2.deterministic_json().map_err(err)?,
            "subdiff report differs",
        )?;
        Ok(format!("{} corpus reports byte-identical", a.reports.len()))
    };
    report(10, "determinism", run());
}
