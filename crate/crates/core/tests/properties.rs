mod common;

use clarke_inf::cones::{cones_at_infinity, exact_cones_polyhedral, sampled_normal_cone};
use clarke_inf::estimators::{
    clarke_derivative_at_infinity, dagger_derivative, distance_characterization, tangent_membership,
    upper_subderivative, Membership,
};
use clarke_inf::ext_real::{ExtendedReal, NegInf, PosInf};
use clarke_inf::ladder::{IndexSet, LadderConfig};
use clarke_inf::subdiff::{classify_lipschitz_at_infinity, subgradients_best, Condition, Lipschitz};
use clarke_inf::{ext_add, parse_function, parse_set, FuncDesc, PolyCone, PolyConvexSet, SetDesc, Tolerance};
use proptest::prelude::*;

const HINGE: &str = "piecewise(x1 <= 0: 0; else: -x1)";
const HUBER: &str = "piecewise(x1 >= 1: x1; x1 >= -1: 0.5*x1^2 + 0.5; else: -x1)";

fn cfg() -> LadderConfig {
    LadderConfig::default().with_samples(32)
}

fn f(src: &str) -> FuncDesc {
    parse_function(src).unwrap()
}

fn loose() -> Tolerance {
    Tolerance::new(1e-6, 1e-6, 1e-3).unwrap()
}

fn small_vec(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3i32..=3, dim).prop_map(|v| v.into_iter().map(f64::from).collect())
}

fn cone_strategy() -> impl Strategy<Value = PolyCone> {
    (1usize..=3).prop_flat_map(|dim| {
        prop::collection::vec(small_vec(dim), 0..=6).prop_filter_map("zero generators only", move |gens| {
            let gens: Vec<Vec<f64>> = gens.into_iter().filter(|g| g.iter().any(|x| *x != 0.0)).collect();
            PolyCone::new(dim, gens, vec![]).ok()
        })
    })
}

fn set_strategy(dim: usize) -> impl Strategy<Value = PolyConvexSet> {
    (
        prop::collection::vec(small_vec(dim), 1..=4),
        prop::collection::vec(small_vec(dim), 0..=2),
    )
        .prop_filter_map("invalid set", move |(v, r)| {
            let r = r.into_iter().filter(|g| g.iter().any(|x| *x != 0.0)).collect();
            PolyConvexSet::new(dim, v, r).ok()
        })
}

fn ext() -> impl Strategy<Value = ExtendedReal> {
    prop_oneof![
        Just(PosInf),
        Just(NegInf),
        (-1e6f64..1e6).prop_map(ExtendedReal::finite)
    ]
}

// ---------------------------------------------------------------------------
// extended reals and polyhedral geometry

#[test]
fn extended_real_convention_table() {
    let fails = common::convention_table_failures();
    assert!(fails.is_empty(), "{fails:#?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn polar_is_an_involution(k in cone_strategy()) {
        let kk = k.polar().unwrap().polar().unwrap();
        prop_assert!(kk.set_eq(&k, &Tolerance::default()).unwrap(), "{:?} vs {:?}", k, kk);
    }

    #[test]
    fn polar_reverses_inclusion(k in cone_strategy(), keep in prop::collection::vec(any::<bool>(), 6)) {
        let sub: Vec<Vec<f64>> = k.rays.iter().zip(&keep).filter(|(_, &b)| b).map(|(r, _)| r.clone()).collect();
        let small = PolyCone::new(k.dim, sub, vec![]).unwrap();
        let (p_big, p_small) = (k.polar().unwrap(), small.polar().unwrap());
        for g in p_big.generators() {
            prop_assert!(p_small.contains(&g, &Tolerance::default()).unwrap());
        }
    }

    #[test]
    fn support_is_sublinear(s in set_strategy(2), v in small_vec(2), w in small_vec(2), lambda in 0.1f64..10.0) {
        let sv = s.support(&v);
        let scaled: Vec<f64> = v.iter().map(|x| lambda * x).collect();
        let lhs = s.support(&scaled);
        match sv {
            ExtendedReal::Finite(x) => prop_assert!((lhs.to_f64() - lambda * x).abs() <= 1e-9 * (1.0 + x.abs() * lambda)),
            other => prop_assert_eq!(lhs, other),
        }
        let sum: Vec<f64> = v.iter().zip(&w).map(|(a, b)| a + b).collect();
        let rhs = ext_add(sv, s.support(&w));
        let l = s.support(&sum);
        prop_assert!(l <= rhs || (l.to_f64() - rhs.to_f64()).abs() < 1e-9, "{l} > {rhs}");
    }

    #[test]
    fn ext_add_commutes(a in ext(), b in ext(), x in -1e6f64..1e6, y in -1e6f64..1e6) {
        prop_assert_eq!(ext_add(a, b), ext_add(b, a));
        prop_assert_eq!(ext_add(ExtendedReal::finite(x), ExtendedReal::finite(y)), ExtendedReal::finite(x + y));
    }
}

// ---------------------------------------------------------------------------
// function model

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn gradient_matches_central_differences(
        which in 0usize..4,
        x in prop::collection::vec(-3.0f64..3.0, 2),
    ) {
        let src = ["exp(x1) + x2^2", "sin(x1)*x2 + x1^3", "log(1 + x1^2) - 3*x2", "sqrt(1 + x1^2 + x2^2)"][which];
        let g = f(src);
        let grad = g.grad(&x, &Tolerance::default()).unwrap().gradient.unwrap();
        for i in 0..2 {
            let h = 1e-6 * (1.0 + x[i].abs());
            let (mut a, mut b) = (x.clone(), x.clone());
            a[i] += h;
            b[i] -= h;
            let fd = (g.eval(&a).unwrap().to_f64() - g.eval(&b).unwrap().to_f64()) / (2.0 * h);
            prop_assert!((fd - grad[i]).abs() <= 1e-4 * fd.abs().max(1.0), "{src} at {x:?}: {fd} vs {}", grad[i]);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn distance_is_one_lipschitz(x in prop::collection::vec(-50.0f64..50.0, 2), y in prop::collection::vec(-50.0f64..50.0, 2)) {
        let c = parse_set("x1 + x2 <= 1; x1 >= 0", Some(2)).unwrap();
        let d = FuncDesc::lift_distance(&c);
        let (dx, dy) = (d.eval(&x).unwrap().to_f64(), d.eval(&y).unwrap().to_f64());
        let gap = ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)).sqrt();
        prop_assert!(dx >= 0.0 && (dx - dy).abs() <= gap + 1e-9);
    }

    #[test]
    fn indicator_takes_two_values(x in prop::collection::vec(-5.0f64..5.0, 2)) {
        let c = parse_set("x1^2 + x2^2 <= 4", Some(2)).unwrap();
        let v = FuncDesc::lift_indicator(&c).eval(&x).unwrap();
        let inside = x[0] * x[0] + x[1] * x[1] <= 4.0;
        prop_assert_eq!(v, if inside { ExtendedReal::ZERO } else { PosInf });
    }
}

// ---------------------------------------------------------------------------
// estimators

const FAMILY: [&str; 6] = [HINGE, "exp(x1)", "x1^3", "-abs(x1)", HUBER, "exp(-x1)"];

fn bar(e: &clarke_inf::ladder::LimitEstimate) -> f64 {
    if e.error_bar.is_finite() { e.error_bar } else { 0.0 }
}

#[test]
fn upper_subderivative_at_zero_is_nonpositive() {
    for src in FAMILY {
        let e = upper_subderivative(&f(src), &[0.0], &cfg()).unwrap();
        let v = e.value.expect("estimate at 0");
        assert!(v <= ExtendedReal::finite(bar(&e)), "{src}: {v}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn upper_subderivative_is_positively_homogeneous(which in 0usize..6, v in -2.0f64..2.0, two in any::<bool>()) {
        let g = f(FAMILY[which]);
        let v = (v * 64.0).round() / 64.0;
        let lambda = if two { 2.0 } else { 5.0 };
        let a = upper_subderivative(&g, &[v], &cfg()).unwrap();
        let b = upper_subderivative(&g, &[lambda * v], &cfg()).unwrap();
        if let (Some(x), Some(y)) = (a.finite(), b.finite()) {
            let slack = lambda * bar(&a) + bar(&b) + 2.0 * cfg().conv_abs * lambda;
            prop_assert!((y - lambda * x).abs() <= slack, "{}: {y} vs {lambda}*{x}", FAMILY[which]);
        }
    }

    #[test]
    fn upper_subderivative_is_midpoint_convex(which in 0usize..6, v1 in -2.0f64..2.0, v2 in -2.0f64..2.0) {
        let g = f(FAMILY[which]);
        let (v1, v2) = ((v1 * 64.0).round() / 64.0, (v2 * 64.0).round() / 64.0);
        let a = upper_subderivative(&g, &[v1], &cfg()).unwrap();
        let b = upper_subderivative(&g, &[v2], &cfg()).unwrap();
        let m = upper_subderivative(&g, &[(v1 + v2) / 2.0], &cfg()).unwrap();
        if let (Some(x), Some(y), Some(z)) = (a.finite(), b.finite(), m.value) {
            let slack = bar(&a) + bar(&b) + bar(&m) + 2.0 * cfg().conv_abs;
            prop_assert!(z.to_f64() <= (x + y) / 2.0 + slack, "{}: {z} > avg({x}, {y})", FAMILY[which]);
        }
    }

    #[test]
    fn upper_subderivative_below_dagger(which in 0usize..3, v in prop::collection::vec(-2.0f64..2.0, 2)) {
        let g = f(["exp(x1) + x2", "x1 - 2*x2", "-abs(x1) + x2"][which]);
        let v: Vec<f64> = v.iter().map(|x| (x * 64.0).round() / 64.0).collect();
        let up = upper_subderivative(&g, &v, &cfg()).unwrap();
        let dg = dagger_derivative(&g, &v, &cfg()).unwrap();
        if let (Some(a), Some(b)) = (up.value, dg.value) {
            prop_assert!(a.to_f64() <= b.to_f64() + bar(&up) + bar(&dg) + cfg().conv_abs || b == PosInf, "{a} > {b}");
        }
    }
}

#[test]
fn tangent_members_have_zero_distance_quotient() {
    let sets = [("x2 <= 0", 2), ("x1 >= 0; x2 >= 0", 2), ("x2 >= abs(x1)", 2)];
    let dirs = [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.5], [0.5, -1.0], [0.0, 0.0]];
    for (src, dim) in sets {
        let c = parse_set(src, Some(dim)).unwrap();
        for v in dirs {
            let m = tangent_membership(&c, &v, &IndexSet::all(2), &cfg()).unwrap();
            if m.verdict == Membership::Member {
                let d = distance_characterization(&c, &v, &cfg()).unwrap();
                let x = d.finite().expect("finite distance quotient");
                assert!(x.abs() <= cfg().conv_abs, "{src} {v:?}: {x}");
            }
        }
    }
}

// ---------------------------------------------------------------------------
// cones

fn halfplanes() -> impl Strategy<Value = Vec<(i32, i32, i32)>> {
    prop::collection::vec((-2i32..=2, -2i32..=2, -3i32..=3), 1..=3)
        .prop_filter("degenerate", |h| h.iter().all(|(a, b, _)| *a != 0 || *b != 0))
}

fn polyhedron(h: &[(i32, i32, i32)]) -> String {
    h.iter()
        .map(|(a, b, c)| format!("{a}*x1 + {b}*x2 <= {c}"))
        .collect::<Vec<_>>()
        .join("; ")
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn exact_and_sampled_normals_agree(h in halfplanes()) {
        let c = parse_set(&polyhedron(&h), Some(2)).unwrap();
        let i = IndexSet::all(2);
        let Ok(exact) = exact_cones_polyhedral(&c, &i) else { return Ok(()) };
        prop_assert!(exact.normal.polar().unwrap().set_eq(&exact.tangent, &Tolerance::default()).unwrap());
        let Ok(sampled) = sampled_normal_cone(&c, &i, &cfg(), &Tolerance::default()) else { return Ok(()) };
        for g in sampled.normal.generators() {
            prop_assert!(exact.normal.contains(&g, &loose()).unwrap(), "{g:?} not in {:?}", exact.normal);
        }
        for g in exact.tangent.generators() {
            let m = tangent_membership(&c, &g, &i, &cfg()).unwrap();
            prop_assert_eq!(m.verdict, Membership::Member, "{:?}", g);
        }
    }

    #[test]
    fn dropping_a_constraint_never_shrinks_the_tangent_cone(h in halfplanes(), extra in (-2i32..=2, -2i32..=2, -3i32..=3)) {
        prop_assume!(extra.0 != 0 || extra.1 != 0);
        let mut more = h.clone();
        more.push(extra);
        let i = IndexSet::all(2);
        let big = parse_set(&polyhedron(&h), Some(2)).unwrap();
        let small = parse_set(&polyhedron(&more), Some(2)).unwrap();
        let (Ok(tb), Ok(ts)) = (exact_cones_polyhedral(&big, &i), exact_cones_polyhedral(&small, &i)) else {
            return Ok(());
        };
        prop_assert!(tb.tangent.contains_cone(&ts.tangent, &Tolerance::default()).unwrap(), "{:?} vs {:?}", tb.tangent, ts.tangent);
    }
}

// ---------------------------------------------------------------------------
// subgradients

const LIPSCHITZ: [&str; 4] = [HINGE, "-abs(x1)", HUBER, "2*x1"];

#[test]
fn negation_flips_subgradients() {
    let tol = Tolerance::new(1e-3, 1e-3, 1e-3).unwrap();
    for src in LIPSCHITZ {
        let g = f(src);
        let a = subgradients_best(&g, &cfg(), &Tolerance::default(), true).unwrap();
        let b = subgradients_best(&g.negated().unwrap(), &cfg(), &Tolerance::default(), true).unwrap();
        assert!(b.set.set_eq(&a.set.negate(), &tol).unwrap(), "{src}: {:?} vs {:?}", a.set, b.set);
    }
}

#[test]
fn clarke_epigraph_directions_are_tangent() {
    for src in LIPSCHITZ {
        let g = f(src);
        let epi = SetDesc::epigraph(&g).unwrap();
        for v in [1.0, -1.0] {
            let f0 = clarke_derivative_at_infinity(&g, &[v], &cfg()).unwrap().finite().unwrap();
            for delta in [0.1, 1.0] {
                let m = tangent_membership(&epi, &[v, f0 + delta], &IndexSet::new(vec![1], 2).unwrap(), &cfg()).unwrap();
                assert_eq!(m.verdict, Membership::Member, "{src} v={v} delta={delta}");
            }
        }
    }
}

#[test]
fn classifier_evidence_is_coherent() {
    let battery = [HINGE, "-abs(x1)", HUBER, "exp(x1)", "x1^3", "x1^2", "sin(x1)", "exp(-x1)", "3*x1 - 1"];
    for src in battery {
        let v = classify_lipschitz_at_infinity(&f(src), &cfg(), &Tolerance::default()).unwrap();
        let pass = v.evidence.iter().any(|c| c.result == Condition::Pass);
        let fail = v.evidence.iter().any(|c| c.result == Condition::Fail);
        assert!(!(pass && fail), "{src}: {:?}", v.evidence);
        match v.verdict {
            Lipschitz::LipschitzAtInfinity => assert!(!fail),
            Lipschitz::NotLipschitz => assert!(!pass),
            Lipschitz::Inconclusive => {}
        }
    }
}

#[test]
fn emptiness_matches_upper_subderivative_at_zero() {
    for src in FAMILY {
        let g = f(src);
        let s = subgradients_best(&g, &cfg(), &Tolerance::default(), false).unwrap();
        let at0 = upper_subderivative(&g, &[0.0], &cfg()).unwrap();
        assert_eq!(s.set.is_empty(), at0.is_neg_inf(), "{src}");
    }
}

#[test]
fn set_cones_dispatch() {
    let c = parse_set("x1 >= 0; x2 >= 0; x1*x2 >= 1", Some(2)).unwrap();
    let p = cones_at_infinity(&c, &IndexSet::all(2), &cfg(), &Tolerance::default()).unwrap();
    let quad = PolyCone::new(2, vec![vec![-1.0, 0.0], vec![0.0, -1.0]], vec![]).unwrap();
    assert!(p.normal.set_eq(&quad, &Tolerance::new(1e-6, 1e-6, 1e-2).unwrap()).unwrap());
}
