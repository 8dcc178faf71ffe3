use clarke_inf::ext_real::ExtendedReal;
use clarke_inf::ladder::LadderConfig;
use clarke_inf::subdiff::{
    classify_lipschitz_at_infinity, directionally_lipschitz_test,
    distance_subgradients_at_infinity, singular_subgradients, subgradients_epigraph_polar,
    subgradients_gradient_sampling, subgradients_support_reconstruction, sum_rule_check,
    support_grid, Answer, Condition, Lipschitz,
};
use clarke_inf::{parse_function, parse_set, FuncDesc, PolyCone, PolyConvexSet, SetDesc, Tolerance};

const HINGE: &str = "piecewise(x1 <= 0: 0; else: -x1)";
const HUBER: &str = "piecewise(x1 >= 1: x1; x1 >= -1: 0.5*x1^2 + 0.5; else: -x1)";

fn cfg() -> LadderConfig {
    LadderConfig::default().with_samples(64)
}

fn tol() -> Tolerance {
    Tolerance::default()
}

fn f(src: &str) -> FuncDesc {
    parse_function(src).unwrap()
}

fn interval(a: f64, b: f64) -> PolyConvexSet {
    PolyConvexSet::new(1, vec![vec![a], vec![b]], vec![]).unwrap()
}

fn assert_interval(s: &PolyConvexSet, a: f64, b: f64, err: f64) {
    assert!(s.is_bounded() && !s.is_empty(), "{s:?}");
    let lo = -s.support(&[-1.0]).to_f64();
    let hi = s.support(&[1.0]).to_f64();
    assert!((lo - a).abs() < err && (hi - b).abs() < err, "[{lo}, {hi}]");
}

#[test]
fn epigraph_polar_examples() {
    let s = subgradients_epigraph_polar(&f(HINGE)).unwrap();
    assert!(s.set.set_eq(&interval(-1.0, 0.0), &tol()).unwrap(), "{:?}", s.set);
    let s = subgradients_epigraph_polar(&f("3*x1 - x2")).unwrap();
    assert!(s.set.set_eq(&PolyConvexSet::point(vec![3.0, -1.0]), &tol()).unwrap());
    let s = subgradients_epigraph_polar(&f("@dim 2\n0")).unwrap();
    assert!(s.set.set_eq(&PolyConvexSet::point(vec![0.0, 0.0]), &tol()).unwrap());
}

#[test]
fn gradient_sampling_examples() {
    let s = subgradients_gradient_sampling(&f("-abs(x1)"), &cfg(), &tol()).unwrap();
    assert_interval(&s.set, -1.0, 1.0, 1e-3);
    let s = subgradients_gradient_sampling(&f(HUBER), &cfg(), &tol()).unwrap();
    assert_interval(&s.set, -1.0, 1.0, 1e-3);
    let s = subgradients_gradient_sampling(&f("2*x1 + x2"), &cfg(), &tol()).unwrap();
    assert!(s.set.set_eq(&PolyConvexSet::point(vec![2.0, 1.0]), &tol()).unwrap());
}

#[test]
fn support_reconstruction_examples() {
    let s = subgradients_support_reconstruction(&f("exp(x1)"), &cfg(), &support_grid(1)).unwrap();
    let want = PolyConvexSet::new(1, vec![vec![0.0]], vec![vec![1.0]]).unwrap();
    assert!(s.set.hausdorff_in_box(&want, 1.0).unwrap() < 1e-2, "{:?}", s.set);
    assert!(!s.set.is_bounded());
    let s = subgradients_support_reconstruction(&f("x1^3"), &cfg(), &support_grid(1)).unwrap();
    assert!(s.set.is_empty());
    let s = subgradients_support_reconstruction(&f("exp(-x1)"), &cfg(), &support_grid(1)).unwrap();
    let want = PolyConvexSet::new(1, vec![vec![0.0]], vec![vec![-1.0]]).unwrap();
    assert!(s.set.hausdorff_in_box(&want, 1.0).unwrap() < 1e-2, "{:?}", s.set);
}

#[test]
fn singular_examples() {
    let c = singular_subgradients(&f(HINGE), &cfg(), &tol()).unwrap();
    assert!(c.is_zero());
    let c = singular_subgradients(&f("x1^3"), &cfg(), &tol()).unwrap();
    let ray = PolyCone::new(1, vec![vec![1.0]], vec![]).unwrap();
    assert!(c.set_eq(&ray, &Tolerance::new(1e-6, 1e-6, 1e-3).unwrap()).unwrap(), "{c:?}");
    let c = singular_subgradients(&f("x1 - 2*x2"), &cfg(), &tol()).unwrap();
    assert!(c.is_zero());
    // epigraph normals (2x, -1)/|.| tend to (±1, 0): the whole line
    let c = singular_subgradients(&f("x1^2"), &cfg(), &tol()).unwrap();
    assert!(c.set_eq(&PolyCone::whole(1), &tol()).unwrap(), "{c:?}");
}

#[test]
fn lipschitz_classifier() {
    let v = classify_lipschitz_at_infinity(&f("exp(x1)"), &cfg(), &tol()).unwrap();
    assert_eq!(v.verdict, Lipschitz::NotLipschitz, "{v:?}");
    let item = |id: &str| v.evidence.iter().find(|c| c.item == id).unwrap().clone();
    assert_eq!(item("iv").result, Condition::Fail);
    assert_eq!(item("i").result, Condition::Fail);
    assert!(item("i").detail.contains("unbounded"));

    for src in ["-abs(x1)", HUBER] {
        let v = classify_lipschitz_at_infinity(&f(src), &cfg(), &tol()).unwrap();
        assert_eq!(v.verdict, Lipschitz::LipschitzAtInfinity, "{src}: {v:?}");
        let l = v.constant.unwrap();
        assert!((1.0..=1.1).contains(&l), "{l}");
    }
}

#[test]
fn directional_lipschitz() {
    let g = f("exp(x1) + x2");
    let r = directionally_lipschitz_test(&g, &[-1.0, 0.0], &cfg()).unwrap();
    assert_eq!(r.answer, Answer::Yes, "{r:?}");
    let r = directionally_lipschitz_test(&g, &[1.0, 0.0], &cfg()).unwrap();
    assert_eq!(r.answer, Answer::No, "{r:?}");
    let r = directionally_lipschitz_test(&f("x1 - x2"), &[0.3, 2.0], &cfg()).unwrap();
    assert_eq!(r.answer, Answer::Yes, "{r:?}");
}

#[test]
fn sum_rule_examples() {
    let r = sum_rule_check(&f(HINGE), &f("x1"), &cfg(), &tol()).unwrap();
    assert!(r.inclusion_holds && r.subderivative_holds, "{:?}", r.rows);
    assert!(r.sum.set.set_eq(&interval(0.0, 1.0), &tol()).unwrap());
    let r = sum_rule_check(&f("0"), &f("0"), &cfg(), &tol()).unwrap();
    assert!(r.inclusion_holds);
    let r = sum_rule_check(&f("x1^3"), &f("0"), &cfg(), &tol()).unwrap();
    assert!(r.empty_branch && r.inclusion_holds);
    assert!(r.sum.set.is_empty() && r.first.set.is_empty());
    assert!(r.rows.iter().all(|row| row.sum_support == ExtendedReal::NegInf));
}

#[test]
fn distance_subgradients() {
    let c = parse_set("x2 <= 0", Some(2)).unwrap();
    let d = distance_subgradients_at_infinity(&c, &cfg(), &tol()).unwrap();
    let seg = PolyConvexSet::new(2, vec![vec![0.0, 0.0], vec![0.0, 1.0]], vec![]).unwrap();
    assert!(d.result.set.set_eq(&seg, &Tolerance::new(1e-4, 1e-4, 1e-3).unwrap()).unwrap(), "{d:?}");
    assert_eq!(d.cross_check, Some(true));
    let d = distance_subgradients_at_infinity(&SetDesc::whole(2), &cfg(), &tol()).unwrap();
    assert!(d.result.set.set_eq(&PolyConvexSet::point(vec![0.0, 0.0]), &tol()).unwrap());
    assert!(d.perpendiculars_empty);
    assert!(d.result.set.contains(&[0.0, 0.0], &tol()).unwrap());
}
