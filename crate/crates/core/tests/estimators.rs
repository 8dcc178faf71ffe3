use clarke_inf::estimators::{
    clarke_derivative_at_infinity, dagger_derivative, distance_characterization,
    distance_is_zero, interior_tangent_test, tangent_membership, upper_subderivative,
    Interiority, Membership,
};
use clarke_inf::ext_real::{NegInf, PosInf};
use clarke_inf::ladder::{IndexSet, LadderConfig, Trend};
use clarke_inf::{parse_function, parse_set, Error, FuncDesc, SetDesc};

fn cfg() -> LadderConfig {
    LadderConfig::default().with_samples(64)
}

fn f(src: &str) -> FuncDesc {
    parse_function(src).unwrap()
}

const HINGE: &str = "piecewise(x1 <= 0: 0; else: -x1)";

fn close(v: Option<f64>, want: f64, tol: f64) {
    let v = v.expect("finite estimate");
    assert!((v - want).abs() < tol, "got {v}, want {want}");
}

#[test]
fn upper_subderivative_of_hinge_backwards() {
    let e = upper_subderivative(&f(HINGE), &[-1.0], &cfg()).unwrap();
    close(e.finite(), 1.0, 1e-3);
}

#[test]
fn upper_subderivative_of_hinge_matches_max_formula() {
    // brute force: the quotient on the two tails is 0 and -w
    for v in [-2.0, -0.5, 0.5, 1.5] {
        let e = upper_subderivative(&f(HINGE), &[v], &cfg()).unwrap();
        close(e.finite(), f64::max(0.0, -v), 1e-3);
    }
}

#[test]
fn upper_subderivative_of_exp() {
    let e = upper_subderivative(&f("exp(x1)"), &[-1.0], &cfg()).unwrap();
    close(e.finite(), 0.0, 1e-3);
    let e = upper_subderivative(&f("exp(x1)"), &[1.0], &cfg()).unwrap();
    assert_eq!(e.value, Some(PosInf));
}

#[test]
fn upper_subderivative_of_cube_at_zero() {
    let e = upper_subderivative(&f("x1^3"), &[0.0], &cfg()).unwrap();
    assert_eq!(e.value, Some(NegInf));
    assert_eq!(e.trend, Trend::DivergingDown);
}

#[test]
fn dagger_of_exp_plus_linear() {
    let g = f("exp(x1) + x2");
    let e = dagger_derivative(&g, &[-1.0, 0.0], &cfg()).unwrap();
    let v = e.finite().expect("finite");
    assert!(v <= 1e-3, "{v}");
    let e = dagger_derivative(&g, &[0.0, 1.0], &cfg()).unwrap();
    assert_eq!(e.value, Some(PosInf));
}

#[test]
fn dagger_of_linear_is_linear() {
    let e = dagger_derivative(&f("2*x1 - 3*x2"), &[0.5, 1.0], &cfg()).unwrap();
    close(e.finite(), -2.0, 1e-3);
}

#[test]
fn clarke_derivative_examples() {
    let e = clarke_derivative_at_infinity(&f("-abs(x1)"), &[1.0], &cfg()).unwrap();
    close(e.finite(), 1.0, 1e-3);
    let e = clarke_derivative_at_infinity(&f("exp(x1)"), &[1.0], &cfg()).unwrap();
    assert_eq!(e.value, Some(PosInf));
    let e = clarke_derivative_at_infinity(&f("@dim 2\n4"), &[0.3, -1.0], &cfg()).unwrap();
    close(e.finite(), 0.0, 1e-12);
}

#[test]
fn overflowing_shells_are_refined() {
    let e = clarke_derivative_at_infinity(&f("exp(x1)"), &[-1.0], &cfg()).unwrap();
    assert!(e.rung_values.iter().any(|r| r.value.is_none()));
    assert!(e.rung_values.iter().filter(|r| r.value.is_some()).count() >= 5);
    close(e.finite(), 0.0, 1e-3);
}

fn hinge_epi() -> SetDesc {
    SetDesc::epigraph(&f(HINGE)).unwrap()
}

#[test]
fn tangent_membership_on_hinge_epigraph() {
    let i = IndexSet::new(vec![1], 2).unwrap();
    let m = tangent_membership(&hinge_epi(), &[1.0, 1.0], &i, &cfg()).unwrap();
    assert_eq!(m.verdict, Membership::Member);
    let m = tangent_membership(&hinge_epi(), &[0.0, -1.0], &i, &cfg()).unwrap();
    assert_eq!(m.verdict, Membership::Nonmember);
    let w = m.witness.unwrap();
    assert!(w.distance > w.t * w.eps);
    let m = tangent_membership(&hinge_epi(), &[0.0, 0.0], &i, &cfg()).unwrap();
    assert_eq!(m.verdict, Membership::Member);
}

#[test]
fn interior_test_on_exp_epigraph() {
    let c = SetDesc::epigraph(&f("exp(x1) + x2")).unwrap();
    let i = IndexSet::new(vec![1, 2], 3).unwrap();
    let r = interior_tangent_test(&c, &[-1.0, 0.0, 1.0], &i, &cfg()).unwrap();
    assert_eq!(r.verdict, Interiority::Interior);
    let r = interior_tangent_test(&c, &[1.0, 0.0, 0.0], &i, &cfg()).unwrap();
    assert_eq!(r.verdict, Interiority::NotInterior);
}

#[test]
fn bounded_projection_is_rejected() {
    let c = parse_set("x1 >= 0; x1 <= 1", Some(2)).unwrap();
    let i = IndexSet::new(vec![1], 2).unwrap();
    let err = interior_tangent_test(&c, &[1.0, 0.0], &i, &cfg()).unwrap_err();
    assert!(matches!(err, Error::UnboundedCheck(_)), "{err:?}");
}

#[test]
fn distance_characterization_on_halfplane() {
    let c = parse_set("x2 <= 0", Some(2)).unwrap();
    let e = distance_characterization(&c, &[1.0, 0.0], &cfg()).unwrap();
    close(e.finite(), 0.0, 1e-6);
    let e = distance_characterization(&c, &[0.0, 1.0], &cfg()).unwrap();
    close(e.finite(), 1.0, 1e-3);
    assert_eq!(distance_is_zero(&e, &cfg()), Some(false));
    let e = distance_characterization(&c, &[0.0, 0.0], &cfg()).unwrap();
    close(e.finite(), 0.0, 1e-12);
}
