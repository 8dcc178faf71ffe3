use clarke_inf::ext_real::NegInf;
use clarke_inf::ladder::LadderConfig;
use clarke_inf::optimality::{
    constrained_condition_at_infinity, fermat_at_infinity, find_minimizing_sequence,
    CertificateVerdict,
};
use clarke_inf::{parse_function, parse_set, FuncDesc, Tolerance};

const QUADRANT_HYPERBOLA: &str = "x1 >= 0; x2 >= 0; x1*x2 >= 1";

fn cfg() -> LadderConfig {
    LadderConfig::default().with_samples(64)
}

fn tol() -> Tolerance {
    Tolerance::default()
}

fn f(src: &str) -> FuncDesc {
    parse_function(src).unwrap()
}

#[test]
fn minimizing_sequences() {
    let s = find_minimizing_sequence(&f("exp(-x1)"), None, &cfg(), &tol()).unwrap();
    assert!(s.escapes_to_infinity && !s.attained_flag, "{s:?}");
    assert!(s.inf_estimate.unwrap().to_f64().abs() < 1e-3);
    // e^{-R} along the radii is an independent check of the retained values
    for (x, v) in s.points.iter().zip(&s.values) {
        assert!((v.to_f64() - (-x[0]).exp()).abs() < 1e-12);
    }
    let norms: Vec<f64> = s.points.iter().map(|p| p[0].abs()).collect();
    assert!(norms.windows(2).all(|w| w[1] > w[0]), "{norms:?}");

    let s = find_minimizing_sequence(&f("x1^2"), None, &cfg(), &tol()).unwrap();
    assert!(s.attained_flag && !s.escapes_to_infinity, "{s:?}");

    let c = parse_set(QUADRANT_HYPERBOLA, Some(2)).unwrap();
    let s = find_minimizing_sequence(&f("x1 + 0*x2"), Some(&c), &cfg(), &tol()).unwrap();
    assert!(s.escapes_to_infinity && !s.attained_flag, "{s:?}");
    assert!(s.inf_estimate.unwrap().to_f64().abs() < 1e-3);

    let s = find_minimizing_sequence(&f("2*x1 - x2"), None, &cfg(), &tol()).unwrap();
    assert_eq!(s.inf_estimate, Some(NegInf));
}

#[test]
fn fermat_examples() {
    let c = fermat_at_infinity(&f("exp(-x1)"), &cfg(), &tol()).unwrap();
    assert_eq!(c.verdict, CertificateVerdict::Holds, "{c:?}");
    assert!(c.holds);
    let c = fermat_at_infinity(&f("exp(x1)"), &cfg(), &tol()).unwrap();
    assert_eq!(c.verdict, CertificateVerdict::Holds, "{c:?}");
    let c = fermat_at_infinity(&f("x1^2"), &cfg(), &tol()).unwrap();
    assert_eq!(c.verdict, CertificateVerdict::NotApplicable);
    assert!(!c.holds);
    let c = fermat_at_infinity(&f("3*x1 + x2"), &cfg(), &tol()).unwrap();
    assert_eq!(c.verdict, CertificateVerdict::NotApplicable);
    assert!(c.notes.iter().any(|n| n.contains("unbounded")));
    let c = fermat_at_infinity(&f("piecewise(x1 <= 0: 0; else: -x1)"), &cfg(), &tol()).unwrap();
    assert_eq!(c.verdict, CertificateVerdict::NotApplicable);
}

#[test]
fn constrained_examples() {
    let c = parse_set(QUADRANT_HYPERBOLA, Some(2)).unwrap();
    let cert = constrained_condition_at_infinity(&f("x1 + 0*x2"), &c, &cfg(), &tol()).unwrap();
    assert_eq!(cert.verdict, CertificateVerdict::Holds, "{cert:?}");
    let d = cert.decomposition.unwrap();
    assert!(d.residual < 1e-6);
    assert!((d.xi[0] - 1.0).abs() < 1e-9 && d.xi[1].abs() < 1e-9, "{d:?}");
    assert!((d.w[0] + 1.0).abs() < 1e-6 && d.w[1].abs() < 1e-6, "{d:?}");
    assert!(cert.directional_check.iter().all(|r| r.nonnegative == Some(true)));

    let h = parse_set("x1 >= 0", Some(2)).unwrap();
    let cert = constrained_condition_at_infinity(&f("x1 + 0*x2"), &h, &cfg(), &tol()).unwrap();
    assert_eq!(cert.verdict, CertificateVerdict::NotApplicable, "{cert:?}");
    assert!(cert.sequence.attained_flag);

    let cert = constrained_condition_at_infinity(&f("@dim 2\n0"), &h, &cfg(), &tol()).unwrap();
    assert!(cert.holds, "{cert:?}");
}

#[test]
fn exact_tangent_generators_pass_the_directional_check() {
    let c = parse_set("x2 >= 0", Some(2)).unwrap();
    let cert = constrained_condition_at_infinity(&f("exp(-x1) + 0*x2"), &c, &cfg(), &tol()).unwrap();
    assert_eq!(cert.verdict, CertificateVerdict::Holds, "{cert:?}");
    assert!(cert.directional_check.len() >= 3);
    for row in &cert.directional_check {
        let v = row.estimate.unwrap();
        let bar = if row.error_bar.is_finite() { row.error_bar } else { 0.0 };
        assert!(v.to_f64() >= -bar - cfg().conv_abs, "{row:?}");
    }
}

mod negative_control {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn linear_functions_are_never_certified(a in -3i32..=3, b in -3i32..=3) {
            prop_assume!(a != 0 || b != 0);
            let g = f(&format!("{a}*x1 + {b}*x2"));
            let c = fermat_at_infinity(&g, &cfg(), &tol()).unwrap();
            prop_assert_eq!(c.verdict, CertificateVerdict::NotApplicable);
            prop_assert!(c.sequence.unbounded_below());
            prop_assert!(!c.holds);
        }
    }
}
