use fracext::hemisphere_spectral::{build_harmonics, Sector};
use fracext::verify::{harmonic_defects, run_criterion, run_verify, Tolerances, VerifyOptions};
use fracext::{Context, Rational};

#[test]
fn tampered_harmonic_is_detected() {
    let ctx = Context::<Rational>::from_ratio(2, 1, 3).unwrap();
    let mut hs = build_harmonics(&ctx, Sector::Dirichlet, 3);
    assert!(harmonic_defects(&hs).is_empty());
    let victim = 1;
    let (key, c) = hs[victim].body.terms().last().map(|(k, c)| (k.clone(), c.clone())).unwrap();
    hs[victim].body.add_term(key, c / Rational::from_integer(7.into()));
    let defects = harmonic_defects(&hs);
    assert_eq!(defects, vec![(3, victim)]);
}

#[test]
fn selected_criteria_only() {
    let opts = VerifyOptions {
        only: vec![4, 2],
        ..VerifyOptions::default()
    };
    let report = run_verify(&opts);
    let ids: Vec<u32> = report.criteria.iter().map(|c| c.id).collect();
    assert_eq!(ids, vec![2, 4]);
    assert!(report.passed);
    assert!(report.summary().ends_with("2 of 2 criteria passed"));
}

#[test]
fn tightened_tolerance_fails_honestly() {
    let opts = VerifyOptions {
        tolerances: Tolerances {
            convolution_relative: 1e-12,
            ..Tolerances::default()
        },
        ..VerifyOptions::default()
    };
    let r = run_criterion(7, &opts);
    assert!(!r.passed);
    assert!(r.error.is_none());
    assert!(r.line().starts_with("FAIL"));
}

#[test]
fn reports_are_deterministic_for_a_seed() {
    let opts = VerifyOptions {
        seed: 99,
        ..VerifyOptions::default()
    };
    let a = run_criterion(5, &opts);
    let b = run_criterion(5, &opts);
    assert_eq!(a.details, b.details);
}
