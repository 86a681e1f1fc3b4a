use fracext::hemisphere_spectral::{build_harmonics, Sector};
use fracext::homogeneous_algebra::multi_indices;
use fracext::homogeneous_solver::{
    check_solvable_neumann, dirichlet_denominator, neumann_denominator, solve_dirichlet, solve_homogeneous,
    solve_homogeneous_projected, solve_neumann, split_parity, weighted_trace_decay_exponent,
};
use fracext::quadrature::sphere_rule;
use fracext::scalar::Scalar;
use fracext::{AtomKey, AtomSum, Context, FracError, LatticeExponent, Rational};
use proptest::prelude::*;

fn q(p: i64, d: i64) -> Rational {
    Rational::from_ratio(p, d)
}

/// Remove the component of `u` along the degree-matching harmonics by
/// subtracting a multiple that makes the round trip unambiguous.
fn without_harmonic(u: AtomSum<Rational>, sector: Sector) -> AtomSum<Rational> {
    let ctx = u.ctx().clone();
    let mut out = u;
    for m in 0..=4 {
        for h in build_harmonics(&ctx, sector, m) {
            let lead = h.body.terms().next().map(|(k, c)| (k.clone(), c.clone()));
            if let Some((k, c)) = lead {
                if let Some(a) = out.coeff(&k).cloned() {
                    out = out.sub(&h.body.scale(&(a / c)));
                }
            }
        }
    }
    out
}

#[test]
fn dirichlet_round_trip_is_exact() {
    for n in 1..=3usize {
        let ctx = Context::<Rational>::from_ratio(n, 1, 4).unwrap();
        let mut beta = vec![0; n];
        beta[0] = 1;
        let y = LatticeExponent::new(2, 1);
        let u0 = AtomSum::monomial(&ctx, Rational::from_int(1), y, beta, LatticeExponent::ZERO);
        let u0 = without_harmonic(u0, Sector::Dirichlet);
        let f = u0.apply_flat_d();
        assert!(!f.is_zero());
        let u = solve_dirichlet(&f).unwrap();
        assert!(u.apply_flat_d().sub(&f).is_zero(), "n = {n}");
        assert_eq!(u.homogeneity(), u0.homogeneity());
    }
}

#[test]
fn neumann_round_trip_is_exact() {
    for (n, p, d) in [(1usize, 1, 4), (2, 3, 4), (3, 1, 3)] {
        let ctx = Context::<Rational>::from_ratio(n, p, d).unwrap();
        let mut beta = vec![0; n];
        beta[0] = 2;
        let r = LatticeExponent::new(-(n as i64), 1);
        let u0 = AtomSum::monomial(&ctx, Rational::from_int(1), LatticeExponent::ZERO, beta, r);
        let f = u0.apply_flat_d();
        let u = solve_neumann(&f).unwrap();
        assert!(u.apply_flat_d().sub(&f).is_zero(), "n = {n}");
    }
}

#[test]
fn returned_solutions_have_vanishing_weighted_trace() {
    let ctx = Context::<f64>::new(1, 0.3).unwrap();
    let y = LatticeExponent::new(2, 1);
    let u0 = AtomSum::monomial(&ctx, 1.0, y, vec![1], LatticeExponent::new(-3, 0));
    let f = u0.apply_flat_d();
    let u = solve_dirichlet(&f).unwrap();
    let rate = weighted_trace_decay_exponent(&u, &[1.0]).unwrap();
    assert!(rate > 0.0, "weighted trace decays like y^{rate}");
}

#[test]
fn denominator_hand_values() {
    assert!((dirichlet_denominator(2, 0.25, 0, 0) - 1.5).abs() < 1e-15);
    assert!((neumann_denominator(1, 0.25, 0, 0) + 0.5).abs() < 1e-15);
    assert!((neumann_denominator(2, 0.75, 1, 1) + 1.5).abs() < 1e-15);
    assert_eq!(dirichlet_denominator(1, 0.5, 1, 0), 0.0);
    assert!(matches!(check_solvable_neumann(1, 0.5, 0, 0), Err(FracError::GammaHalf)));
}

fn symbolic_defect(u: &AtomSum<f64>, f: &AtomSum<f64>) -> f64 {
    let r = u.apply_flat_d().sub(f);
    let n = f.n();
    let mut num: f64 = 0.0;
    let mut den: f64 = 0.0;
    let (points, _) = sphere_rule(n + 1, 10);
    for p in points.iter().filter(|p| p[n] > 0.05) {
        let (x, y) = p.split_at(n);
        num = num.max(r.evaluate(y[0], x).unwrap().abs());
        den = den.max(f.evaluate(y[0], x).unwrap().abs());
    }
    num / den
}

#[test]
fn projected_solver_handles_even_offsets() {
    for (n, gamma, sector) in [(1usize, 0.25, Sector::Dirichlet), (2, 0.7, Sector::Neumann), (2, 0.3, Sector::Dirichlet), (1, 0.3, Sector::Neumann)] {
        let ctx = Context::<f64>::new(n, gamma).unwrap();
        let e0 = match sector {
            Sector::Dirichlet => LatticeExponent::int(2),
            Sector::Neumann => LatticeExponent::new(2, -1),
        };
        let deg = LatticeExponent::new(-1 - n as i64, -2);
        let mut f = AtomSum::zero(&ctx);
        f.add_term(AtomKey::new(e0, vec![0; n], deg - e0), 1.3);
        let mut beta = vec![0; n];
        beta[0] = 1;
        f.add_term(AtomKey::new(e0 + LatticeExponent::int(2), beta, deg - e0 - LatticeExponent::int(3)), -0.4);
        let (natural, odd) = split_parity(&f);
        assert!(natural.is_zero() && !odd.is_zero());
        assert!(matches!(solve_homogeneous(&f, sector), Err(FracError::Solver { .. })));
        let p = solve_homogeneous_projected(&f, sector, 1e-10).unwrap();
        assert!(p.relative_residual <= 1e-10);
        let defect = symbolic_defect(&p.solution, &f);
        assert!(defect < 1e-7, "n = {n}, γ = {gamma}: pointwise defect {defect}");
    }
}

#[test]
fn projected_solver_reports_unreachable_tolerance() {
    let ctx = Context::<f64>::new(1, 0.25).unwrap();
    let f = AtomSum::monomial(&ctx, 1.0, LatticeExponent::int(2), vec![0], LatticeExponent::new(-5, -1));
    match solve_homogeneous_projected(&f, Sector::Dirichlet, 1e-300) {
        Err(FracError::Solver { remainder, .. }) => assert!(remainder.is_some()),
        other => panic!("expected a solver error, got {other:?}"),
    }
}

fn sector_strategy() -> impl Strategy<Value = Sector> {
    prop_oneof![Just(Sector::Dirichlet), Just(Sector::Neumann)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn exact_round_trips(
        n in 1usize..=3,
        den in 3i64..20,
        num_pick in 1i64..19,
        sector in sector_strategy(),
        d in (-4i64..=2, -1i64..=1),
        atoms in prop::collection::vec((0i64..=1, 0u32..=2, 0usize..10, -9i64..=9), 1..4),
    ) {
        let p = 1 + num_pick % (den - 1);
        prop_assume!(2 * p != den);
        let ctx = Context::<Rational>::from_ratio(n, p, den).unwrap();
        let deg = sector.sigma() + LatticeExponent::new(d.0, d.1);
        let mut u0 = AtomSum::zero(&ctx);
        for (j, bdeg, pick, c) in atoms {
            let betas = multi_indices(bdeg, n);
            let beta = betas[pick % betas.len()].clone();
            let y = sector.sigma() + LatticeExponent::int(2 * j);
            let r = deg - y - LatticeExponent::int(bdeg as i64);
            u0.add_term(AtomKey::new(y, beta, r), q(c, 1));
        }
        let f = u0.apply_flat_d();
        prop_assume!(!f.is_zero());
        let u = solve_homogeneous(&f, sector).unwrap();
        prop_assert!(u.apply_flat_d().sub(&f).is_zero());
    }
}
