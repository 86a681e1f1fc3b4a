use fracext::homogeneous_algebra::multi_indices;
use fracext::scalar::Scalar;
use fracext::{AtomKey, AtomSum, Context, LatticeExponent, Rational};
use proptest::prelude::*;

#[derive(Clone, Debug)]
struct RawAtom {
    y: (i64, i64),
    beta_pick: usize,
    beta_deg: u32,
    r: (i64, i64),
    coeff: i64,
}

fn raw_atom() -> impl Strategy<Value = RawAtom> {
    (
        (0i64..4, -1i64..=1),
        0usize..16,
        0u32..3,
        (-5i64..3, -2i64..=1),
        -6i64..=6,
    )
        .prop_map(|(y, beta_pick, beta_deg, r, coeff)| RawAtom {
            y,
            beta_pick,
            beta_deg,
            r,
            coeff,
        })
}

fn gamma_ratio() -> impl Strategy<Value = (i64, i64)> {
    (3i64..30)
        .prop_flat_map(|q| (1..q, Just(q)))
        .prop_filter("γ ≠ 1/2", |(p, q)| 2 * p != *q)
}

fn build<S: Scalar>(ctx: &Context<S>, raw: &[RawAtom]) -> AtomSum<S> {
    let n = ctx.n();
    let mut s = AtomSum::zero(ctx);
    for a in raw {
        let betas = multi_indices(a.beta_deg, n);
        let beta = betas[a.beta_pick % betas.len()].clone();
        s.add_term(
            AtomKey::new(
                LatticeExponent::new(a.y.0, a.y.1),
                beta,
                LatticeExponent::new(a.r.0, a.r.1),
            ),
            S::from_int(a.coeff),
        );
    }
    s
}

/// A single homogeneous block: every atom shares the degree `d`.
fn build_homogeneous(ctx: &Context<Rational>, raw: &[RawAtom], d: LatticeExponent) -> AtomSum<Rational> {
    let n = ctx.n();
    let mut s = AtomSum::zero(ctx);
    for a in raw {
        let betas = multi_indices(a.beta_deg, n);
        let beta = betas[a.beta_pick % betas.len()].clone();
        let y = LatticeExponent::new(a.y.0, a.y.1);
        let r = d - y - LatticeExponent::int(a.beta_deg as i64);
        s.add_term(AtomKey::new(y, beta, r), Rational::from_int(a.coeff));
    }
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn addition_is_commutative_and_cancels(
        n in 1usize..=3,
        (p, q) in gamma_ratio(),
        a in prop::collection::vec(raw_atom(), 0..6),
        b in prop::collection::vec(raw_atom(), 0..6),
    ) {
        let ctx = Context::<Rational>::from_ratio(n, p, q).unwrap();
        let u = build(&ctx, &a);
        let v = build(&ctx, &b);
        prop_assert_eq!(u.add(&v), v.add(&u));
        prop_assert!(u.add(&v).sub(&v).sub(&u).is_zero());
        prop_assert!(u.add(&u.neg()).is_zero());
    }

    #[test]
    fn flat_operator_is_linear(
        n in 1usize..=3,
        (p, q) in gamma_ratio(),
        a in prop::collection::vec(raw_atom(), 0..5),
        b in prop::collection::vec(raw_atom(), 0..5),
        k in -4i64..=4,
    ) {
        let ctx = Context::<Rational>::from_ratio(n, p, q).unwrap();
        let u = build(&ctx, &a);
        let v = build(&ctx, &b);
        let c = Rational::from_int(k);
        let lhs = u.scale(&c).add(&v).apply_flat_d();
        let rhs = u.apply_flat_d().scale(&c).add(&v.apply_flat_d());
        prop_assert!(lhs.sub(&rhs).is_zero());
    }

    #[test]
    fn flat_operator_lowers_degree_by_one_plus_two_gamma(
        n in 1usize..=3,
        (p, q) in gamma_ratio(),
        a in prop::collection::vec(raw_atom(), 1..5),
        d in (-4i64..2, -1i64..=1),
    ) {
        let ctx = Context::<Rational>::from_ratio(n, p, q).unwrap();
        let d = LatticeExponent::new(d.0, d.1);
        let u = build_homogeneous(&ctx, &a, d);
        prop_assume!(!u.is_zero());
        let du = u.apply_flat_d();
        if !du.is_zero() {
            prop_assert_eq!(du.homogeneity(), Some(d - LatticeExponent::new(1, 1)));
        }
    }

    #[test]
    fn grading_partitions_the_sum(
        n in 1usize..=3,
        (p, q) in gamma_ratio(),
        a in prop::collection::vec(raw_atom(), 0..8),
    ) {
        let ctx = Context::<Rational>::from_ratio(n, p, q).unwrap();
        let u = build(&ctx, &a);
        let mut total = AtomSum::zero(&ctx);
        for (h, piece) in u.homogeneity_grading() {
            prop_assert_eq!(piece.homogeneity(), Some(h));
            total = total.add(&piece);
        }
        prop_assert_eq!(total, u);
    }

    #[test]
    fn json_round_trip_is_lossless(
        n in 1usize..=3,
        (p, q) in gamma_ratio(),
        a in prop::collection::vec(raw_atom(), 0..8),
        scale in -10.0f64..10.0,
    ) {
        let exact = build(&Context::<Rational>::from_ratio(n, p, q).unwrap(), &a);
        let back = AtomSum::<Rational>::from_json(&exact.to_json()).unwrap();
        prop_assert_eq!(&back, &exact);

        let float = exact.to_f64().scale(&(scale / 3.0));
        let text = serde_json::to_string(&float.to_json()).unwrap();
        let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(AtomSum::<f64>::from_json(&parsed).unwrap(), float);
    }

    #[test]
    fn homogeneous_sums_scale_with_their_degree(
        n in 1usize..=3,
        (p, q) in gamma_ratio(),
        a in prop::collection::vec(raw_atom(), 1..5),
        d in (-3i64..2, -1i64..=1),
        lambda in 0.2f64..5.0,
        point in prop::collection::vec(-1.0f64..1.0, 4),
    ) {
        let ctx = Context::<Rational>::from_ratio(n, p, q).unwrap();
        let d = LatticeExponent::new(d.0, d.1);
        let u = build_homogeneous(&ctx, &a, d).to_f64();
        let y = 0.2 + point[0].abs();
        let x: Vec<f64> = point[1..=n].to_vec();
        let xs: Vec<f64> = x.iter().map(|v| lambda * v).collect();
        let base = u.evaluate(y, &x).unwrap();
        let scaled = u.evaluate(lambda * y, &xs).unwrap();
        let expected = lambda.powf(d.value(p as f64 / q as f64)) * base;
        prop_assert!((scaled - expected).abs() <= 1e-9 * (1.0 + expected.abs()), "{} vs {}", scaled, expected);
    }

    #[test]
    fn lattice_exponent_arithmetic(
        a in (-20i64..20, -5i64..5),
        b in (-20i64..20, -5i64..5),
        g in 0.01f64..0.99,
    ) {
        let a = LatticeExponent::new(a.0, a.1);
        let b = LatticeExponent::new(b.0, b.1);
        prop_assert_eq!(a + b - b, a);
        prop_assert!(((a + b).value(g) - a.value(g) - b.value(g)).abs() < 1e-12);
    }
}
