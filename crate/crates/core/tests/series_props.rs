use proptest::prelude::*;

use dulackit::expansion::UnfoldingSpec;
use dulackit::family::PolynomialFamily;
use dulackit::oracle::{particular_solution, OdeConfig};
use dulackit::scalar::{rat, Rational};
use dulackit::series::TruncatedSeries;

fn ratio() -> impl Strategy<Value = Rational> {
    (-30i64..=30, 1i64..=12).prop_map(|(p, q)| rat(p, q))
}

fn rseries(len: usize) -> impl Strategy<Value = TruncatedSeries<Rational>> {
    prop::collection::vec(ratio(), len).prop_map(TruncatedSeries::new)
}

fn unit(len: usize) -> impl Strategy<Value = TruncatedSeries<Rational>> {
    (rseries(len), 1i64..=9, prop::bool::ANY).prop_map(|(g, c, neg)| {
        let mut v = g.coeffs().to_vec();
        v[0] = rat(if neg { -c } else { c }, 1);
        TruncatedSeries::new(v)
    })
}

fn fseries(len: usize) -> impl Strategy<Value = TruncatedSeries<f64>> {
    prop::collection::vec(-4.0f64..4.0, len).prop_map(TruncatedSeries::new)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn nabla_is_linear(f in rseries(9), g in rseries(9), a in ratio(), b in ratio()) {
        let lhs = f.scale(&a).add(&g.scale(&b)).nabla().unwrap();
        let rhs = f.nabla().unwrap().scale(&a).add(&g.nabla().unwrap().scale(&b));
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn nabla_undoes_shift(g in rseries(8), m in 0usize..=8, k in 0usize..=8) {
        prop_assume!(k <= m);
        let mut f = g.mul_s_pow(m);
        for _ in 0..k {
            f = f.nabla().unwrap();
        }
        prop_assert_eq!(f, g.mul_s_pow(m - k));
    }

    #[test]
    fn leibniz(f in rseries(8), g in rseries(8)) {
        let lhs = f.mul(&g).derivative().unwrap();
        let rhs = f.derivative().unwrap().mul(&g).add(&f.mul(&g.derivative().unwrap()));
        let k = lhs.order().min(rhs.order());
        prop_assert_eq!(lhs.truncate(k), rhs.truncate(k));
    }

    #[test]
    fn division_inverts_multiplication(f in rseries(7), g in unit(7)) {
        prop_assert_eq!(f.mul(&g).div(&g).unwrap(), f.clone());
        prop_assert_eq!(g.mul(&g.reciprocal().unwrap()), TruncatedSeries::constant(rat(1, 1), g.order()));
    }

    #[test]
    fn theta_is_a_derivation(f in rseries(7), g in rseries(7), l in 1i64..=20) {
        let lambda = rat(l, 3);
        let lhs = f.mul(&g).theta(&lambda).unwrap();
        let rhs = f.theta(&lambda).unwrap().mul(&g).add(&f.mul(&g.theta(&lambda).unwrap()));
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn norm_is_subadditive_and_submultiplicative(f in fseries(10), g in fseries(10)) {
        let slack = 1e-12 * (1.0 + f.norm_ell1() * g.norm_ell1());
        prop_assert!(f.add(&g).norm_ell1() <= f.norm_ell1() + g.norm_ell1() + slack);
        prop_assert!(f.mul(&g).norm_ell1() <= f.norm_ell1() * g.norm_ell1() + slack);
    }

    #[test]
    fn shift_matches_evaluation(f in rseries(6), t in ratio(), s in ratio()) {
        // f(t + s) through the Taylor shift
        let shifted = f.shift(&t);
        prop_assert_eq!(shifted.eval(&s), f.eval(&(t + s.clone())));
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn particular_solution_is_linear_in_u(
        u1 in prop::collection::vec(-3i64..=3, 3),
        u2 in prop::collection::vec(-3i64..=3, 3),
        a in -3i64..=3,
        b in -3i64..=3,
        eps_i in 0usize..3,
        s in 0.005f64..0.5,
    ) {
        let eps = [rat(0, 1), rat(1, 1000), rat(1, 20)][eps_i].clone();
        let to_series = |v: &[i64]| TruncatedSeries::new(v.iter().map(|&c| rat(c, 1)).collect::<Vec<_>>());
        let (s1, s2) = (to_series(&u1), to_series(&u2));
        let mix = s1.scale(&rat(a, 1)).add(&s2.scale(&rat(b, 1)));
        let build = |u: TruncatedSeries<Rational>| {
            UnfoldingSpec::build(PolynomialFamily::equi(1), to_series(&[1, 1]), u, rat(3, 1), &eps).unwrap()
        };
        let cfg = OdeConfig { rtol: 1e-10, atol: 1e-14, ..OdeConfig::default() };
        let y = |u: TruncatedSeries<Rational>| particular_solution(&build(u), 1.0, s, &cfg).unwrap();
        let (y1, y2, ym) = (y(s1), y(s2), y(mix));
        let combo = a as f64 * y1 + b as f64 * y2;
        let scale = (a.abs() as f64 * y1.abs() + b.abs() as f64 * y2.abs()).max(1e-300);
        prop_assert!((ym - combo).abs() <= 10.0 * cfg.rtol * scale + 1e-14, "{} vs {}", ym, combo);
    }
}
