use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;
use syztrop::fibration::ExactPL;
use syztrop::laurent::LaurentPolynomial;
use syztrop::lg::{build_superpotential, standard_h, wall_crossing_check, Chart, CompactificationSpec};
use syztrop::mirror::{Chamber, MirrorContext};
use syztrop::novikov::{NovikovElement, C};
use syztrop::rational::{q, qr, Q};
use syztrop::sampling::sample_chart_point;
use syztrop::toric::{shear, syz_converse, unshear, validate, ToricCYData};
use syztrop::tropical::{tropicalize, TropicalPolynomial};

const PREC: i64 = 12;
const TOL: f64 = 1e-9;
const ROUNDOFF: f64 = 1e-12;

fn rational(lo: i64, hi: i64) -> impl Strategy<Value = Q> {
    (lo..=hi, 1i64..=4).prop_map(|(a, b)| qr(a, b))
}

fn coeff() -> impl Strategy<Value = C> {
    (0.5f64..2.0, 0.0f64..std::f64::consts::TAU).prop_map(|(r, t)| C::from_polar(r, t))
}

/// Nonzero element with up to four terms at exponents in `[-2, 3]`.
fn element() -> impl Strategy<Value = NovikovElement> {
    prop::collection::vec((rational(-8, 12), coeff()), 1..=4)
        .prop_map(|terms| NovikovElement::from_terms(terms, q(PREC)))
        .prop_filter("nonzero", |x| !x.is_zero())
}

fn positive_element() -> impl Strategy<Value = NovikovElement> {
    prop::collection::vec((rational(1, 8), coeff()), 1..=3)
        .prop_map(|terms| NovikovElement::from_terms(terms, q(PREC)))
}

fn laurent(nvars: usize) -> impl Strategy<Value = LaurentPolynomial> {
    prop::collection::btree_map(prop::collection::vec(-2i64..=2, nvars), (rational(-6, 6), coeff()), 2..=5)
        .prop_map(move |m| {
            let terms = m.into_iter().map(|(e, (s, c))| (e, NovikovElement::monomial(c, s, q(PREC))));
            LaurentPolynomial::from_terms(nvars, terms).expect("arity")
        })
}

fn val(x: &NovikovElement) -> Q {
    x.val().finite().cloned().expect("nonzero")
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn valuation_is_multiplicative(a in element(), b in element()) {
        let ab = &a * &b;
        if val(&a) + val(&b) < ab.precision() {
            prop_assert_eq!(val(&ab), val(&a) + val(&b));
        }
    }

    #[test]
    fn valuation_is_ultrametric(a in element(), b in element()) {
        let s = &a + &b;
        let (va, vb) = (val(&a), val(&b));
        let lo = va.clone().min(vb.clone());
        prop_assert!(s.val_or_precision() >= lo);
        if va != vb {
            prop_assert_eq!(val(&s), lo);
        }
    }

    #[test]
    fn inverse_is_two_sided(a in element()) {
        let inv = a.invert().unwrap();
        let one = &a * &inv;
        // roundoff scales with |a| times the majorant of the geometric series
        let bound = &a.abs_series() * &a.majorant_inverse().unwrap();
        prop_assert!(one.approx_eq_bounded(&NovikovElement::one(one.precision()), TOL, &bound, ROUNDOFF));
        prop_assert_eq!(val(&inv), -val(&a));
    }

    #[test]
    fn exp_turns_sums_into_products(x in positive_element(), y in positive_element()) {
        let lhs = (&x + &y).exp_positive().unwrap();
        let rhs = &x.exp_positive().unwrap() * &y.exp_positive().unwrap();
        prop_assert!(lhs.approx_eq(&rhs, TOL));
    }

    #[test]
    fn tropical_value_is_concave(
        h in laurent(2),
        p in prop::collection::vec(rational(-12, 12), 2),
        r in prop::collection::vec(rational(-12, 12), 2),
        t in 0i64..=4,
    ) {
        let ht = tropicalize(&h).unwrap();
        let t = qr(t, 4);
        let mid: Vec<Q> = p.iter().zip(&r).map(|(a, b)| &t * a + (Q::from_integer(1.into()) - &t) * b).collect();
        let chord = &t * ht.value(&p) + (Q::from_integer(1.into()) - &t) * ht.value(&r);
        prop_assert!(ht.value(&mid) >= chord);
    }

    #[test]
    fn tropical_polynomial_json_round_trip(h in laurent(2)) {
        let ht = tropicalize(&h).unwrap();
        let back = TropicalPolynomial::from_json_str(&ht.to_json_value().to_string()).unwrap();
        prop_assert!(back.same_terms(&ht));
    }

    #[test]
    fn shear_is_invertible(v in prop::collection::vec(rational(-12, 12), 1..=4)) {
        prop_assert_eq!(unshear(&shear(&v)), v);
    }

    #[test]
    fn converse_inverts_build_h(lambda in rational(1, 20)) {
        for data in [ToricCYData::conifold(lambda.clone()), ToricCYData::local_p2(lambda.clone())] {
            let validated = validate(&data).unwrap();
            // precision above every λ so no term is truncated away
            let prec = q(40);
            let h = validated.build_h(&prec).unwrap();
            let (back, _) = syz_converse(&h).unwrap();
            prop_assert_eq!(back.rays.len(), data.rays.len());
            prop_assert!(validate(&back).unwrap().build_h(&prec).unwrap().approx_eq(&h, 0.0));
            let mut got = back.lambdas.clone();
            let mut want = data.lambdas.clone();
            got.sort();
            want.sort();
            prop_assert_eq!(got, want);
        }
    }

    #[test]
    fn chart_points_encode_their_base(seed in any::<u64>(), n in 2usize..=3, plus in any::<bool>()) {
        let ctx = MirrorContext::standard(n, Arc::new(ExactPL::default())).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let chamber = if plus { Chamber::Plus } else { Chamber::Minus };
        let p = sample_chart_point(&ctx, chamber, false, &mut rng);
        let base = ctx.base_of(&p).unwrap();
        let units: Vec<NovikovElement> = p
            .y
            .iter()
            .enumerate()
            .map(|(k, y)| {
                let s = if k + 1 < n { base.qbar[k].clone() } else { val(y) };
                y.shift(&-s)
            })
            .collect();
        let again = ctx.lift(chamber, &base, &units).unwrap();
        prop_assert_eq!(ctx.base_of(&again).unwrap(), base);
    }

    #[test]
    fn gluing_round_trips_on_the_overlap(seed in any::<u64>(), n in 2usize..=3) {
        let ctx = MirrorContext::standard(n, Arc::new(ExactPL::default())).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = sample_chart_point(&ctx, Chamber::Plus, false, &mut rng);
        let q = ctx.base_of(&p).unwrap();
        prop_assume!(ctx.in_overlap(&q));
        let m = ctx.glue_phi(&p).unwrap();
        let back = ctx.glue_phi_inverse(&m).unwrap();
        prop_assert_eq!(&p.y[..n - 1], &back.y[..n - 1]);
        let hv = ctx.h().eval(&p.y[..n - 1]).unwrap();
        let bound = &(&p.y[n - 1].abs_series() * &hv.abs_series()) * &hv.majorant_inverse().unwrap();
        prop_assert!(p.y[n - 1].approx_eq_bounded(&back.y[n - 1], TOL, &bound, ROUNDOFF));
        let (zp, zm) = (ctx.g_embed(&p).unwrap(), ctx.g_embed(&m).unwrap());
        prop_assert!(zp.x1.approx_eq(&zm.x1, 1e-8));
        prop_assert_eq!(zp.y, zm.y);
    }

    #[test]
    fn custom_minus_superpotential_crosses_the_wall(
        // nonnegative powers of y_n, the ones Φ transports to Laurent terms
        terms in prop::collection::btree_map((-2i64..=2, 0i64..=2).prop_map(|(a, b)| vec![a, b]), rational(0, 4), 1..=4),
    ) {
        let prec = q(PREC);
        let w_minus = LaurentPolynomial::from_terms(
            2,
            terms.into_iter().map(|(e, s)| (e, NovikovElement::t_pow(s, prec.clone()))),
        ).unwrap();
        let spec = CompactificationSpec::Custom { chart: Chart::Minus, w: w_minus.clone() };
        let w_plus = build_superpotential(&spec, Chart::Plus, &prec).unwrap();
        let h = standard_h(2, &prec);
        prop_assert!(wall_crossing_check(&w_plus, &w_minus, &h).unwrap());
        let bumped = w_plus.add(&LaurentPolynomial::monomial(vec![3, 3], NovikovElement::one(prec.clone())));
        prop_assert!(!wall_crossing_check(&bumped, &w_minus, &h).unwrap());
    }
}
