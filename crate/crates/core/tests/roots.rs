use num_complex::Complex64;
use proptest::prelude::*;
use thermolab::char_roots::{discriminant, solve_quartic, Quartic, RootSet, Zone};
use thermolab::model_params::ModelParams;

/// Reference roots computed at 60 significant digits, written as
/// `(re, |im|)` in solver order.
const REFERENCE: &[((f64, f64, f64, f64), f64, [(f64, f64); 4])] = &[
    (
        (1.0, 1.0, 1.0, 1.0),
        1e-3,
        [
            (-1.3819661006928349849e-7, 0.00061803400093836723427),
            (-1.3819661006928349849e-7, 0.00061803400093836723427),
            (-3.6180338993071650151e-7, 0.0016180338759383594218),
            (-3.6180338993071650151e-7, 0.0016180338759383594218),
        ],
    ),
    (
        (1.0, 1.0, 1.0, 1.0),
        0.05,
        [
            (-0.00034554742128862531756, 0.030903223584004153629),
            (-0.00034554742128862531756, 0.030903223584004153629),
            (-0.00090445257871137468244, 0.080887596141834666022),
            (-0.00090445257871137468244, 0.080887596141834666022),
        ],
    ),
    (
        (1.0, 1.0, 1.0, 1.0),
        1.0,
        [
            (-0.14840294359835024815, 0.63250217921901133329),
            (-0.14840294359835024815, 0.63250217921901133329),
            (-0.35159705640164975185, 1.4985275830034499801),
            (-0.35159705640164975185, 1.4985275830034499801),
        ],
    ),
    (
        (1.0, 1.0, 1.0, 1.0),
        3.0,
        [
            (-6.4611641266253037026, 0.0),
            (-1.392937839624380842, 0.0),
            (-0.57294901687515772769, 2.9447800298259614192),
            (-0.57294901687515772769, 2.9447800298259614192),
        ],
    ),
    (
        (1.0, 1.0, 1.0, 1.0),
        1000.0,
        [
            (-999997.999996999991, 0.0),
            (-1.000002000007000029, 0.0),
            (-0.5000005000010000025, 999.99987499974218684),
            (-0.5000005000010000025, 999.99987499974218684),
        ],
    ),
    (
        (0.7, 2.3, -0.4, 0.9),
        0.3,
        [
            (-0.00076652624384172188508, 0.20152941934528995483),
            (-0.00076652624384172188508, 0.20152941934528995483),
            (-0.039733473756158279114, 0.47242431101454132043),
            (-0.039733473756158279114, 0.47242431101454132043),
        ],
    ),
    (
        (2.0, 0.5, 1.5, 0.2),
        40.0,
        [
            (-306.38910403574518495, 0.0),
            (-2.5312746302111543774, 0.0),
            (-5.5398106670218392161, 81.061919011127301155),
            (-5.5398106670218392161, 81.061919011127301155),
        ],
    ),
];

#[test]
fn real_and_imaginary_parts_match_reference() {
    for &((b, kappa, gamma, delta), r, expected) in REFERENCE {
        let p = ModelParams::new(b, kappa, gamma, delta).unwrap();
        let dp = p.derive().unwrap();
        let set = solve_quartic(&p, &dp, r).unwrap();
        for (z, (re, im)) in set.roots.iter().zip(expected) {
            assert!(
                (z.re - re).abs() <= 1e-10 * re.abs(),
                "r = {r}: Re {} vs {re}",
                z.re
            );
            assert!(
                (z.im.abs() - im).abs() <= 1e-10 * im.abs().max(1e-300) + 1e-300,
                "r = {r}: Im {} vs {im}",
                z.im
            );
        }
    }
}

fn product_of_differences(set: &RootSet) -> f64 {
    let mut prod = Complex64::new(1.0, 0.0);
    for j in 0..4 {
        for k in j + 1..4 {
            let d = set.roots[j] - set.roots[k];
            prod *= d * d;
        }
    }
    prod.re
}

#[test]
fn discriminant_matches_root_differences() {
    let p = ModelParams::unit();
    let dp = p.derive().unwrap();
    for r in [0.3, 0.8, 1.5, 2.2, 3.0] {
        let set = solve_quartic(&p, &dp, r).unwrap();
        let via_roots = product_of_differences(&set);
        let direct = discriminant(&p, r).value;
        assert!(
            (via_roots - direct).abs() <= 1e-8 * direct.abs().max(via_roots.abs()),
            "r = {r}: {via_roots} vs {direct}"
        );
    }
}

#[test]
fn zone_boundary_tracks_discriminant_sign() {
    let p = ModelParams::unit();
    let dp = p.derive().unwrap();
    let mut r = 0.05;
    while r < 50.0 {
        let set = solve_quartic(&p, &dp, r).unwrap();
        let d = discriminant(&p, r).value;
        match set.zone {
            Zone::TwoConjugatePairs { .. } => assert!(d > 0.0, "r = {r}"),
            Zone::TwoRealOnePair { .. } => assert!(d < 0.0, "r = {r}"),
            z => panic!("unexpected zone {z:?} at r = {r}"),
        }
        r *= 1.07;
    }
}

fn params() -> impl Strategy<Value = ModelParams> {
    (0.2f64..3.0, 0.2f64..3.0, 0.1f64..2.0, any::<bool>(), 0.05f64..3.0).prop_map(
        |(b, kappa, g, neg, delta)| ModelParams {
            b,
            kappa,
            gamma: if neg { -g } else { g },
            delta,
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn vieta_and_stability(p in params(), lr in -3.0f64..3.0) {
        let r = 10f64.powf(lr);
        let dp = p.derive().unwrap();
        let set = solve_quartic(&p, &dp, r).unwrap();
        let q = Quartic::at(&p, r);
        let scale = |c: f64| 1e-9 * c.abs().max(1.0) * set.max_modulus().max(1.0).powi(4);
        let s = set.sum();
        prop_assert!((s.re + q.c3).abs() <= 1e-9 * q.c3.abs().max(set.max_modulus()));
        prop_assert!((set.product().re - q.c0).abs() <= scale(q.c0));
        for z in set.roots {
            prop_assert!(z.re < 0.0, "Re = {} at r = {}", z.re, r);
        }
    }

    #[test]
    fn type_two_roots_have_zero_real_part(p in params(), lr in -3.0f64..3.0) {
        let p = p.with_delta(0.0);
        let dp = p.derive().unwrap();
        let set = solve_quartic(&p, &dp, 10f64.powf(lr)).unwrap();
        prop_assert!(set.roots.iter().all(|z| z.re == 0.0));
    }

    #[test]
    fn roots_move_continuously(p in params(), lr in -2.0f64..2.0) {
        let dp = p.derive().unwrap();
        let r = 10f64.powf(lr);
        let h = 1e-6 * r;
        let a = solve_quartic(&p, &dp, r).unwrap();
        let b = solve_quartic(&p, &dp, r + h).unwrap();
        prop_assume!(a.zone.label() == b.zone.label());
        prop_assume!(a.relative_gap() > 1e-3);
        let q = Quartic::at(&p, r);
        for (za, zb) in a.roots.iter().zip(b.roots.iter()) {
            // |d lambda / d r| = |dP/dr| / |dP/dz| from implicit differentiation
            let r2 = r * r;
            let b2 = p.b * p.b;
            let dpdr = 2.0 * r * (p.delta * za.powi(3) + dp.alpha1 * za * za)
                + 4.0 * r * r2 * (b2 * p.delta * za + b2 * p.kappa);
            let speed = (dpdr / q.derivative(*za)).norm();
            prop_assert!((za - zb).norm() <= 2.0 * speed * h + 1e-9 * a.max_modulus());
        }
    }
}
