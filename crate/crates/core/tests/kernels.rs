use proptest::prelude::*;
use thermolab::model_params::ModelParams;
use thermolab::wave_kernels::*;

fn spec() -> impl Strategy<Value = DoubleKernelSpec> {
    (-3.0f64..3.0, -3.0f64..3.0, 0.1f64..3.0, 0.1f64..3.0, 0.0f64..2.0, 0.0f64..2.0, 0u32..=2)
        .prop_map(|(l1, l2, beta1, beta2, c1, c2, sigma)| DoubleKernelSpec { l1, l2, beta1, beta2, c1, c2, sigma })
}

/// Equal amplitudes with speeds apart by at least 10%.
fn equal_spec() -> impl Strategy<Value = DoubleKernelSpec> {
    (0.1f64..3.0, 0.1f64..3.0, 0.1f64..0.9, any::<bool>(), 0.0f64..2.0, 0.0f64..2.0, 0u32..=1).prop_map(
        |(l, fast, ratio, flip, c1, c2, sigma)| {
            let (beta1, beta2) = if flip { (fast * ratio, fast) } else { (fast, fast * ratio) };
            DoubleKernelSpec { l1: l, l2: l, beta1, beta2, c1, c2, sigma }
        },
    )
}

/// Sum of the magnitudes of both wave terms, the natural rounding scale.
fn term_scale(s: &DoubleKernelSpec, t: f64, r: f64) -> f64 {
    (s.l1.abs() + s.l2.abs()) * t * r.powi(-(s.sigma as i32))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn swapping_the_waves_flips_the_sign(s in spec(), t in 0.0f64..1e3, r in 1e-6f64..10.0) {
        let a = double_kernel(&s, t, r);
        let b = double_kernel(&s.swapped(), t, r);
        prop_assert!((a + b).abs() <= 1e-12 * term_scale(&s, t, r), "{} vs {}", a, b);
    }

    #[test]
    fn magnitude_bounds(s in spec(), t in 1e-3f64..1e4, r in 1e-6f64..10.0) {
        let k = double_kernel(&s, t, r).abs();
        let sigma = s.sigma as i32;
        let wave_bound = (s.l1.abs() / s.beta1 + s.l2.abs() / s.beta2) * r.powi(-1 - sigma);
        let time_bound = (s.l1.abs() + s.l2.abs()) * t * r.powi(-sigma);
        prop_assert!(k <= wave_bound * (1.0 + 1e-12), "{} > {}", k, wave_bound);
        prop_assert!(k <= time_bound * (1.0 + 1e-12), "{} > {}", k, time_bound);
    }

    #[test]
    fn branches_agree_in_the_overlap(s in equal_spec(), t in 0.1f64..1e4, log_rt in -3.0f64..-1.0) {
        let r = 10f64.powf(log_rt) / (s.beta1.max(s.beta2) * t);
        let a = double_kernel_compensated(&s, t, r);
        let b = double_kernel_direct(&s, t, r);
        let direct_rounding = 8.0 * f64::EPSILON * term_scale(&s, t, r);
        prop_assert!((a - b).abs() <= 1e-8 * a.abs() + direct_rounding, "{} vs {}", a, b);
    }

    #[test]
    fn compensated_branch_matches_leading_taylor_term(s in equal_spec(), t in 0.1f64..1e3, log_rt in -9.0f64..-6.0) {
        let r = 10f64.powf(log_rt) / (s.beta1.max(s.beta2) * t);
        let lead = s.l1 * t * r * r * ((s.c2 - s.c1) * t + (s.beta2 * s.beta2 - s.beta1 * s.beta1) * t * t / 6.0);
        prop_assume!(lead.abs() > 1e-3 * s.l1 * t * r * r * t * (1.0 + t));
        let got = double_kernel_core(&s, t, r);
        prop_assert!((got - lead).abs() <= 1e-4 * lead.abs(), "{} vs {}", got, lead);
    }

    #[test]
    fn single_wave_vanishes_initially(beta in 0.1f64..5.0, c in 0.0f64..3.0, r in 1e-6f64..100.0) {
        prop_assert_eq!(double_kernel(&DoubleKernelSpec::single(beta, c), 0.0, r), 0.0);
    }
}

#[test]
fn compensated_branch_matches_extended_precision() {
    // reference evaluated with 50 significant digits
    let s = DoubleKernelSpec {
        l1: 2.5787358117895613,
        l2: 2.5787358117895613,
        beta1: 0.44654584907592526,
        beta2: 0.3563467584762733,
        c1: 0.5948664153127311,
        c2: 1.3478742981465701,
        sigma: 0,
    };
    let t = 66.82130767750894;
    let r = 10f64.powf(-2.6368452722703126) / (s.beta1 * t);
    let want = -3.6860503924346542909e-6;
    assert!((double_kernel_compensated(&s, t, r) - want).abs() <= 1e-13 * want.abs());
}

#[test]
fn heat_kernel_limit_via_series() {
    for p in [ModelParams::unit(), ModelParams::new(0.7, 2.3, -0.4, 0.9).unwrap(), ModelParams::unit().with_delta(0.0)] {
        let dp = p.derive().unwrap();
        for t in [1.0, 10.0, 1e3] {
            for r in [1e-7 / t, 1e-5 / t] {
                let g = kernel_radial(&KernelId::G2, &dp, p.gamma, t, r);
                assert!((g - t).abs() <= 1e-8 * t, "t {t} r {r}: {g}");
            }
        }
    }
}

#[test]
fn undamped_vector_kernel_small_argument_general_set() {
    let p = ModelParams::new(0.7, 2.3, -0.4, 0.0).unwrap();
    let dp = p.derive().unwrap();
    for (t, r) in [(1.0f64, 1e-4), (10.0, 1e-5), (1e3, 1e-6)] {
        let want = (p.gamma / dp.alpha2).abs() * (dp.nu1 * dp.nu1 - dp.nu2 * dp.nu2) * t.powi(3) * r / 6.0;
        let got = kernel_radial(&KernelId::G3, &dp, p.gamma, t, r).abs();
        assert!((got - want).abs() <= 1e-2 * want, "t {t} r {r}: {got} vs {want}");
    }
}

#[test]
fn undamped_profiles_match_damped_profiles_at_zero_dissipation() {
    let p = ModelParams::unit().with_delta(0.0);
    let dp = p.derive().unwrap();
    for (t, r) in [(0.5, 0.1), (7.0, 2.0), (300.0, 1e-4)] {
        assert_eq!(
            profile_amplitude(Profile::PhiTilde, &dp, p.gamma, 2.0, t, r).to_bits(),
            profile_amplitude(Profile::Phi, &dp, p.gamma, 2.0, t, r).to_bits()
        );
        assert_eq!(
            profile_amplitude(Profile::PsiTilde, &dp, p.gamma, 2.0, t, r).to_bits(),
            profile_amplitude(Profile::Psi, &dp, p.gamma, 2.0, t, r).to_bits()
        );
    }
}
