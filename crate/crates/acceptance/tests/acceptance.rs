//! End-to-end acceptance criteria. Each test prints one `PASS`/`FAIL` line
//! (written to stderr directly so it shows even when output is captured).

use std::io::Write;

use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thermolab::char_roots::{solve_quartic, ConjugatePair, Quartic, RootSet, Zone};
use thermolab::model_params::{DerivedParams, ModelParams};
use thermolab::quadrature::{i_of_t, solution_l2_norm, DataProfile, QuadOptions, WindowPreset, MU6_LIMIT};
use thermolab::rate_lab::*;
use thermolab::spectral_solution::*;
use thermolab::wave_kernels::{kernel_radial, profile_amplitude, DoubleKernelSpec, KernelId, Profile};

fn report(k: usize, pass: bool, detail: &str) {
    let line = format!("{} criterion {k}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "criterion {k} failed: {detail}");
}

fn unit() -> (ModelParams, DerivedParams) {
    let p = ModelParams::unit();
    (p, p.derive().unwrap())
}

fn wave_spec(dp: &DerivedParams) -> DoubleKernelSpec {
    DoubleKernelSpec { l1: 1.0, l2: 1.0, beta1: dp.nu1, beta2: dp.nu2, c1: dp.c1, c2: dp.c2, sigma: 1 }
}

fn heat_spec(dp: &DerivedParams) -> DoubleKernelSpec {
    DoubleKernelSpec { l1: dp.alpha0 - dp.alpha2, l2: dp.alpha0 + dp.alpha2, sigma: 0, ..wave_spec(dp) }
}

/// Integral over `[0, 1]` on twelve log-spaced times in `[1e2, 1e6]`.
fn i_series(s: &DoubleKernelSpec, n: usize) -> Vec<(f64, f64)> {
    let opts = QuadOptions::default();
    log_grid(1e2, 1e6, 12).unwrap().into_iter().map(|t| (t, i_of_t(s, n, t, 1.0, &opts).unwrap().value)).collect()
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

/// Elementary symmetric functions `e1..e4` of the roots.
fn symmetric(set: &RootSet) -> [C; 4] {
    let z = set.roots;
    let mut e = [C::new(0.0, 0.0); 4];
    for i in 0..4 {
        e[0] += z[i];
        for j in i + 1..4 {
            e[1] += z[i] * z[j];
            for k in j + 1..4 {
                e[2] += z[i] * z[j] * z[k];
            }
        }
    }
    e[3] = z[0] * z[1] * z[2] * z[3];
    e
}

#[test]
fn criterion_1_root_correctness() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut vieta, mut residual, mut imag_err): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let mut stable = true;
    for _ in 0..1000 {
        let p = ModelParams {
            b: rng.gen_range(0.2..3.0),
            kappa: rng.gen_range(0.2..3.0),
            gamma: rng.gen_range(-2.0..2.0),
            delta: if rng.gen_bool(0.2) { 0.0 } else { rng.gen_range(0.05..3.0) },
        };
        let r = 10f64.powf(rng.gen_range(-6.0..4.0));
        let dp = p.derive().unwrap();
        let set = solve_quartic(&p, &dp, r).unwrap();
        let q = Quartic::at(&p, r);
        let m = set.max_modulus();
        let e = symmetric(&set);
        for (k, (ek, want)) in e.iter().zip([-q.c3, q.c2, -q.c1, q.c0]).enumerate() {
            vieta = vieta.max((ek - want).norm() / want.abs().max(m.powi(k as i32 + 1)));
        }
        for z in set.roots {
            let a = z.norm();
            let horner = (((a + q.c3.abs()) * a + q.c2.abs()) * a + q.c1.abs()) * a + q.c0.abs();
            residual = residual.max(q.eval(z).norm() / horner);
        }
        if p.delta > 0.0 {
            stable &= set.max_real_part() < 0.0;
        } else {
            let mut want = [dp.nu2 * r, dp.nu2 * r, dp.nu1 * r, dp.nu1 * r];
            let mut got: Vec<f64> = set.roots.iter().map(|z| z.im.abs()).collect();
            got.sort_by(f64::total_cmp);
            want.sort_by(f64::total_cmp);
            for (g, w) in got.iter().zip(want) {
                imag_err = imag_err.max((g - w).abs() / w);
            }
            imag_err = imag_err.max(set.roots.iter().map(|z| z.re.abs() / m).fold(0.0, f64::max));
        }
    }
    let pass = vieta <= 1e-9 && residual <= 1e-9 && stable && imag_err <= 1e-10;
    report(1, pass, &format!("vieta {vieta:.2e}, quartic residual {residual:.2e}, damped roots stable {stable}, undamped deviation {imag_err:.2e}"));
}

#[test]
fn criterion_2_asymptotic_orders() {
    let (p, dp) = unit();
    let small = log_grid(1e-4, 1e-2, 12).unwrap();
    let mut x = Vec::new();
    let mut y = Vec::new();
    for &r in &small {
        let set = solve_quartic(&p, &dp, r).unwrap();
        let Zone::TwoConjugatePairs { slow: ConjugatePair { re, .. }, .. } = set.zone else { panic!("zone at r = {r}") };
        x.push(r.ln());
        y.push((re + dp.c2 * r * r).abs().ln());
    }
    let small_fit = line_fit(&x, &y).unwrap();
    let large = log_grid(1e1, 1e3, 12).unwrap();
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for &r in &large {
        let set = solve_quartic(&p, &dp, r).unwrap();
        let Zone::TwoRealOnePair { second, .. } = set.zone else { panic!("zone at r = {r}") };
        x.push(r.ln());
        y.push((second + p.kappa / p.delta).abs().ln());
    }
    let large_fit = line_fit(&x, &y).unwrap();
    let pass = within(small_fit.slope, 3.0, 0.1) && within(large_fit.slope, -1.0, 0.1);
    report(
        2,
        pass,
        &format!("small-zone real-part correction slope {:.4} (want 3 +- 0.1), large-zone error slope {:.4} (want -1 +- 0.1)", small_fit.slope, large_fit.slope),
    );
}

#[test]
fn criterion_3_initial_values_and_representations() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cplx = |rng: &mut ChaCha8Rng| C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let mut ic_err: f64 = 0.0;
    for _ in 0..200 {
        let delta = if rng.gen_bool(0.2) { 0.0 } else { rng.gen_range(0.05..2.0) };
        let p = ModelParams::new(rng.gen_range(0.5..2.0), rng.gen_range(0.5..2.0), rng.gen_range(-1.5..1.5), delta).unwrap();
        let dp = p.derive().unwrap();
        let r = 10f64.powf(rng.gen_range(-3.0..1.0));
        let s = SpectralState::scalar(r, cplx(&mut rng), cplx(&mut rng), cplx(&mut rng), cplx(&mut rng)).unwrap();
        let roots = solve_quartic(&p, &dp, r).unwrap();
        for target in [Target::U, Target::Theta] {
            let data = reduce_data(&p, &s, target, Model::TypeIII).unwrap();
            let coeffs = vandermonde_solve(&roots, &data.v).unwrap();
            let m = roots.max_modulus();
            for k in 0..4u32 {
                let scale = data.v.iter().enumerate().map(|(j, z)| z.norm() * m.powi(k as i32 - j as i32)).fold(0.0, f64::max);
                let want = data.v[k as usize];
                ic_err = ic_err.max((evaluate_modes(&coeffs, &roots, 0.0, k) - want).norm() / scale.max(want.norm()));
            }
        }
    }
    let solvers = mode_solvers();
    let (cramer, lu) = (solvers.get("cramer").unwrap(), solvers.get("lu").unwrap());
    let mut solve_err: f64 = 0.0;
    let mut checked = 0;
    while checked < 1000 {
        let p = ModelParams::new(rng.gen_range(0.3..2.5), rng.gen_range(0.3..2.5), rng.gen_range(-2.0..2.0), rng.gen_range(0.05..2.0)).unwrap();
        let dp = p.derive().unwrap();
        let roots = solve_quartic(&p, &dp, 10f64.powf(rng.gen_range(-2.0..1.5))).unwrap();
        if roots.relative_gap() < 0.05 {
            continue;
        }
        let v = [0; 4].map(|_| cplx(&mut rng));
        let a = cramer.solve(&roots, &v).unwrap();
        let b = lu.solve(&roots, &v).unwrap();
        let scale = b.d.iter().map(|z| z.norm()).fold(0.0, f64::max);
        for (x, y) in a.d.iter().zip(&b.d) {
            solve_err = solve_err.max((x - y).norm() / scale);
        }
        checked += 1;
    }
    let p0 = ModelParams::unit().with_delta(0.0);
    let d0 = p0.derive().unwrap();
    let mut sups = Vec::new();
    for delta in [1e-2, 1e-3, 1e-4] {
        let p = p0.with_delta(delta);
        let dp = p.derive().unwrap();
        let mut sup: f64 = 0.0;
        for ir in 1..=10 {
            let r = 0.1 * ir as f64;
            let s = SpectralState::scalar(r, C::new(1.0, 0.0), C::new(0.5, 0.0), C::new(-0.3, 0.0), C::new(1.0, 0.0)).unwrap();
            for it in 1..=20 {
                let t = 0.5 * it as f64;
                let a = evaluate(&p, &dp, &s, Model::TypeIII, t).unwrap();
                let b = evaluate(&p0, &d0, &s, Model::TypeII, t).unwrap();
                sup = sup.max((a.u[0] - b.u[0]).norm().max((a.theta - b.theta).norm()));
            }
        }
        sups.push(sup);
    }
    let order = line_fit(&[1e-2f64.ln(), 1e-3f64.ln(), 1e-4f64.ln()], &sups.iter().map(|s| s.ln()).collect::<Vec<_>>()).unwrap().slope;
    let pass = ic_err <= 1e-9 && solve_err <= 1e-9 && order >= 1.0;
    report(3, pass, &format!("initial values {ic_err:.2e}, cramer vs lu {solve_err:.2e} on 1000 sets, dissipation order {order:.3}"));
}

#[test]
fn criterion_4_radial_integral_rates() {
    let (_, dp) = unit();
    let mut notes = Vec::new();
    let mut pass = true;
    for (label, spec, n, expect) in [
        ("sigma 1", wave_spec(&dp), 3, Some(1.0)),
        ("sigma 1", wave_spec(&dp), 5, Some(-0.5)),
        ("sigma 1", wave_spec(&dp), 4, None),
        ("sigma 0", heat_spec(&dp), 1, Some(1.0)),
        ("sigma 0", heat_spec(&dp), 3, Some(-0.5)),
        ("sigma 0", heat_spec(&dp), 2, None),
    ] {
        let series = i_series(&spec, n);
        match expect {
            Some(a) => {
                let fit = fit_rate(&series, "power").unwrap();
                let ok = within(fit.exponent, a, EXPONENT_TOL);
                pass &= ok;
                notes.push(format!("{label} n {n} exponent {:.4}", fit.exponent));
            }
            None => {
                let fit = log_linear_fit(&series).unwrap();
                let ok = fit.slope > 0.0 && fit.r_squared > 0.99;
                pass &= ok;
                notes.push(format!("{label} n {n} log-linear r2 {:.6}", fit.r_squared));
            }
        }
    }
    report(4, pass, &notes.join(", "));
}

#[test]
fn criterion_5_equal_amplitude_dichotomy() {
    let (_, dp) = unit();
    let spec = wave_spec(&dp);
    let one = fit_rate(&i_series(&spec, 1), "power").unwrap();
    let three = fit_rate(&i_series(&spec, 3), "power").unwrap();
    let norms: Vec<(f64, f64)> = i_series(&spec, 2).into_iter().map(|(t, v)| (t, v.sqrt())).collect();
    let two = fit_rate(&norms, "power_sqrt_log").unwrap();
    let improvement = two.power_residual / two.residual;
    let two_ok = within(2.0 * two.exponent, 2.0, EXPONENT_TOL) && two.log_flag == LogFlag::SqrtLog && improvement >= 2.0;
    let eps1 = log_grid(1e-8, 1e-4, 9).unwrap();
    let opts = QuadOptions::default();
    let blow = DoubleKernelSpec { l1: 1.0, l2: 2.0, beta1: 1.0, beta2: 1.0, ..spec };
    let b1 = blowup_probe(&blow, 1, 1.0, &eps1, 1.0, &opts).unwrap().fit;
    let b2 = blowup_probe(&blow, 2, 1.0, &eps1, 1.0, &opts).unwrap().fit;
    let pass = within(one.exponent, 3.0, EXPONENT_TOL)
        && within(three.exponent, 1.0, EXPONENT_TOL)
        && two_ok
        && within(b1.exponent, -1.0, EXPONENT_TOL)
        && b2.r_squared > 0.99;
    report(
        5,
        pass,
        &format!(
            "n 1 exponent {:.4}, n 2 integral exponent {:.4} flag {} residual gain {:.2}, n 3 exponent {:.4}, blow-up n 1 slope {:.4}, n 2 log-linear r2 {:.6}",
            one.exponent,
            2.0 * two.exponent,
            two.log_flag.label(),
            improvement,
            three.exponent,
            b1.exponent,
            b2.r_squared
        ),
    );
}

#[test]
fn criterion_6_kernel_limits() {
    let (p, dp) = unit();
    let mut heat: f64 = 0.0;
    for t in [1.0, 10.0, 1e3] {
        for r in [1e-9, 1e-7 / t] {
            heat = heat.max((kernel_radial(&KernelId::G2, &dp, p.gamma, t, r) - t).abs() / t);
        }
    }
    let p0 = p.with_delta(0.0);
    let d0 = p0.derive().unwrap();
    let mut wave: f64 = 0.0;
    for t in [1.0f64, 10.0, 100.0] {
        for rt in [1e-6, 1e-4, 1e-3] {
            let r = rt / t;
            let want = (p0.gamma / d0.alpha2) * (d0.nu1 * d0.nu1 - d0.nu2 * d0.nu2) * t.powi(3) * r / 6.0;
            wave = wave.max((kernel_radial(&KernelId::G3, &d0, p0.gamma, t, r).abs() - want.abs()).abs() / want.abs());
        }
    }
    let mut identical = true;
    for t in [0.5, 3.0, 100.0] {
        for r in [1e-6, 0.01, 0.7, 5.0] {
            for (a, b) in [(Profile::PhiTilde, Profile::Phi), (Profile::PsiTilde, Profile::Psi)] {
                identical &= profile_amplitude(a, &d0, p0.gamma, 1.7, t, r).to_bits() == profile_amplitude(b, &d0, p0.gamma, 1.7, t, r).to_bits();
            }
        }
    }
    let pass = heat <= 1e-8 && wave <= 1e-2 && identical;
    report(6, pass, &format!("heat kernel limit {heat:.2e}, undamped vector kernel {wave:.2e}, undamped profiles bitwise equal {identical}"));
}

fn trend_line(label: &str, series: &[ProfilePoint]) -> (bool, String) {
    let check = trend_check(series, 1e3).unwrap();
    (check.passes(), format!("{label} drop {:.3e} decreasing {}", check.drop, check.eventually_decreasing))
}

#[test]
fn criterion_7_damped_profile_errors() {
    let (p, dp) = unit();
    let data = DataProfile::gaussian_theta1(1.0);
    let ts = log_grid(1e2, 1e6, 12).unwrap();
    let opts = QuadOptions::default();
    let mut pass = true;
    let mut notes = Vec::new();
    for n in [1, 2, 3, 5] {
        for target in [Target::U, Target::Theta] {
            let series = profile_error_experiment(&p, &dp, &data, Model::TypeIII, target, n, &ts, ErrorWindow::Small { eps0: 0.1 }, &opts).unwrap();
            let (ok, note) = trend_line(&format!("{target:?} n {n}"), &series);
            pass &= ok;
            notes.push(note);
        }
    }
    report(7, pass, &notes.join(", "));
}

#[test]
fn criterion_8_undamped_bounds_and_errors() {
    let p = ModelParams::unit().with_delta(0.0);
    let dp = p.derive().unwrap();
    let data = DataProfile::gaussian_theta1(1.0);
    let opts = QuadOptions::default();
    let window = undamped_window(&opts).unwrap();
    let bound_ts = log_grid(1e3, 1e6, 8).unwrap();
    let mut pass = true;
    let mut notes = Vec::new();
    for (target, dims) in [(Target::U, vec![1, 2, 3, 4]), (Target::Theta, vec![1, 2])] {
        for n in dims {
            let rate = reference_for(target, n).unwrap();
            let ratios: Vec<f64> = bound_ts
                .iter()
                .map(|&t| solution_l2_norm(&p, &dp, &data, Model::TypeII, target, n, t, &window, &opts).unwrap().value / reference_rate(rate, t).unwrap())
                .collect();
            let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
            let spread = hi / lo;
            pass &= lo > 0.0 && spread <= 20.0;
            notes.push(format!("{target:?} n {n} bound spread {spread:.3}"));
        }
    }
    let ts = log_grid(1e2, 1e6, 12).unwrap();
    let mu6 = MU6_LIMIT / dp.nu1;
    for (target, kind, dims) in [(Target::U, WindowPreset::ChiC1, vec![1, 2, 3, 4]), (Target::Theta, WindowPreset::ChiC2, vec![1, 2])] {
        for n in dims {
            let window = ErrorWindow::Preset { kind, mu6, rho1: 2.0 };
            let series = profile_error_experiment(&p, &dp, &data, Model::TypeII, target, n, &ts, window, &opts).unwrap();
            let (ok, note) = trend_line(&format!("{target:?} n {n} windowed"), &series);
            pass &= ok;
            notes.push(note);
        }
    }
    report(8, pass, &notes.join(", "));
}

#[test]
fn criterion_9_table_regeneration() {
    let (p, dp) = unit();
    let ts = log_grid(1e2, 1e6, 12).unwrap();
    let cells = table1(&p, &dp, &ts, 1.0, 6, &QuadOptions::default()).unwrap();
    let failed: Vec<String> = cells
        .iter()
        .filter(|c| !c.pass)
        .map(|c| format!("{} n {} fitted {:.4} {} (want {})", c.row, c.n, c.fit.exponent, c.fit.log_flag.label(), c.predicted.label()))
        .collect();
    let matched = cells.len() - failed.len();
    let mut detail = format!("{matched}/{} cells match", cells.len());
    if !failed.is_empty() {
        detail.push_str(&format!("; mismatches: {}", failed.join("; ")));
    }
    report(9, cells.len() == 30 && failed.is_empty(), &detail);
}

#[test]
fn criterion_10_zone_decay() {
    let (p, dp) = unit();
    let one = C::new(1.0, 0.0);
    let data = DataProfile::from_amplitudes("unit", move |_| [one; 4]);
    let ts: Vec<f64> = (0..60).map(|i| 1.0 + 49.0 * i as f64 / 59.0).collect();
    let mut pass = true;
    let mut notes = Vec::new();
    for r in [1.0, 20.0] {
        let fit = zone_decay_fit(&p, &dp, &data, r, &ts).unwrap();
        pass &= fit.slope < 0.0 && fit.r_squared > 0.99;
        notes.push(format!("r {r} slope {:.4} r2 {:.6}", fit.slope, fit.r_squared));
    }
    report(10, pass, &notes.join(", "));
}
