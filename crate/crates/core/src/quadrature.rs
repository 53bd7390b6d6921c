//! Radial quadrature for kernel and solution norms.
//!
//! All integrals are one-dimensional in `r = |xi|`; n-dimensional norms are
//! the radial integral with weight `r^{n-1}` times a sphere measure.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::model_params::{DerivedParams, ModelParams};
use crate::spectral_solution::{longitudinal_values, Model, Target};
use crate::wave_kernels::{cosine_kernel, double_kernel_core, Angular, DoubleKernelSpec, KernelId};

const GAUSS_X: [f64; 4] = [0.183_434_642_495_649_8, 0.525_532_409_916_329, 0.796_666_477_413_626_7, 0.960_289_856_497_536_3];
const GAUSS_W: [f64; 4] = [0.362_683_783_378_362, 0.313_706_645_877_887_3, 0.222_381_034_453_374_5, 0.101_228_536_290_376_3];

/// Exponent at which Gaussian tails `e^{-2 c r^2 t}` are cut.
pub const GAUSSIAN_CUT: f64 = 80.0;
/// Number of geometric refinements towards `r = 0`.
const GRADING_LEVELS: usize = 48;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub panel_cap: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-7, abs_tol: 1e-12, panel_cap: 2_000_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WindowKind {
    Small,
    Bounded,
    Large,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RadialWindow {
    pub r_lo: f64,
    pub r_hi: f64,
    pub kind: WindowKind,
    /// Bound on the discarded part when `r_hi` truncates an unbounded window.
    pub tail_bound: Option<f64>,
}

impl RadialWindow {
    pub fn new(r_lo: f64, r_hi: f64, kind: WindowKind) -> Result<Self> {
        if !(r_lo >= 0.0 && r_hi > r_lo && r_hi.is_finite()) {
            return Err(LabError::InvalidWindow { lo: r_lo, hi: r_hi, reason: "need 0 <= r_lo < r_hi < inf".into() });
        }
        Ok(Self { r_lo, r_hi, kind, tail_bound: None })
    }

    pub fn custom(r_lo: f64, r_hi: f64) -> Result<Self> {
        Self::new(r_lo, r_hi, WindowKind::Custom)
    }

    pub fn small(eps0: f64) -> Result<Self> {
        Self::new(0.0, eps0, WindowKind::Small)
    }

    pub fn bounded(eps0: f64, n0: f64) -> Result<Self> {
        Self::new(eps0, n0, WindowKind::Bounded)
    }

    /// `[n0, r_max]` with the reported tail bound.
    pub fn large(n0: f64, r_max: f64, tail_bound: f64) -> Result<Self> {
        let mut w = Self::new(n0, r_max, WindowKind::Large)?;
        w.tail_bound = Some(tail_bound);
        Ok(w)
    }

    pub fn width(&self) -> f64 {
        self.r_hi - self.r_lo
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureResult {
    pub value: f64,
    pub est_error: f64,
    pub panels: usize,
}

impl QuadratureResult {
    pub fn zero() -> Self {
        Self { value: 0.0, est_error: 0.0, panels: 0 }
    }
}

fn gauss8(f: &(impl Fn(f64) -> f64 + ?Sized), a: f64, b: f64) -> f64 {
    let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
    let mut s = 0.0;
    for k in 0..4 {
        let dx = h * GAUSS_X[k];
        s += GAUSS_W[k] * (f(m - dx) + f(m + dx));
    }
    s * h
}

/// Sum in a fixed binary-tree order.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        n if n <= 8 => v.iter().sum(),
        n => pairwise_sum(&v[..n / 2]) + pairwise_sum(&v[n / 2..]),
    }
}

#[derive(Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn eval_panel<F: Fn(f64) -> f64 + Sync + ?Sized>(f: &F, a: f64, b: f64) -> Result<Panel> {
    let m = 0.5 * (a + b);
    let whole = gauss8(f, a, b);
    let halves = gauss8(f, a, m) + gauss8(f, m, b);
    if !halves.is_finite() || !whole.is_finite() {
        return Err(LabError::NonFinite { r: m });
    }
    Ok(Panel { a, b, value: halves, error: (whole - halves).abs() })
}

/// Initial panel edges: uniform with at most `width` per panel, the first
/// panel graded geometrically when the window starts at zero.
fn initial_edges(w: &RadialWindow, width: f64) -> Vec<f64> {
    let count = (w.width() / width).ceil().max(1.0) as usize;
    let h = w.width() / count as f64;
    let mut edges = Vec::with_capacity(count + GRADING_LEVELS + 1);
    if w.r_lo == 0.0 {
        edges.push(0.0);
        for k in (1..=GRADING_LEVELS).rev() {
            edges.push(h * 0.5f64.powi(k as i32));
        }
    } else {
        edges.push(w.r_lo);
    }
    for i in 1..count {
        edges.push(w.r_lo + h * i as f64);
    }
    edges.push(w.r_hi);
    edges
}

/// Adaptive Gauss-Legendre integration of `f` over the window.
///
/// `osc` is the angular frequency of the integrand in `r`; panels start no
/// wider than one period.
pub fn integrate_radial<F>(f: &F, window: &RadialWindow, osc: f64, opts: &QuadOptions) -> Result<QuadratureResult>
where
    F: Fn(f64) -> f64 + Sync + ?Sized,
{
    let mut width = window.width() / 16.0;
    if osc > 0.0 {
        width = width.min(2.0 * PI / osc);
    }
    let edges = initial_edges(window, width);
    if edges.len() > opts.panel_cap {
        return Err(LabError::PanelCap { cap: opts.panel_cap, error: f64::NAN, target: f64::NAN });
    }
    let mut panels: Vec<Panel> = edges
        .par_windows(2)
        .map(|e| eval_panel(f, e[0], e[1]))
        .collect::<Result<_>>()?;
    loop {
        let values: Vec<f64> = panels.iter().map(|p| p.value).collect();
        let errors: Vec<f64> = panels.iter().map(|p| p.error).collect();
        let value = pairwise_sum(&values);
        let error = pairwise_sum(&errors);
        let target = opts.rel_tol * value.abs() + opts.abs_tol;
        if error <= target {
            return Ok(QuadratureResult { value, est_error: error, panels: panels.len() });
        }
        let share = target / panels.len() as f64;
        let worst = errors.iter().cloned().fold(0.0, f64::max);
        let cut = share.min(0.5 * worst);
        let split = panels.iter().filter(|p| p.error > cut).count();
        if panels.len() + split > opts.panel_cap {
            return Err(LabError::PanelCap { cap: opts.panel_cap, error, target });
        }
        let next: Vec<Vec<Panel>> = panels
            .par_iter()
            .map(|p| {
                if p.error > cut && p.b - p.a > 1e-15 * p.b.abs() {
                    let m = 0.5 * (p.a + p.b);
                    Ok(vec![eval_panel(f, p.a, m)?, eval_panel(f, m, p.b)?])
                } else {
                    Ok(vec![*p])
                }
            })
            .collect::<Result<_>>()?;
        let refined: Vec<Panel> = next.into_iter().flatten().collect();
        if refined.len() == panels.len() {
            // no panel can be refined further
            let values: Vec<f64> = refined.iter().map(|p| p.value).collect();
            let errors: Vec<f64> = refined.iter().map(|p| p.error).collect();
            return Err(LabError::PanelCap { cap: opts.panel_cap, error: pairwise_sum(&errors), target: opts.rel_tol * pairwise_sum(&values).abs() + opts.abs_tol });
        }
        panels = refined;
    }
}

/// Brute-force midpoint rule with `points` nodes; used as an oracle.
pub fn uniform_grid<F: Fn(f64) -> f64 + Sync + ?Sized>(f: &F, window: &RadialWindow, points: usize) -> f64 {
    let h = window.width() / points as f64;
    let chunk = 4096;
    let partial: Vec<f64> = (0..points.div_ceil(chunk))
        .into_par_iter()
        .map(|c| {
            let end = ((c + 1) * chunk).min(points);
            let v: Vec<f64> = (c * chunk..end).map(|i| f(window.r_lo + (i as f64 + 0.5) * h)).collect();
            pairwise_sum(&v)
        })
        .collect();
    pairwise_sum(&partial) * h
}

/// `|S^{n-1}| = 2 pi^{n/2} / Gamma(n/2)`.
pub fn sphere_measure(n: usize) -> f64 {
    assert!(n >= 1, "dimension must be positive");
    // Gamma(n/2) by recursion from Gamma(1/2) or Gamma(1)
    let mut g = if n % 2 == 0 { 1.0 } else { PI.sqrt() };
    let mut x = if n % 2 == 0 { 1.0 } else { 0.5 };
    while x + 0.5 < n as f64 / 2.0 {
        g *= x;
        x += 1.0;
    }
    2.0 * PI.powf(n as f64 / 2.0) / g
}

/// Angular factor multiplying the radial integral of `|kernel|^2 r^{n-1}`.
pub fn angular_constant(angular: Angular, n: usize) -> f64 {
    match angular {
        Angular::Scalar => sphere_measure(n),
        Angular::Vector => sphere_measure(n) / n as f64,
    }
}

/// Whether `int_0 |kernel|^2 r^{n-1-2 sigma} dr` diverges at the origin.
pub fn diverges_at_origin(spec: &DoubleKernelSpec, n: usize) -> bool {
    let leading = spec.l1 != spec.l2;
    // |core|^2 ~ r^0 when the amplitudes differ, ~ r^4 otherwise
    let power = n as i64 - 1 - 2 * spec.sigma as i64 + if leading { 0 } else { 4 };
    power <= -1
}

/// Radius beyond which `e^{-2 c r^2 t}` is below `e^{-GAUSSIAN_CUT}`.
pub fn gaussian_cut(c: f64, t: f64) -> f64 {
    if c > 0.0 && t > 0.0 {
        (GAUSSIAN_CUT / (2.0 * c * t)).sqrt()
    } else {
        f64::INFINITY
    }
}

fn check_dim(n: usize) -> Result<()> {
    if n == 0 {
        return Err(LabError::InvalidParameter { name: "n", reason: "dimension must be >= 1".into() });
    }
    Ok(())
}

/// `int_{lo}^{hi} |kernel core|^2 r^{n-1-2 sigma} dr` over the given window,
/// cut where both Gaussian factors are negligible.
pub fn double_kernel_integral(spec: &DoubleKernelSpec, n: usize, t: f64, window: &RadialWindow, opts: &QuadOptions) -> Result<QuadratureResult> {
    spec.validate()?;
    check_dim(n)?;
    if t == 0.0 {
        return Ok(QuadratureResult::zero());
    }
    if window.r_lo == 0.0 && diverges_at_origin(spec, n) {
        return Err(LabError::Divergent(format!(
            "integral over [0, {}] diverges for n = {n}, sigma = {} with unequal amplitudes; integrate over [eps1, eps0] instead (blowup probe)",
            window.r_hi, spec.sigma
        )));
    }
    let cut = gaussian_cut(spec.c1.min(spec.c2), t);
    if cut <= window.r_lo {
        return Ok(QuadratureResult::zero());
    }
    let w = RadialWindow { r_hi: window.r_hi.min(cut), ..*window };
    let p = n as i32 - 1 - 2 * spec.sigma as i32;
    let s = *spec;
    let f = move |r: f64| {
        let k = double_kernel_core(&s, t, r);
        k * k * r.powi(p)
    };
    integrate_radial(&f, &w, 2.0 * spec.oscillation(t), opts)
}

/// `int_0^{eps0} |l1 S1 e1 - l2 S2 e2|^2 r^{n-1-2 sigma} dr`.
pub fn i_of_t(spec: &DoubleKernelSpec, n: usize, t: f64, eps0: f64, opts: &QuadOptions) -> Result<QuadratureResult> {
    double_kernel_integral(spec, n, t, &RadialWindow::small(eps0)?, opts)
}

/// L2 norm of a kernel over a radial window (square root of angular
/// constant times radial integral).
pub fn kernel_l2_norm(id: &KernelId, dp: &DerivedParams, gamma: f64, n: usize, t: f64, window: &RadialWindow, opts: &QuadOptions) -> Result<QuadratureResult> {
    check_dim(n)?;
    let ang = angular_constant(id.angular(), n);
    let radial = match id.double_form(dp, gamma) {
        Some((pre, spec)) => {
            let q = double_kernel_integral(&spec, n, t, window, opts)?;
            QuadratureResult { value: pre * pre * q.value, est_error: pre * pre * q.est_error, panels: q.panels }
        }
        None => {
            if t == 0.0 {
                return Ok(QuadratureResult::zero());
            }
            let cut = gaussian_cut(dp.c1.min(dp.c2), t);
            if cut <= window.r_lo {
                return Ok(QuadratureResult::zero());
            }
            let w = RadialWindow { r_hi: window.r_hi.min(cut), ..*window };
            let d = *dp;
            let f = move |r: f64| {
                let k = cosine_kernel(&d, t, r);
                k * k * r.powi(n as i32 - 1)
            };
            integrate_radial(&f, &w, 2.0 * dp.nu1.max(dp.nu2) * t, opts)?
        }
    };
    Ok(sqrt_result(ang, radial))
}

fn sqrt_result(ang: f64, q: QuadratureResult) -> QuadratureResult {
    let v = (ang * q.value).max(0.0).sqrt();
    let err = if v > 0.0 { ang * q.est_error / (2.0 * v) } else { (ang * q.est_error).sqrt() };
    QuadratureResult { value: v, est_error: err, panels: q.panels }
}

/// Frequency cut-offs of the localized profile spaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WindowPreset {
    /// Displacement profile window.
    ChiC1,
    /// Temperature profile window.
    ChiC2,
}

/// Largest admissible `max(nu1, nu2) * mu6`.
pub const MU6_LIMIT: f64 = 0.1;

/// Checks `max(nu) * mu6 <= MU6_LIMIT` and `nu2 < 3 pi / (4 rho1) < nu1`.
pub fn check_window_constants(dp: &DerivedParams, mu6: f64, rho1: f64) -> Result<()> {
    if !(mu6 > 0.0 && dp.nu1.max(dp.nu2) * mu6 <= MU6_LIMIT) {
        return Err(LabError::InvalidParameter {
            name: "mu6",
            reason: format!("need 0 < mu6 and max(nu1, nu2) * mu6 <= {MU6_LIMIT}, got mu6 = {mu6}"),
        });
    }
    let q = 3.0 * PI / (4.0 * rho1);
    if !(rho1 > 0.0 && dp.nu2 < q && q < dp.nu1) {
        return Err(LabError::InvalidParameter {
            name: "rho1",
            reason: format!(
                "need {:.6} < rho1 < {:.6} (nu2 < 3 pi/(4 rho1) < nu1), got {rho1}",
                3.0 * PI / (4.0 * dp.nu1),
                3.0 * PI / (4.0 * dp.nu2)
            ),
        });
    }
    Ok(())
}

/// Profile window for dimension `n` at time `t`. The unbounded `n = 2`
/// window is cut where `e^{-2 r^2} < abs_tol`.
pub fn window_preset(kind: WindowPreset, n: usize, t: f64, mu6: f64, rho1: f64, dp: &DerivedParams, opts: &QuadOptions) -> Result<RadialWindow> {
    check_window_constants(dp, mu6, rho1)?;
    if !(t > 0.0 && t.is_finite()) {
        return Err(LabError::InvalidParameter { name: "t", reason: format!("need t > 0, got {t}") });
    }
    let unsupported = || LabError::Unsupported(format!("no {kind:?} window for n = {n}"));
    match (kind, n) {
        (WindowPreset::ChiC1, 1 | 3) | (WindowPreset::ChiC2, 1) => RadialWindow::custom(0.0, mu6 / t),
        (WindowPreset::ChiC1, 4) | (WindowPreset::ChiC2, 2) => RadialWindow::custom(1.0 / t, 1.0 / t.sqrt()),
        (WindowPreset::ChiC1, 2) => {
            let mut w = RadialWindow::new(rho1 / t, gaussian_data_cutoff(opts.abs_tol), WindowKind::Large)?;
            w.tail_bound = Some(opts.abs_tol);
            Ok(w)
        }
        _ => Err(unsupported()),
    }
}

/// Radius beyond which `e^{-2 r^2}` is below `abs_tol`.
pub fn gaussian_data_cutoff(abs_tol: f64) -> f64 {
    (0.5 * (1.0 / abs_tol).ln()).sqrt()
}

/// Radial initial data: longitudinal amplitudes `(U0, U1, theta0, theta1)` at `r`.
#[derive(Clone)]
pub struct DataProfile {
    amplitudes: Arc<dyn Fn(f64) -> [Complex64; 4] + Send + Sync>,
    pub label: String,
}

impl std::fmt::Debug for DataProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DataProfile").field("label", &self.label).finish()
    }
}

impl DataProfile {
    pub fn from_amplitudes(label: &str, f: impl Fn(f64) -> [Complex64; 4] + Send + Sync + 'static) -> Self {
        Self { amplitudes: Arc::new(f), label: label.to_string() }
    }

    /// Curl-free data `u0hat = i xi g0(r)`, `u1hat = i xi g1(r)`, `th0hat = h0(r)`, `th1hat = h1(r)`.
    pub fn from_hats(
        label: &str,
        g0: impl Fn(f64) -> Complex64 + Send + Sync + 'static,
        g1: impl Fn(f64) -> Complex64 + Send + Sync + 'static,
        h0: impl Fn(f64) -> Complex64 + Send + Sync + 'static,
        h1: impl Fn(f64) -> Complex64 + Send + Sync + 'static,
    ) -> Self {
        Self::from_amplitudes(label, move |r| [g0(r) * r, g1(r) * r, h0(r), h1(r)])
    }

    pub fn zero() -> Self {
        Self::from_amplitudes("zero", |_| [Complex64::new(0.0, 0.0); 4])
    }

    /// Only `th1hat = amplitude * e^{-r^2}`.
    pub fn gaussian_theta1(amplitude: f64) -> Self {
        Self::from_amplitudes("gaussian-theta1", move |r| {
            let z = Complex64::new(0.0, 0.0);
            [z, z, z, Complex64::new(amplitude * (-r * r).exp(), 0.0)]
        })
    }

    pub fn at(&self, r: f64) -> [Complex64; 4] {
        (self.amplitudes)(r)
    }
}

/// Frequency-space L2 norm of one unknown over a radial window.
#[allow(clippy::too_many_arguments)]
pub fn solution_l2_norm(
    p: &ModelParams,
    dp: &DerivedParams,
    data: &DataProfile,
    model: Model,
    target: Target,
    n: usize,
    t: f64,
    window: &RadialWindow,
    opts: &QuadOptions,
) -> Result<QuadratureResult> {
    check_dim(n)?;
    let (pp, dd, prof) = (*p, *dp, data.clone());
    let f = move |r: f64| -> f64 {
        let amp = prof.at(r);
        if amp.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
            return 0.0;
        }
        match longitudinal_values(&pp, &dd, model, r, t, amp) {
            Ok((u, theta)) => {
                let m = match target {
                    Target::U => u.norm_sqr(),
                    Target::Theta => theta.norm_sqr(),
                };
                m * r.powi(n as i32 - 1)
            }
            Err(_) => f64::NAN,
        }
    };
    let osc = 2.0 * dp.nu1.max(dp.nu2).max(p.b) * t;
    let q = integrate_radial(&f, window, osc, opts)?;
    Ok(sqrt_result(sphere_measure(n), q))
}
