//! Rate references, log-log fitting and the large-time experiments built on
//! the kernels and the radial quadrature.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::char_roots::solve_quartic;
use crate::error::{LabError, Result};
use crate::model_params::{DerivedParams, ModelParams};
use crate::quadrature::{
    double_kernel_integral, gaussian_cut, gaussian_data_cutoff, integrate_radial, kernel_l2_norm, sphere_measure, window_preset,
    DataProfile, QuadOptions, RadialWindow, WindowPreset,
};
use crate::registry::Registry;
use crate::spectral_solution::{longitudinal_values, modal_amplitude_norm, Model, SpectralState, Target};
use crate::wave_kernels::{cosine_kernel, kernel_radial, DoubleKernelSpec, KernelId, Profile};

/// Minimum number of points in a fitted series.
pub const MIN_FIT_POINTS: usize = 8;
/// A sqrt-log fit must reduce the residual by this factor to be selected.
pub const LOG_RESIDUAL_GAIN: f64 = 100.0;
/// Minimum relative growth of `A ln t + B` across the window for a log flag.
pub const LOG_SHARE: f64 = 0.25;
/// Tolerance on fitted exponents.
pub const EXPONENT_TOL: f64 = 0.05;
/// Largest slope of a bounded cell.
pub const BOUNDED_SLOPE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RateFamily {
    /// Displacement reference.
    D,
    /// Temperature reference.
    E,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceRate {
    pub family: RateFamily,
    pub n: usize,
}

impl ReferenceRate {
    pub fn new(family: RateFamily, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(LabError::InvalidParameter { name: "n", reason: "dimension must be >= 1".into() });
        }
        Ok(Self { family, n })
    }

    /// Power of `1 + t`.
    pub fn exponent(&self) -> f64 {
        let n = self.n as f64;
        match (self.family, self.n) {
            (RateFamily::D, 1..=4) => 2.0 - n / 2.0,
            (RateFamily::D, _) => 1.0 - n / 4.0,
            (RateFamily::E, 1) => 0.5,
            (RateFamily::E, 2) => 0.0,
            (RateFamily::E, _) => 0.5 - n / 4.0,
        }
    }

    pub fn log_flag(&self) -> LogFlag {
        match (self.family, self.n) {
            (RateFamily::D, 2 | 4) | (RateFamily::E, 2) => LogFlag::SqrtLog,
            _ => LogFlag::None,
        }
    }
}

/// Value of the reference rate at `1 + t`.
pub fn reference_rate(rate: ReferenceRate, t: f64) -> Result<f64> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(LabError::InvalidParameter { name: "t", reason: format!("need finite t >= 0, got {t}") });
    }
    let mut v = (1.0 + t).powf(rate.exponent());
    if rate.log_flag() == LogFlag::SqrtLog {
        v *= (std::f64::consts::E + t).ln().sqrt();
    }
    Ok(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogFlag {
    None,
    SqrtLog,
    Log,
}

impl LogFlag {
    pub fn label(&self) -> &'static str {
        match self {
            LogFlag::None => "none",
            LogFlag::SqrtLog => "sqrt_log",
            LogFlag::Log => "log",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    pub exponent: f64,
    pub log_flag: LogFlag,
    pub r_squared: f64,
    pub window: [f64; 2],
    /// Sum of squared residuals of `log value` for the selected model.
    pub residual: f64,
    /// Residual of the plain power fit.
    pub power_residual: f64,
}

/// Least-squares line `y = slope x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub residual: f64,
}

pub fn line_fit(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(LabError::InvalidSeries(format!("need two equal-length columns with >= 2 points, got {} and {}", x.len(), y.len())));
    }
    let m = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / m, y.iter().sum::<f64>() / m);
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    if sxx == 0.0 {
        return Err(LabError::InvalidSeries("abscissae are all equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual: f64 = x.iter().zip(y).map(|(a, b)| (b - slope * a - intercept).powi(2)).sum();
    let r_squared = if syy == 0.0 { 1.0 } else { (1.0 - residual / syy).clamp(0.0, 1.0) };
    Ok(LineFit { slope, intercept, r_squared, residual })
}

/// `points` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo && hi.is_finite()) || points < 2 {
        return Err(LabError::InvalidWindow { lo, hi, reason: format!("need 0 < lo < hi and >= 2 points, got {points}") });
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..points)
        .map(|i| match i {
            0 => lo,
            _ if i == points - 1 => hi,
            _ => (a + (b - a) * i as f64 / (points - 1) as f64).exp(),
        })
        .collect())
}

fn check_series(series: &[(f64, f64)]) -> Result<()> {
    if series.len() < MIN_FIT_POINTS {
        return Err(LabError::InvalidSeries(format!("need >= {MIN_FIT_POINTS} points, got {}", series.len())));
    }
    for &(t, v) in series {
        if !(t > 0.0 && t.is_finite()) {
            return Err(LabError::InvalidSeries(format!("abscissa {t} is not positive")));
        }
        if !(v > 0.0 && v.is_finite()) {
            return Err(LabError::InvalidSeries(format!("value {v} at t = {t} is not positive")));
        }
    }
    let (lo, hi) = window_of(series);
    if hi / lo < 100.0 * (1.0 - 1e-12) {
        return Err(LabError::InvalidSeries(format!("series spans [{lo}, {hi}], need >= 2 decades")));
    }
    Ok(())
}

fn window_of(series: &[(f64, f64)]) -> (f64, f64) {
    series.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &(t, _)| (lo.min(t), hi.max(t)))
}

/// A growth model fitted to `(t, value)` data.
pub trait RateModel: Send + Sync {
    fn fit(&self, series: &[(f64, f64)]) -> Result<RateFit>;
}

/// `value ~ C t^a`.
pub struct PowerModel;

/// `value ~ t^a (A ln t + B)^{1/2}`, selected over the power law only when
/// it wins by `LOG_RESIDUAL_GAIN` and the logarithm carries at least
/// `LOG_SHARE` of the growth.
pub struct PowerSqrtLogModel;

fn power_fit(series: &[(f64, f64)]) -> Result<(LineFit, [f64; 2])> {
    check_series(series)?;
    let x: Vec<f64> = series.iter().map(|p| p.0.ln()).collect();
    let y: Vec<f64> = series.iter().map(|p| p.1.ln()).collect();
    let (lo, hi) = window_of(series);
    Ok((line_fit(&x, &y)?, [lo, hi]))
}

impl RateModel for PowerModel {
    fn fit(&self, series: &[(f64, f64)]) -> Result<RateFit> {
        let (f, window) = power_fit(series)?;
        Ok(RateFit { exponent: f.slope, log_flag: LogFlag::None, r_squared: f.r_squared, window, residual: f.residual, power_residual: f.residual })
    }
}

struct SqrtLogFit {
    residual: f64,
    a: f64,
    b: f64,
}

/// For a fixed power `p`, fits `y^2 t^{-2p} = A ln t + B` with relative weights.
fn sqrt_log_at(series: &[(f64, f64)], p: f64) -> SqrtLogFit {
    let (mut s11, mut s12, mut s22, mut r1, mut r2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(t, y) in series {
        let l = t.ln();
        let z = y * y * t.powf(-2.0 * p);
        let w = 1.0 / (z * z);
        s11 += w * l * l;
        s12 += w * l;
        s22 += w;
        r1 += w * l * z;
        r2 += w * z;
    }
    let det = s11 * s22 - s12 * s12;
    let a = (r1 * s22 - r2 * s12) / det;
    let b = (s11 * r2 - s12 * r1) / det;
    let mut residual = 0.0;
    for &(t, y) in series {
        let m = a * t.ln() + b;
        if !(m > 0.0) {
            return SqrtLogFit { residual: f64::INFINITY, a, b };
        }
        residual += (y.ln() - p * t.ln() - 0.5 * m.ln()).powi(2);
    }
    SqrtLogFit { residual, a, b }
}

/// Golden-section minimum of `f` on `[lo, hi]`.
fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

impl RateModel for PowerSqrtLogModel {
    fn fit(&self, series: &[(f64, f64)]) -> Result<RateFit> {
        let (pow, window) = power_fit(series)?;
        if series.iter().any(|p| p.0 <= 1.0) {
            return Err(LabError::InvalidSeries("sqrt-log model needs t > 1".into()));
        }
        let p = golden_min(|a| sqrt_log_at(series, a).residual, pow.slope - 0.5, pow.slope + 0.5, 1e-9);
        let s = sqrt_log_at(series, p);
        let (l_lo, l_hi) = (window[0].ln(), window[1].ln());
        let share = s.a * (l_hi - l_lo) / (s.a * l_lo + s.b);
        let wins = s.residual.is_finite() && s.residual * LOG_RESIDUAL_GAIN <= pow.residual && share >= LOG_SHARE;
        if !wins {
            return PowerModel.fit(series);
        }
        let y: Vec<f64> = series.iter().map(|q| q.1.ln()).collect();
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        let total: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
        let r_squared = if total == 0.0 { 1.0 } else { (1.0 - s.residual / total).clamp(0.0, 1.0) };
        Ok(RateFit { exponent: p, log_flag: LogFlag::SqrtLog, r_squared, window, residual: s.residual, power_residual: pow.residual })
    }
}

/// Rate models by name: `power`, `power_sqrt_log`.
pub fn rate_models() -> Registry<dyn RateModel> {
    let mut reg: Registry<dyn RateModel> = Registry::new("rate model");
    reg.register("power", Box::new(PowerModel));
    reg.register("power_sqrt_log", Box::new(PowerSqrtLogModel));
    reg
}

pub fn fit_rate(series: &[(f64, f64)], model: &str) -> Result<RateFit> {
    rate_models().get(model)?.fit(series)
}

/// `value` linear in `ln t`.
pub fn log_linear_fit(series: &[(f64, f64)]) -> Result<LineFit> {
    check_series(series)?;
    let x: Vec<f64> = series.iter().map(|p| p.0.ln()).collect();
    let y: Vec<f64> = series.iter().map(|p| p.1).collect();
    line_fit(&x, &y)
}

/// Partial integrals over `[eps1, eps0]` and the fitted divergence rate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlowupReport {
    pub points: Vec<(f64, f64)>,
    /// `n = 1`: power of `eps1`; `n = 2`: slope in `ln(1/eps1)` (flag `log`).
    pub fit: RateFit,
}

pub fn blowup_probe(spec: &DoubleKernelSpec, n: usize, t: f64, eps1_list: &[f64], eps0: f64, opts: &QuadOptions) -> Result<BlowupReport> {
    spec.validate()?;
    if !(n == 1 || n == 2) {
        return Err(LabError::Unsupported(format!("blow-up probe needs n in {{1, 2}}, got {n}")));
    }
    if spec.sigma != 1 {
        return Err(LabError::Unsupported(format!("blow-up probe needs sigma = 1, got {}", spec.sigma)));
    }
    if spec.equal_amplitudes() {
        return Err(LabError::InvalidParameter {
            name: "l1",
            reason: "equal amplitudes give a convergent integral; use i-of-t instead".into(),
        });
    }
    if let Some(&e) = eps1_list.iter().find(|&&e| !(e > 0.0 && e < eps0)) {
        return Err(LabError::InvalidWindow { lo: e, hi: eps0, reason: "need 0 < eps1 < eps0".into() });
    }
    let points = eps1_list
        .par_iter()
        .map(|&e| Ok((e, double_kernel_integral(spec, n, t, &RadialWindow::custom(e, eps0)?, opts)?.value)))
        .collect::<Result<Vec<_>>>()?;
    let fit = if n == 1 {
        fit_rate(&points, "power")?
    } else {
        check_series(&points)?;
        let x: Vec<f64> = points.iter().map(|p| (1.0 / p.0).ln()).collect();
        let y: Vec<f64> = points.iter().map(|p| p.1).collect();
        let f = line_fit(&x, &y)?;
        let (lo, hi) = window_of(&points);
        RateFit { exponent: f.slope, log_flag: LogFlag::Log, r_squared: f.r_squared, window: [lo, hi], residual: f.residual, power_residual: f64::NAN }
    };
    Ok(BlowupReport { points, fit })
}

/// Upper-bound templates for the pointwise scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundTemplate {
    /// `[(1 + r t + |sin(ct r t)|/r) e^{-c r^2 t} + |G0|] |data|` for the
    /// solution minus its leading kernel term.
    SmallZone,
    /// `e^{-c t} |data|` for the whole solution.
    LargeZone,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanGrid {
    pub t_min: f64,
    pub t_max: f64,
    pub t_points: usize,
    pub r_min: f64,
    pub r_max: f64,
    pub r_points: usize,
}

impl ScanGrid {
    /// Each axis with its midpoints (in log scale) inserted.
    pub fn refined(&self) -> Self {
        Self { t_points: 2 * self.t_points - 1, r_points: 2 * self.r_points - 1, ..*self }
    }

    fn axes(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        Ok((log_grid(self.t_min, self.t_max, self.t_points)?, log_grid(self.r_min, self.r_max, self.r_points)?))
    }
}

/// Sup ratio for one choice of template constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanCandidate {
    pub c: f64,
    pub c_tilde: f64,
    pub sup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanReport {
    pub template: BoundTemplate,
    pub candidates: Vec<ScanCandidate>,
    pub selected: ScanCandidate,
    /// Sup for the selected constants on the refined grid.
    pub refined_sup: f64,
    /// Grid points where the template vanishes but the left side does not.
    pub rhs_zeros: usize,
}

impl ScanReport {
    /// Relative change of the sup under grid refinement.
    pub fn refinement_change(&self) -> f64 {
        if self.selected.sup == 0.0 {
            return if self.refined_sup == 0.0 { 0.0 } else { f64::INFINITY };
        }
        (self.refined_sup - self.selected.sup).abs() / self.selected.sup
    }
}

/// Diffusion-rate fractions tried for `c`.
pub const SCAN_C_FRACTIONS: [f64; 5] = [0.25, 0.5, 0.75, 0.9, 1.0];
/// A candidate is admissible when its sup is within this factor of the smallest.
pub const SCAN_ADMISSIBLE: f64 = 2.0;

struct ScanSample {
    t: f64,
    r: f64,
    lhs: f64,
    data: f64,
    g0: f64,
}

fn scan_samples(p: &ModelParams, dp: &DerivedParams, data: &DataProfile, target: Target, template: BoundTemplate, grid: &ScanGrid) -> Result<Vec<ScanSample>> {
    let (ts, rs) = grid.axes()?;
    let model = if p.is_type_two() { Model::TypeII } else { Model::TypeIII };
    let cells: Vec<(f64, f64)> = ts.iter().flat_map(|&t| rs.iter().map(move |&r| (t, r))).collect();
    cells
        .par_iter()
        .map(|&(t, r)| {
            let a = data.at(r);
            let size: f64 = a.iter().map(|z| z.norm()).sum();
            let (u, theta) = longitudinal_values(p, dp, model, r, t, a)?;
            let value = match target {
                Target::U => u,
                Target::Theta => theta,
            };
            let lead = match template {
                BoundTemplate::LargeZone => 0.0,
                BoundTemplate::SmallZone => kernel_radial(&leading_kernel(model, target), dp, p.gamma, t, r) * a[3].re,
            };
            Ok(ScanSample { t, r, lhs: (value - lead).norm(), data: size, g0: cosine_kernel(dp, t, r).abs() })
        })
        .collect()
}

fn leading_kernel(model: Model, target: Target) -> KernelId {
    match (model, target) {
        (Model::TypeIII, Target::U) => KernelId::G1,
        (Model::TypeIII, Target::Theta) => KernelId::G2,
        (Model::TypeII, Target::U) => KernelId::G3,
        (Model::TypeII, Target::Theta) => KernelId::G4,
    }
}

fn template_value(template: BoundTemplate, s: &ScanSample, c: f64, c_tilde: f64) -> f64 {
    match template {
        BoundTemplate::SmallZone => {
            let (r, t) = (s.r, s.t);
            ((1.0 + r * t + (c_tilde * r * t).sin().abs() / r) * (-c * r * r * t).exp() + s.g0) * s.data
        }
        BoundTemplate::LargeZone => (-c * s.t).exp() * s.data,
    }
}

fn sup_ratio(template: BoundTemplate, samples: &[ScanSample], c: f64, c_tilde: f64) -> (f64, usize) {
    let mut sup: f64 = 0.0;
    let mut zeros = 0;
    for s in samples {
        if s.lhs == 0.0 {
            continue;
        }
        let rhs = template_value(template, s, c, c_tilde);
        if rhs > 0.0 {
            sup = sup.max(s.lhs / rhs);
        } else {
            zeros += 1;
        }
    }
    (sup, zeros)
}

/// Sup over the grid of `|lhs| / template`. The template constants are
/// scanned; the selected pair has the largest admissible `c`, then the
/// smallest sup.
pub fn pointwise_ratio_scan(
    p: &ModelParams,
    dp: &DerivedParams,
    data: &DataProfile,
    target: Target,
    template: BoundTemplate,
    grid: &ScanGrid,
) -> Result<ScanReport> {
    let base_rate = match template {
        BoundTemplate::SmallZone => dp.c1.min(dp.c2),
        BoundTemplate::LargeZone => {
            let mut worst = f64::INFINITY;
            for r in log_grid(grid.r_min, grid.r_max, grid.r_points)? {
                worst = worst.min(-solve_quartic(p, dp, r)?.max_real_part());
            }
            worst
        }
    };
    let c_tildes: Vec<f64> = match template {
        BoundTemplate::SmallZone => vec![0.5 * dp.nu2, dp.nu2, dp.nu1],
        BoundTemplate::LargeZone => vec![0.0],
    };
    let samples = scan_samples(p, dp, data, target, template, grid)?;
    let mut candidates = Vec::new();
    let mut rhs_zeros = 0;
    for f in SCAN_C_FRACTIONS {
        for &ct in &c_tildes {
            let (sup, z) = sup_ratio(template, &samples, f * base_rate, ct);
            rhs_zeros = rhs_zeros.max(z);
            candidates.push(ScanCandidate { c: f * base_rate, c_tilde: ct, sup });
        }
    }
    let best = candidates.iter().map(|c| c.sup).fold(f64::INFINITY, f64::min);
    let selected = *candidates
        .iter()
        .filter(|c| c.sup <= SCAN_ADMISSIBLE * best)
        .max_by(|a, b| a.c.total_cmp(&b.c).then(b.sup.total_cmp(&a.sup)))
        .expect("at least one candidate");
    let fine = scan_samples(p, dp, data, target, template, &grid.refined())?;
    let (refined_sup, z) = sup_ratio(template, &fine, selected.c, selected.c_tilde);
    Ok(ScanReport { template, candidates, selected, refined_sup, rhs_zeros: rhs_zeros.max(z) })
}

/// Exponential fit of the modal amplitude norm at fixed `r`; the decay
/// constant is minus the slope.
pub fn zone_decay_fit(p: &ModelParams, dp: &DerivedParams, data: &DataProfile, r: f64, ts: &[f64]) -> Result<LineFit> {
    let a = data.at(r);
    let s = SpectralState::scalar(r, a[0], a[1], a[2], a[3])?;
    let mut y = Vec::with_capacity(ts.len());
    for &t in ts {
        let m = modal_amplitude_norm(p, dp, &s, t)?;
        if !(m > 0.0) {
            return Err(LabError::InvalidSeries(format!("modal norm vanishes at t = {t}")));
        }
        y.push(m.ln());
    }
    line_fit(ts, &y)
}

/// Frequencies entering a profile-error norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ErrorWindow {
    /// `[0, eps0]`, cut where the slow diffusion makes the integrand negligible.
    Small { eps0: f64 },
    /// Localized profile windows of the undamped model.
    Preset { kind: WindowPreset, mu6: f64, rho1: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfilePoint {
    pub t: f64,
    pub error: f64,
    pub rate: f64,
    pub ratio: f64,
}

/// Profile approximating `target` for `model`.
pub fn profile_for(model: Model, target: Target) -> Profile {
    match (model, target) {
        (Model::TypeIII, Target::U) => Profile::Phi,
        (Model::TypeIII, Target::Theta) => Profile::Psi,
        (Model::TypeII, Target::U) => Profile::PhiTilde,
        (Model::TypeII, Target::Theta) => Profile::PsiTilde,
    }
}

/// Reference rate normalizing errors of `target` in dimension `n`.
pub fn reference_for(target: Target, n: usize) -> Result<ReferenceRate> {
    match target {
        Target::U => ReferenceRate::new(RateFamily::D, n),
        Target::Theta => ReferenceRate::new(RateFamily::E, n),
    }
}

fn error_window(p: &ModelParams, dp: &DerivedParams, window: ErrorWindow, model: Model, n: usize, t: f64, opts: &QuadOptions) -> Result<Option<RadialWindow>> {
    match window {
        ErrorWindow::Small { eps0 } => {
            let mut hi = eps0;
            if model == Model::TypeIII && p.delta > 0.0 {
                // slow modes decay at least like e^{-c r^2 t} in the small zone
                hi = hi.min(gaussian_cut(0.5 * dp.c1.min(dp.c2), t));
            }
            Ok(Some(RadialWindow::custom(0.0, hi)?))
        }
        ErrorWindow::Preset { kind, mu6, rho1 } => match window_preset(kind, n, t, mu6, rho1, dp, opts) {
            Ok(w) => Ok(Some(w)),
            Err(LabError::InvalidWindow { .. }) => Ok(None),
            Err(e) => Err(e),
        },
    }
}

/// `||solution - profile||_window / reference(t)` over the time grid. The
/// profile is driven by `theta1hat(0)`, the mean of the temperature rate.
#[allow(clippy::too_many_arguments)]
pub fn profile_error_experiment(
    p: &ModelParams,
    dp: &DerivedParams,
    data: &DataProfile,
    model: Model,
    target: Target,
    n: usize,
    ts: &[f64],
    window: ErrorWindow,
    opts: &QuadOptions,
) -> Result<Vec<ProfilePoint>> {
    if model == Model::TypeII && !p.is_type_two() {
        return Err(LabError::InvalidParameter { name: "delta", reason: format!("type II runs need delta = 0, got {}", p.delta) });
    }
    let rate = reference_for(target, n)?;
    let profile = profile_for(model, target);
    let mean = data.at(0.0)[3].re;
    let measure = sphere_measure(n);
    ts.par_iter()
        .map(|&t| {
            let reference = reference_rate(rate, t)?;
            let Some(w) = error_window(p, dp, window, model, n, t, opts)? else {
                return Ok(ProfilePoint { t, error: 0.0, rate: reference, ratio: 0.0 });
            };
            let (pp, dd, prof) = (*p, *dp, data.clone());
            let f = move |r: f64| -> f64 {
                let a = prof.at(r);
                let lead = crate::wave_kernels::profile_amplitude(profile, &dd, pp.gamma, mean, t, r);
                match longitudinal_values(&pp, &dd, model, r, t, a) {
                    Ok((u, theta)) => {
                        let value = match target {
                            Target::U => u,
                            Target::Theta => theta,
                        };
                        (value - lead).norm_sqr() * r.powi(n as i32 - 1)
                    }
                    Err(_) => f64::NAN,
                }
            };
            let osc = 2.0 * dp.nu1.max(dp.nu2).max(p.b) * t;
            let q = integrate_radial(&f, &w, osc, opts)?;
            let error = (measure * q.value).max(0.0).sqrt();
            Ok(ProfilePoint { t, error, rate: reference, ratio: error / reference })
        })
        .collect()
}

/// Outcome of the vanishing-ratio trend test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrendCheck {
    /// `ratio(last) / ratio(first)`.
    pub drop: f64,
    /// Strictly decreasing at all grid times `>= t_star`.
    pub eventually_decreasing: bool,
}

/// Required drop of the ratio across the grid.
pub const TREND_DROP: f64 = 0.2;

impl TrendCheck {
    pub fn passes(&self) -> bool {
        self.drop < TREND_DROP && self.eventually_decreasing
    }
}

pub fn trend_check(series: &[ProfilePoint], t_star: f64) -> Result<TrendCheck> {
    if series.len() < 2 {
        return Err(LabError::InvalidSeries("need >= 2 points".into()));
    }
    let (first, last) = (series[0].ratio, series[series.len() - 1].ratio);
    let drop = if first > 0.0 { last / first } else if last == 0.0 { 0.0 } else { f64::INFINITY };
    let tail: Vec<f64> = series.iter().filter(|q| q.t >= t_star).map(|q| q.ratio).collect();
    let eventually_decreasing = tail.windows(2).all(|w| w[1] < w[0] || (w[0] == 0.0 && w[1] == 0.0));
    Ok(TrendCheck { drop, eventually_decreasing })
}

/// Expected large-time behaviour of one table cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Predicted {
    Growth { exponent: f64, log_flag: LogFlag },
    /// Only an upper bound is claimed.
    Bounded,
}

impl Predicted {
    pub fn label(&self) -> String {
        match self {
            Predicted::Bounded => "bounded".into(),
            Predicted::Growth { exponent, log_flag: LogFlag::None } => format!("t^{exponent}"),
            Predicted::Growth { exponent, log_flag } => format!("t^{exponent} {}", log_flag.label()),
        }
    }
}

/// One row of the large-time table: a kernel whose norm carries the rate.
pub trait TableRow: Send + Sync {
    fn label(&self) -> &'static str;
    fn kernel(&self, p: &ModelParams, dp: &DerivedParams) -> KernelId;
    fn predicted(&self, n: usize) -> Predicted;
}

fn growth(exponent: f64, log_flag: LogFlag) -> Predicted {
    Predicted::Growth { exponent, log_flag }
}

struct Transversal;
struct Longitudinal(Model);
struct Thermal(Model);

impl TableRow for Transversal {
    fn label(&self) -> &'static str {
        "transversal"
    }
    fn kernel(&self, p: &ModelParams, _dp: &DerivedParams) -> KernelId {
        KernelId::M(DoubleKernelSpec { l1: 1.0, l2: 0.0, beta1: p.b, beta2: p.b, c1: 0.0, c2: 0.0, sigma: 0 })
    }
    fn predicted(&self, n: usize) -> Predicted {
        match n {
            1 => growth(0.5, LogFlag::None),
            2 => growth(0.0, LogFlag::SqrtLog),
            _ => Predicted::Bounded,
        }
    }
}

impl TableRow for Longitudinal {
    fn label(&self) -> &'static str {
        match self.0 {
            Model::TypeII => "longitudinal II",
            Model::TypeIII => "longitudinal III",
        }
    }
    fn kernel(&self, _p: &ModelParams, _dp: &DerivedParams) -> KernelId {
        match self.0 {
            Model::TypeII => KernelId::G3,
            Model::TypeIII => KernelId::G1,
        }
    }
    fn predicted(&self, n: usize) -> Predicted {
        match (self.0, n) {
            (Model::TypeII, 5..) => Predicted::Bounded,
            _ => {
                let r = ReferenceRate { family: RateFamily::D, n };
                growth(r.exponent(), r.log_flag())
            }
        }
    }
}

impl TableRow for Thermal {
    fn label(&self) -> &'static str {
        match self.0 {
            Model::TypeII => "thermal II",
            Model::TypeIII => "thermal III",
        }
    }
    fn kernel(&self, _p: &ModelParams, _dp: &DerivedParams) -> KernelId {
        match self.0 {
            Model::TypeII => KernelId::G4,
            Model::TypeIII => KernelId::G2,
        }
    }
    fn predicted(&self, n: usize) -> Predicted {
        match (self.0, n) {
            (Model::TypeII, 3..) => Predicted::Bounded,
            _ => {
                let r = ReferenceRate { family: RateFamily::E, n };
                growth(r.exponent(), r.log_flag())
            }
        }
    }
}

/// Table rows in display order.
pub fn table_rows() -> Registry<dyn TableRow> {
    let mut reg: Registry<dyn TableRow> = Registry::new("table row");
    reg.register("transversal", Box::new(Transversal));
    reg.register("longitudinal_ii", Box::new(Longitudinal(Model::TypeII)));
    reg.register("longitudinal_iii", Box::new(Longitudinal(Model::TypeIII)));
    reg.register("thermal_ii", Box::new(Thermal(Model::TypeII)));
    reg.register("thermal_iii", Box::new(Thermal(Model::TypeIII)));
    reg
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableCell {
    pub row: String,
    pub n: usize,
    pub predicted: Predicted,
    pub fit: RateFit,
    pub pass: bool,
}

/// Checks a fitted rate against a predicted entry.
pub fn cell_matches(predicted: Predicted, fit: &RateFit) -> bool {
    match predicted {
        Predicted::Bounded => fit.exponent.abs() <= BOUNDED_SLOPE,
        Predicted::Growth { exponent, log_flag } => (fit.exponent - exponent).abs() <= EXPONENT_TOL && fit.log_flag == log_flag,
    }
}

/// Kernel norm series over `[0, eps0]` for every row and `n = 1..=max_n`.
pub fn table1(p: &ModelParams, dp: &DerivedParams, ts: &[f64], eps0: f64, max_n: usize, opts: &QuadOptions) -> Result<Vec<TableCell>> {
    let (lo, hi) = ts.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &t| (a.min(t), b.max(t)));
    if !(hi / lo >= 1e3 * (1.0 - 1e-12)) {
        return Err(LabError::InvalidWindow { lo, hi, reason: "table fits need >= 3 decades".into() });
    }
    let rows = table_rows();
    let window = RadialWindow::small(eps0)?;
    let jobs: Vec<(&str, usize)> = rows.names().into_iter().flat_map(|r| (1..=max_n).map(move |n| (r, n))).collect();
    jobs.par_iter()
        .map(|&(name, n)| {
            let row = rows.get(name)?;
            let id = row.kernel(p, dp);
            let series = ts
                .iter()
                .map(|&t| Ok((t, kernel_l2_norm(&id, dp, p.gamma, n, t, &window, opts)?.value)))
                .collect::<Result<Vec<_>>>()?;
            let predicted = row.predicted(n);
            let fit = match predicted {
                Predicted::Bounded => fit_rate(&series, "power")?,
                Predicted::Growth { .. } => fit_rate(&series, "power_sqrt_log")?,
            };
            Ok(TableCell { row: row.label().to_string(), n, predicted, pass: cell_matches(predicted, &fit), fit })
        })
        .collect()
}

/// Cutoff of the Gaussian-data norms used for undamped runs.
pub fn undamped_window(opts: &QuadOptions) -> Result<RadialWindow> {
    RadialWindow::custom(0.0, gaussian_data_cutoff(opts.abs_tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn series(f: impl Fn(f64) -> f64) -> Vec<(f64, f64)> {
        log_grid(1e2, 1e6, 12).unwrap().into_iter().map(|t| (t, f(t))).collect()
    }

    #[test]
    fn reference_values() {
        let d3 = ReferenceRate::new(RateFamily::D, 3).unwrap();
        assert_relative_eq!(reference_rate(d3, 3.0).unwrap(), 2.0, max_relative = 1e-15);
        let e2 = ReferenceRate::new(RateFamily::E, 2).unwrap();
        assert_relative_eq!(reference_rate(e2, 0.0).unwrap(), 1.0, max_relative = 1e-15);
        let d5 = ReferenceRate::new(RateFamily::D, 5).unwrap();
        assert_relative_eq!(reference_rate(d5, 15.0).unwrap(), 0.5, max_relative = 1e-15);
        assert!(reference_rate(d5, -1.0).is_err());
    }

    #[test]
    fn reference_exponents() {
        let d: Vec<f64> = (1..=6).map(|n| ReferenceRate { family: RateFamily::D, n }.exponent()).collect();
        assert_eq!(d, vec![1.5, 1.0, 0.5, 0.0, -0.25, -0.5]);
        let e: Vec<f64> = (1..=5).map(|n| ReferenceRate { family: RateFamily::E, n }.exponent()).collect();
        assert_eq!(e, vec![0.5, 0.0, -0.25, -0.5, -0.75]);
    }

    #[test]
    fn exact_power_is_recovered() {
        let f = fit_rate(&series(|t| t.powf(1.5)), "power_sqrt_log").unwrap();
        assert_relative_eq!(f.exponent, 1.5, epsilon = 1e-12);
        assert_eq!(f.log_flag, LogFlag::None);
        assert_relative_eq!(f.r_squared, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn sqrt_log_growth_is_detected() {
        let f = fit_rate(&series(|t| t * t * t.ln().sqrt()), "power_sqrt_log").unwrap();
        assert_eq!(f.log_flag, LogFlag::SqrtLog);
        assert!((f.exponent - 2.0).abs() < 1e-6, "{f:?}");
    }

    #[test]
    fn non_positive_values_are_rejected() {
        let mut s = series(|t| t);
        s[3].1 = 0.0;
        assert!(matches!(fit_rate(&s, "power"), Err(LabError::InvalidSeries(_))));
        assert!(fit_rate(&s[..5], "power").is_err());
        assert!(fit_rate(&series(|t| t), "cubic").is_err());
    }

    #[test]
    fn blowup_rejects_equal_amplitudes() {
        let s = DoubleKernelSpec::new(1.0, 1.0, 1.0, 1.0, 0.3, 0.1, 1).unwrap();
        let e = blowup_probe(&s, 1, 1.0, &[1e-6, 1e-5], 0.1, &QuadOptions::default()).unwrap_err();
        assert!(e.to_string().contains("i-of-t"), "{e}");
    }

    #[test]
    fn zero_data_give_zero_ratio() {
        let p = ModelParams::unit();
        let dp = p.derive().unwrap();
        let grid = ScanGrid { t_min: 1.0, t_max: 100.0, t_points: 5, r_min: 1e-3, r_max: 0.1, r_points: 5 };
        let rep = pointwise_ratio_scan(&p, &dp, &DataProfile::zero(), Target::U, BoundTemplate::SmallZone, &grid).unwrap();
        assert_eq!(rep.selected.sup, 0.0);
        assert_eq!(rep.rhs_zeros, 0);
    }

    #[test]
    fn self_comparison_has_zero_error() {
        // undamped data whose displacement equals the profile exactly
        let p = ModelParams::unit().with_delta(0.0);
        let dp = p.derive().unwrap();
        let data = DataProfile::from_amplitudes("unit-theta1", |_| {
            let z = num_complex::Complex64::new(0.0, 0.0);
            [z, z, z, num_complex::Complex64::new(1.0, 0.0)]
        });
        let ts = log_grid(10.0, 1e3, 3).unwrap();
        let w = ErrorWindow::Small { eps0: 0.5 };
        let s = profile_error_experiment(&p, &dp, &data, Model::TypeII, Target::U, 3, &ts, w, &QuadOptions::default()).unwrap();
        for q in s {
            assert!(q.ratio < 1e-12, "{q:?}");
        }
    }

    #[test]
    fn table_predictions() {
        let rows = table_rows();
        let row = |n: &str| rows.get(n).unwrap();
        assert_eq!(row("longitudinal_iii").predicted(1), growth(1.5, LogFlag::None));
        assert_eq!(row("thermal_iii").predicted(3), growth(-0.25, LogFlag::None));
        assert_eq!(row("thermal_ii").predicted(3), Predicted::Bounded);
        assert_eq!(row("transversal").predicted(2), growth(0.0, LogFlag::SqrtLog));
        assert_eq!(row("longitudinal_ii").predicted(4), growth(0.0, LogFlag::SqrtLog));
        assert_eq!(row("longitudinal_iii").predicted(6), growth(-0.5, LogFlag::None));
    }

    #[test]
    fn trend_rule() {
        let mk = |v: &[f64]| v.iter().enumerate().map(|(i, &r)| ProfilePoint { t: 10f64.powi(i as i32 + 2), error: r, rate: 1.0, ratio: r }).collect::<Vec<_>>();
        assert!(trend_check(&mk(&[1.0, 0.9, 0.5, 0.1, 0.05]), 1e3).unwrap().passes());
        assert!(!trend_check(&mk(&[1.0, 0.9, 0.5, 0.6, 0.05]), 1e3).unwrap().passes());
        assert!(!trend_check(&mk(&[1.0, 0.9, 0.5, 0.4, 0.3]), 1e3).unwrap().passes());
    }
}
