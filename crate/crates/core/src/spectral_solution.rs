//! Exact per-frequency solutions.
//!
//! Vector data are split into a longitudinal amplitude along `i xi_dir` and a
//! transverse remainder. The longitudinal amplitude and the temperature obey
//! the characteristic quartic; the transverse part is a free wave with speed
//! `b`.

use nalgebra::Matrix4;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::char_roots::{solve_quartic, RootSet, Zone};
use crate::error::{LabError, Result};
use crate::model_params::{DerivedParams, ModelParams};
use crate::registry::Registry;

type C = Complex64;

const I: C = C::new(0.0, 1.0);
const ZERO: C = C::new(0.0, 0.0);

/// Relative root gap below which coefficients are not formed.
pub const DEGENERACY_GAP: f64 = 1e-8;
/// Exponents below this are flushed to zero.
pub const UNDERFLOW_EXPONENT: f64 = -700.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Target {
    U,
    Theta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Model {
    TypeII,
    TypeIII,
}

impl Model {
    pub fn label(&self) -> &'static str {
        match self {
            Model::TypeII => "II",
            Model::TypeIII => "III",
        }
    }
}

/// Fourier-side initial data at one frequency `xi = r * xi_dir`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralState {
    pub u0hat: Vec<C>,
    pub u1hat: Vec<C>,
    pub th0hat: C,
    pub th1hat: C,
    pub r: f64,
    pub xi_dir: Vec<f64>,
    pub curl_free: bool,
}

impl SpectralState {
    /// Curl-free data `u_k = a_k * i xi_dir` given by scalar amplitudes.
    pub fn curl_free(xi_dir: Vec<f64>, r: f64, amp: [C; 4]) -> Result<Self> {
        let dir: Vec<C> = xi_dir.iter().map(|&x| I * x).collect();
        let s = Self {
            u0hat: dir.iter().map(|d| d * amp[0]).collect(),
            u1hat: dir.iter().map(|d| d * amp[1]).collect(),
            th0hat: amp[2],
            th1hat: amp[3],
            r,
            xi_dir,
            curl_free: true,
        };
        s.validate()?;
        Ok(s)
    }

    /// One-dimensional curl-free data along the positive axis.
    pub fn scalar(r: f64, u0: C, u1: C, th0: C, th1: C) -> Result<Self> {
        Self::curl_free(vec![1.0], r, [u0, u1, th0, th1])
    }

    pub fn dim(&self) -> usize {
        self.xi_dir.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.xi_dir.len();
        if n == 0 || self.u0hat.len() != n || self.u1hat.len() != n {
            return Err(LabError::InvalidParameter {
                name: "state",
                reason: format!(
                    "dimension mismatch: xi_dir {}, u0hat {}, u1hat {}",
                    n,
                    self.u0hat.len(),
                    self.u1hat.len()
                ),
            });
        }
        let norm: f64 = self.xi_dir.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !((norm - 1.0).abs() <= 1e-12) {
            return Err(LabError::InvalidParameter {
                name: "xi_dir",
                reason: format!("must be a unit vector, |xi_dir| = {norm}"),
            });
        }
        if !(self.r >= 0.0 && self.r.is_finite()) {
            return Err(LabError::InvalidParameter {
                name: "r",
                reason: format!("must be finite and >= 0, got {}", self.r),
            });
        }
        if self.curl_free {
            for (k, u) in [&self.u0hat, &self.u1hat].into_iter().enumerate() {
                let t = vnorm(&self.transverse(u));
                if t > 1e-12 * vnorm(u).max(f64::MIN_POSITIVE) {
                    return Err(LabError::InvalidParameter {
                        name: "state",
                        reason: format!("u{k}hat is flagged curl-free but has a transverse part of size {t}"),
                    });
                }
            }
        }
        Ok(())
    }

    /// Amplitude `a` with `u = a * i xi_dir + transverse`.
    pub fn longitudinal(&self, u: &[C]) -> C {
        -I * u.iter().zip(&self.xi_dir).map(|(z, x)| z * x).sum::<C>()
    }

    pub fn transverse(&self, u: &[C]) -> Vec<C> {
        let a = self.longitudinal(u);
        u.iter().zip(&self.xi_dir).map(|(z, x)| z - a * I * x).collect()
    }

    /// `|u0hat| + |u1hat| + |th0hat| + |th1hat|`.
    pub fn data_size(&self) -> f64 {
        vnorm(&self.u0hat) + vnorm(&self.u1hat) + self.th0hat.norm() + self.th1hat.norm()
    }
}

fn vnorm(v: &[C]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Data `(v0, v1, v2, v3)` of the fourth-order equation for one unknown.
///
/// For the displacement `v` holds the longitudinal amplitude; the full
/// vectors are given by [`FourthOrderData::vector`].
#[derive(Debug, Clone, PartialEq)]
pub struct FourthOrderData {
    pub v: [C; 4],
    pub target: Target,
    pub model: Model,
    pub xi_dir: Vec<f64>,
    transverse: [Vec<C>; 2],
    wave: f64,
}

impl FourthOrderData {
    /// `k`-th datum as an n-vector (displacement) or a one-element vector.
    pub fn vector(&self, k: usize) -> Vec<C> {
        match self.target {
            Target::Theta => vec![self.v[k]],
            Target::U => {
                let w = &self.transverse[k % 2];
                let f = (-self.wave).powi((k / 2) as i32);
                self.xi_dir
                    .iter()
                    .zip(w)
                    .map(|(x, wk)| self.v[k] * I * x + wk * f)
                    .collect()
            }
        }
    }
}

pub fn reduce_data(p: &ModelParams, state: &SpectralState, target: Target, model: Model) -> Result<FourthOrderData> {
    state.validate()?;
    if model == Model::TypeII && p.delta != 0.0 {
        return Err(LabError::InvalidParameter {
            name: "delta",
            reason: format!("type II model requires delta = 0, got {}", p.delta),
        });
    }
    let r = state.r;
    let (r2, r3) = (r * r, r * r * r);
    let r4 = r2 * r2;
    let b2 = p.b * p.b;
    let (g, d) = (p.gamma, p.delta);
    let kg = p.kappa + g * g;
    let u0 = state.longitudinal(&state.u0hat);
    let u1 = state.longitudinal(&state.u1hat);
    let (t0, t1) = (state.th0hat, state.th1hat);
    let (v, transverse) = match target {
        Target::U => (
            [u0, u1, -b2 * r2 * u0 - g * r * t0, -b2 * r2 * u1 - g * r * t1],
            [state.transverse(&state.u0hat), state.transverse(&state.u1hat)],
        ),
        Target::Theta => (
            [
                t0,
                t1,
                -b2 * g * r3 * u0 - kg * r2 * t0 - d * r2 * t1,
                b2 * d * g * r4 * r * u0 - b2 * g * r3 * u1 + kg * d * r4 * t0 - kg * r2 * t1 + d * d * r4 * t1,
            ],
            [Vec::new(), Vec::new()],
        ),
    };
    Ok(FourthOrderData {
        v,
        target,
        model,
        xi_dir: state.xi_dir.clone(),
        transverse,
        wave: b2 * r2,
    })
}

/// Coefficients `d_j` of `sum_j d_j exp(lambda_j t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeCoefficients {
    pub d: [C; 4],
}

/// `prod_{j<k} (lambda_k - lambda_j)`.
pub fn vandermonde_det(l: &[C; 4]) -> C {
    let mut det = C::new(1.0, 0.0);
    for j in 0..4 {
        for k in j + 1..4 {
            det *= l[k] - l[j];
        }
    }
    det
}

/// Strategy for solving `V d = v` with `V_{pk} = lambda_k^p`.
pub trait ModeSolver: Send + Sync {
    fn solve(&self, roots: &RootSet, v: &[C; 4]) -> Result<ModeCoefficients>;
}

/// Explicit determinant formulas for the pair structures, Lagrange
/// coefficients otherwise.
pub struct CramerSolver;

/// Generic LU solve of the 4x4 Vandermonde system.
pub struct LuSolver;

fn check_separated(roots: &RootSet) -> Result<()> {
    let gap = roots.relative_gap();
    if !(gap > DEGENERACY_GAP) {
        return Err(LabError::NearDegenerateRoots { r: roots.r, gap });
    }
    Ok(())
}

impl ModeSolver for CramerSolver {
    fn solve(&self, roots: &RootSet, v: &[C; 4]) -> Result<ModeCoefficients> {
        check_separated(roots)?;
        let l = roots.roots;
        let num = match roots.zone {
            Zone::TwoConjugatePairs { slow, fast } => two_pair_numerators(&l, v, (slow.re, slow.im), (fast.re, fast.im)),
            Zone::TwoImaginaryPairs { slow, fast } => two_pair_numerators(&l, v, (0.0, slow), (0.0, fast)),
            Zone::TwoRealOnePair { pair, .. } => one_pair_numerators(&l, v, pair.re, pair.im),
            _ => return Ok(lagrange_coefficients(&l, v)),
        };
        let det = vandermonde_det(&l);
        Ok(ModeCoefficients { d: num.map(|x| x / det) })
    }
}

impl ModeSolver for LuSolver {
    fn solve(&self, roots: &RootSet, v: &[C; 4]) -> Result<ModeCoefficients> {
        check_separated(roots)?;
        let l = roots.roots;
        let m = Matrix4::from_fn(|p, k| l[k].powi(p as i32));
        let rhs = nalgebra::Vector4::new(v[0], v[1], v[2], v[3]);
        let d = m.lu().solve(&rhs).ok_or(LabError::NearDegenerateRoots {
            r: roots.r,
            gap: roots.relative_gap(),
        })?;
        Ok(ModeCoefficients { d: [d[0], d[1], d[2], d[3]] })
    }
}

/// Registry of Vandermonde solvers: `cramer` (default) and `lu`.
pub fn mode_solvers() -> Registry<dyn ModeSolver> {
    let mut reg: Registry<dyn ModeSolver> = Registry::new("mode solver");
    reg.register("cramer", Box::new(CramerSolver));
    reg.register("lu", Box::new(LuSolver));
    reg
}

pub fn vandermonde_solve(roots: &RootSet, v: &[C; 4]) -> Result<ModeCoefficients> {
    CramerSolver.solve(roots, v)
}

/// Numerators `det V_j` for roots `(R1 +/- i I1, R2 +/- i I2)`.
fn two_pair_numerators(l: &[C; 4], v: &[C; 4], (r1, i1): (f64, f64), (r2, i2): (f64, f64)) -> [C; 4] {
    let [v0, v1, v2, v3] = *v;
    let [l1, l2, l3, l4] = *l;
    let s1 = r1 * r1 + i1 * i1;
    let s2 = r2 * r2 + i2 * i2;
    let q = |r: f64, i: f64, x: C| (r - x) * (r - x) + i * i;
    let j2 = 2.0 * I;
    let d1 = -j2 * l2 * i2 * s2 * q(r2, i2, l2) * v0
        + (j2 * i2 * s2 * s2 + l2 * l2 * l4 * l4 * (l4 - l2) - l2 * l2 * l3 * l3 * (l3 - l2)) * v1
        + (-2.0 * j2 * r2 * i2 * s2 - l2 * l4 * (l4 * l4 - l2 * l2) + l2 * l3 * (l3 * l3 - l2 * l2)) * v2
        + j2 * i2 * q(r2, i2, l2) * v3;
    let d2 = j2 * l1 * i2 * s2 * q(r2, i2, l1) * v0
        - (j2 * i2 * s2 * s2 + l1 * l1 * l4 * l4 * (l4 - l1) - l1 * l1 * l3 * l3 * (l3 - l1)) * v1
        - (-2.0 * j2 * r2 * i2 * s2 - l1 * l4 * (l4 * l4 - l1 * l1) + l1 * l3 * (l3 * l3 - l1 * l1)) * v2
        - j2 * i2 * q(r2, i2, l1) * v3;
    let d3 = -j2 * l4 * i1 * s1 * q(r1, i1, l4) * v0
        + (j2 * i1 * s1 * s1 + l1 * l1 * l4 * l4 * (l4 - l1) - l2 * l2 * l4 * l4 * (l4 - l2)) * v1
        + (-2.0 * j2 * r1 * i1 * s1 - l1 * l4 * (l4 * l4 - l1 * l1) + l2 * l4 * (l4 * l4 - l2 * l2)) * v2
        + j2 * i1 * q(r1, i1, l4) * v3;
    let d4 = j2 * l3 * i1 * s1 * q(r1, i1, l3) * v0
        - (j2 * i1 * s1 * s1 + l1 * l1 * l3 * l3 * (l3 - l1) - l2 * l2 * l3 * l3 * (l3 - l2)) * v1
        - (-2.0 * j2 * r1 * i1 * s1 - l1 * l3 * (l3 * l3 - l1 * l1) + l2 * l3 * (l3 * l3 - l2 * l2)) * v2
        - j2 * i1 * q(r1, i1, l3) * v3;
    [d1, d2, d3, d4]
}

/// Numerators `det V_j` for two real roots and the pair `R +/- i I`.
fn one_pair_numerators(l: &[C; 4], v: &[C; 4], r: f64, i: f64) -> [C; 4] {
    let [v0, v1, v2, v3] = *v;
    let [l1, l2, l3, l4] = *l;
    let s = r * r + i * i;
    let q = |x: C| (r - x) * (r - x) + i * i;
    let j2 = 2.0 * I;
    let d1 = -j2 * l2 * i * s * q(l2) * v0
        + (j2 * i * s * s + l2 * l2 * l4 * l4 * (l4 - l2) - l2 * l2 * l3 * l3 * (l3 - l2)) * v1
        + (-2.0 * j2 * r * i * s - l2 * l4 * (l4 * l4 - l2 * l2) + l2 * l3 * (l3 * l3 - l2 * l2)) * v2
        + j2 * i * q(l2) * v3;
    let d2 = j2 * l1 * i * s * q(l1) * v0
        - (j2 * i * s * s + l1 * l1 * l4 * l4 * (l4 - l1) - l1 * l1 * l3 * l3 * (l3 - l1)) * v1
        - (-2.0 * j2 * r * i * s - l1 * l4 * (l4 * l4 - l1 * l1) + l1 * l3 * (l3 * l3 - l1 * l1)) * v2
        - j2 * i * q(l1) * v3;
    let d3 = l1 * l2 * l4 * (l4 - l2) * (l4 - l1) * (l2 - l1) * v0
        - (l2 * l2 * l4 * l4 * (l4 - l2) - l1 * l1 * l4 * l4 * (l4 - l1) + l1 * l1 * l2 * l2 * (l2 - l1)) * v1
        + (l2 * l4 * (l4 * l4 - l2 * l2) - l1 * l4 * (l4 * l4 - l1 * l1) + l1 * l2 * (l2 * l2 - l1 * l1)) * v2
        - (l4 - l2) * (l4 - l1) * (l2 - l1) * v3;
    let d4 = -l1 * l2 * l3 * (l3 - l2) * (l3 - l1) * (l2 - l1) * v0
        + (l2 * l2 * l3 * l3 * (l3 - l2) - l1 * l1 * l3 * l3 * (l3 - l1) + l1 * l1 * l2 * l2 * (l2 - l1)) * v1
        - (l2 * l3 * (l3 * l3 - l2 * l2) - l1 * l3 * (l3 * l3 - l1 * l1) + l1 * l2 * (l2 * l2 - l1 * l1)) * v2
        + (l3 - l2) * (l3 - l1) * (l2 - l1) * v3;
    [d1, d2, d3, d4]
}

/// `d_j = sum_p [z^p] L_j(z) v_p` with the Lagrange basis polynomials `L_j`.
fn lagrange_coefficients(l: &[C; 4], v: &[C; 4]) -> ModeCoefficients {
    let mut d = [ZERO; 4];
    for j in 0..4 {
        let others: Vec<C> = (0..4).filter(|&k| k != j).map(|k| l[k]).collect();
        let (a, b, c) = (others[0], others[1], others[2]);
        // (z-a)(z-b)(z-c) = z^3 - e1 z^2 + e2 z - e3
        let e1 = a + b + c;
        let e2 = a * b + a * c + b * c;
        let e3 = a * b * c;
        let denom = (l[j] - a) * (l[j] - b) * (l[j] - c);
        d[j] = (v[3] - e1 * v[2] + e2 * v[1] - e3 * v[0]) / denom;
    }
    ModeCoefficients { d }
}

fn exp_clamped(z: C) -> C {
    if z.re < UNDERFLOW_EXPONENT {
        ZERO
    } else {
        let m = z.re.exp();
        C::new(m * z.im.cos(), m * z.im.sin())
    }
}

/// `sum_j d_j lambda_j^order exp(lambda_j t)`, with conjugate pairs combined
/// in real trigonometric form.
pub fn evaluate_modes(coeffs: &ModeCoefficients, roots: &RootSet, t: f64, order: u32) -> C {
    let l = roots.roots;
    let d: Vec<C> = coeffs.d.iter().zip(&l).map(|(d, z)| d * z.powu(order)).collect();
    let pair = |j: usize| {
        let (re, im) = (l[j].re, l[j].im);
        if re * t < UNDERFLOW_EXPONENT {
            return ZERO;
        }
        let (s, c) = (im * t).sin_cos();
        (re * t).exp() * ((d[j] + d[j + 1]) * c + I * (d[j] - d[j + 1]) * s)
    };
    match roots.zone {
        Zone::TwoConjugatePairs { .. } | Zone::TwoImaginaryPairs { .. } => pair(0) + pair(2),
        Zone::TwoRealOnePair { .. } => d[0] * exp_clamped(l[0] * t) + d[1] * exp_clamped(l[1] * t) + pair(2),
        _ => (0..4).map(|j| d[j] * exp_clamped(l[j] * t)).sum(),
    }
}

/// Value of the mode sum at time `t`.
pub fn evaluate_type3(coeffs: &ModeCoefficients, roots: &RootSet, t: f64) -> C {
    evaluate_modes(coeffs, roots, t, 0)
}

/// Divided difference of `exp` over the given nodes.
pub fn exp_divided_difference(nodes: &[C]) -> C {
    let m = nodes.len();
    if m == 1 {
        return exp_clamped(nodes[0]);
    }
    let mut far = (0, 1, -1.0);
    for a in 0..m {
        for b in a + 1..m {
            let s = (nodes[a] - nodes[b]).norm();
            if s > far.2 {
                far = (a, b, s);
            }
        }
    }
    let (a, b, spread) = far;
    if spread <= 1.5 {
        return exp_dd_taylor(nodes);
    }
    let without = |k: usize| -> Vec<C> { nodes.iter().enumerate().filter(|&(i, _)| i != k).map(|(_, z)| *z).collect() };
    (exp_divided_difference(&without(b)) - exp_divided_difference(&without(a))) / (nodes[a] - nodes[b])
}

/// `exp(c) sum_{j >= 0} h_j(y) / (m + j)!` around the node mean `c`, for `m + 1` nodes.
fn exp_dd_taylor(nodes: &[C]) -> C {
    let m = nodes.len() - 1;
    let c = nodes.iter().sum::<C>() / nodes.len() as f64;
    let ec = exp_clamped(c);
    if ec == ZERO {
        return ZERO;
    }
    // |y| <= 1.5 and m <= 3 leave the tail below 1e-25 after 32 terms
    const TERMS: usize = 32;
    let mut h = [ZERO; TERMS];
    h[0] = C::new(1.0, 0.0);
    for z in nodes {
        let y = z - c;
        for j in 1..TERMS {
            h[j] = h[j] + y * h[j - 1];
        }
    }
    let mut fact = (1..=m).map(|k| k as f64).product::<f64>();
    let mut sum = ZERO;
    for j in 0..TERMS {
        let k = m + j;
        if j > 0 {
            fact *= k as f64;
        }
        sum += h[j] / fact;
    }
    ec * sum
}

/// Data of the `order`-th derivative: `(v_k, ..., v_{k+3})` continued by the quartic.
fn shifted_data(l: &[C; 4], v: &[C; 4], order: u32) -> [C; 4] {
    let e1 = l[0] + l[1] + l[2] + l[3];
    let e2 = l[0] * l[1] + l[0] * l[2] + l[0] * l[3] + l[1] * l[2] + l[1] * l[3] + l[2] * l[3];
    let e3 = l[0] * l[1] * l[2] + l[0] * l[1] * l[3] + l[0] * l[2] * l[3] + l[1] * l[2] * l[3];
    let e4 = l[0] * l[1] * l[2] * l[3];
    let mut w = *v;
    for _ in 0..order {
        let next = e1 * w[3] - e2 * w[2] + e3 * w[1] - e4 * w[0];
        w = [w[1], w[2], w[3], next];
    }
    w
}

/// Newton divided-difference form of the solution; valid for coincident roots.
pub fn evaluate_confluent(roots: &RootSet, v: &[C; 4], t: f64, order: u32) -> C {
    let mut l = roots.roots;
    let u = shifted_data(&l, v, order);
    l.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
    let w = [
        u[0],
        u[1] - l[0] * u[0],
        u[2] - (l[0] + l[1]) * u[1] + l[0] * l[1] * u[0],
        u[3] - (l[0] + l[1] + l[2]) * u[2] + (l[0] * l[1] + l[0] * l[2] + l[1] * l[2]) * u[1] - l[0] * l[1] * l[2] * u[0],
    ];
    let nodes: Vec<C> = l.iter().map(|z| z * t).collect();
    let mut y = w[0] * exp_clamped(nodes[0]);
    let mut tm = 1.0;
    for m in 1..4 {
        tm *= t;
        if w[m] != ZERO {
            y += w[m] * tm * exp_divided_difference(&nodes[..=m]);
        }
    }
    y
}

/// Solution of the fourth-order equation with data `v`: the mode sum when
/// roots are well separated on the time scale `t`, the confluent form otherwise.
pub fn evaluate_scalar(roots: &RootSet, v: &[C; 4], t: f64, order: u32) -> Result<C> {
    let m = roots.max_modulus();
    let gap = roots.relative_gap();
    if gap <= DEGENERACY_GAP || gap * m * t < 1.0 {
        return Ok(evaluate_confluent(roots, v, t, order));
    }
    let coeffs = vandermonde_solve(roots, v)?;
    Ok(evaluate_modes(&coeffs, roots, t, order))
}

/// Field values at one frequency and time.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldValue {
    pub u: Vec<C>,
    pub theta: C,
}

impl FieldValue {
    pub fn u_norm(&self) -> f64 {
        vnorm(&self.u)
    }

    /// Longitudinal amplitude along `i xi_dir`.
    pub fn u_amplitude(&self, xi_dir: &[f64]) -> C {
        -I * self.u.iter().zip(xi_dir).map(|(z, x)| z * x).sum::<C>()
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(LabError::InvalidParameter {
            name: "t",
            reason: format!("time must be finite and >= 0, got {t}"),
        });
    }
    Ok(())
}

fn transverse_wave(state: &SpectralState, b: f64, t: f64) -> Vec<C> {
    let w0 = state.transverse(&state.u0hat);
    let w1 = state.transverse(&state.u1hat);
    let x = b * state.r * t;
    let (s, c) = x.sin_cos();
    let sinc_t = if x.abs() < 1e-4 { t * (1.0 - x * x / 6.0) } else { s / (b * state.r) };
    w0.iter().zip(&w1).map(|(a, b)| a * c + b * sinc_t).collect()
}

fn assemble(state: &SpectralState, amp: C, perp: Vec<C>, theta: C) -> FieldValue {
    let u = state.xi_dir.iter().zip(perp).map(|(x, w)| amp * I * x + w).collect();
    FieldValue { u, theta }
}

/// Type III solution at frequency `state.r` and time `t`.
pub fn evaluate_type3_state(p: &ModelParams, dp: &DerivedParams, state: &SpectralState, t: f64) -> Result<FieldValue> {
    check_time(t)?;
    let roots = solve_quartic(p, dp, state.r)?;
    let du = reduce_data(p, state, Target::U, Model::TypeIII)?;
    let dt = reduce_data(p, state, Target::Theta, Model::TypeIII)?;
    let amp = evaluate_scalar(&roots, &du.v, t, 0)?;
    let theta = evaluate_scalar(&roots, &dt.v, t, 0)?;
    Ok(assemble(state, amp, transverse_wave(state, p.b, t), theta))
}

/// `sin(x)/x`.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-3 {
        let x2 = x * x;
        1.0 - x2 / 6.0 * (1.0 - x2 / 20.0 * (1.0 - x2 / 42.0))
    } else {
        x.sin() / x
    }
}

/// `sinc(a) - sinc(b)` without cancellation for small or close arguments.
pub fn sinc_difference(a: f64, b: f64) -> f64 {
    if a.abs().max(b.abs()) >= 1.0 {
        return sinc(a) - sinc(b);
    }
    let (a2, b2) = (a * a, b * b);
    // sum_{k>=1} (-1)^k h_{k-1}(a^2, b^2) / (2k+1)!
    let mut h: f64 = 1.0;
    let mut apow = 1.0;
    let mut fact = 6.0;
    let mut sum = 0.0f64;
    for k in 1..30 {
        let term = if k % 2 == 1 { -h / fact } else { h / fact };
        sum += term;
        if term.abs() <= 1e-18 * sum.abs() {
            break;
        }
        apow *= a2;
        h = h * b2 + apow;
        fact *= ((2 * k + 2) * (2 * k + 3)) as f64;
    }
    (a2 - b2) * sum
}

/// `cos(x) - cos(y)` as a product of sines.
pub fn cos_difference(x: f64, y: f64) -> f64 {
    -2.0 * (0.5 * (x + y)).sin() * (0.5 * (x - y)).sin()
}

fn require_undamped(p: &ModelParams) -> Result<()> {
    if p.delta != 0.0 {
        return Err(LabError::InvalidParameter {
            name: "delta",
            reason: format!("type II closed form requires delta = 0, got {}", p.delta),
        });
    }
    Ok(())
}

/// Type II closed form for longitudinal amplitudes `(U0, U1, theta0, theta1)`;
/// returns `(U, theta)` at `(r, t)`.
pub fn type2_longitudinal(p: &ModelParams, dp: &DerivedParams, r: f64, t: f64, amp: [C; 4]) -> (C, C) {
    let [u0, u1, t0, t1] = amp;
    let (n1, n2) = (dp.nu1, dp.nu2);
    let (x1, x2) = (n1 * r * t, n2 * r * t);
    let (c1, c2) = (x1.cos(), x2.cos());
    let (s1, s2) = (t * sinc(x1), t * sinc(x2));
    let dc = cos_difference(x1, x2);
    let ds = t * sinc_difference(x1, x2);
    let den = n2 * n2 - n1 * n1;
    let b2 = p.b * p.b;
    let kg = p.kappa + p.gamma * p.gamma;
    let g = p.gamma;
    // dc / r and ds / r vanish with r; their ratios stay bounded.
    let (dc_r, ds_r) = if r == 0.0 { (0.0, 0.0) } else { (dc / r, ds / r) };
    let amp = (((n2 * n2 - b2) * c1 - (n1 * n1 - b2) * c2) * u0 + ((n2 * n2 - b2) * s1 - (n1 * n1 - b2) * s2) * u1
        - g * dc_r * t0
        - g * ds_r * t1)
        / den;
    let theta = (-b2 * g * r * dc * u0 - b2 * g * r * ds * u1
        + ((n2 * n2 - kg) * c1 - (n1 * n1 - kg) * c2) * t0
        + ((n2 * n2 - kg) * s1 - (n1 * n1 - kg) * s2) * t1)
        / den;
    (amp, theta)
}

/// Type II closed-form solution; requires `delta = 0`.
pub fn evaluate_type2(p: &ModelParams, dp: &DerivedParams, state: &SpectralState, t: f64) -> Result<FieldValue> {
    check_time(t)?;
    state.validate()?;
    require_undamped(p)?;
    let amp = [state.longitudinal(&state.u0hat), state.longitudinal(&state.u1hat), state.th0hat, state.th1hat];
    let (u, theta) = type2_longitudinal(p, dp, state.r, t, amp);
    Ok(assemble(state, u, transverse_wave(state, p.b, t), theta))
}

/// `(U, theta)` for radial longitudinal data `(U0, U1, theta0, theta1)`.
pub fn longitudinal_values(p: &ModelParams, dp: &DerivedParams, model: Model, r: f64, t: f64, amp: [C; 4]) -> Result<(C, C)> {
    check_time(t)?;
    match model {
        Model::TypeII => {
            require_undamped(p)?;
            if !(r >= 0.0 && r.is_finite()) {
                return Err(LabError::InvalidParameter { name: "r", reason: format!("need finite r >= 0, got {r}") });
            }
            Ok(type2_longitudinal(p, dp, r, t, amp))
        }
        Model::TypeIII => {
            let s = SpectralState::scalar(r, amp[0], amp[1], amp[2], amp[3])?;
            let f = evaluate_type3_state(p, dp, &s, t)?;
            Ok((f.u_amplitude(&s.xi_dir), f.theta))
        }
    }
}

/// Coefficient-sum bounds on `(|u|, |theta|)` from the type II closed form.
pub fn type2_bound(p: &ModelParams, dp: &DerivedParams, state: &SpectralState) -> (f64, f64) {
    let r = state.r;
    let (n1, n2) = (dp.nu1, dp.nu2);
    let den = (n2 * n2 - n1 * n1).abs();
    let b2 = p.b * p.b;
    let kg = p.kappa + p.gamma * p.gamma;
    let g = p.gamma.abs();
    let u0 = state.longitudinal(&state.u0hat).norm();
    let u1 = state.longitudinal(&state.u1hat).norm();
    let (t0, t1) = (state.th0hat.norm(), state.th1hat.norm());
    let inv = 1.0 / (n1 * r) + 1.0 / (n2 * r);
    let perp = vnorm(&state.transverse(&state.u0hat)) + vnorm(&state.transverse(&state.u1hat)) / (p.b * r);
    let bu = ((n2 * n2 - b2).abs() + (n1 * n1 - b2).abs()) * u0
        + ((n2 * n2 - b2).abs() / (n1 * r) + (n1 * n1 - b2).abs() / (n2 * r)) * u1
        + 2.0 * g / r * t0
        + g / r * inv * t1;
    let bt = 2.0 * b2 * g * r * u0
        + b2 * g * r * inv * u1
        + ((n2 * n2 - kg).abs() + (n1 * n1 - kg).abs()) * t0
        + ((n2 * n2 - kg).abs() / (n1 * r) + (n1 * n1 - kg).abs() / (n2 * r)) * t1;
    (bu / den + perp, bt / den)
}

pub fn evaluate(p: &ModelParams, dp: &DerivedParams, state: &SpectralState, model: Model, t: f64) -> Result<FieldValue> {
    match model {
        Model::TypeII => evaluate_type2(p, dp, state, t),
        Model::TypeIII => evaluate_type3_state(p, dp, state, t),
    }
}

/// `(|u(t)|, |theta(t)|)` at one frequency.
pub fn solution_magnitudes(p: &ModelParams, dp: &DerivedParams, state: &SpectralState, model: Model, t: f64) -> Result<(f64, f64)> {
    let f = evaluate(p, dp, state, model, t)?;
    Ok((f.u_norm(), f.theta.norm()))
}

/// `(sum_j |d_j exp(lambda_j t)|^2)^{1/2}` over the modes of both unknowns
/// (longitudinal part only); equivalent to the state norm at fixed `r`.
pub fn modal_amplitude_norm(p: &ModelParams, dp: &DerivedParams, state: &SpectralState, t: f64) -> Result<f64> {
    check_time(t)?;
    let roots = solve_quartic(p, dp, state.r)?;
    let mut sum = 0.0;
    for target in [Target::U, Target::Theta] {
        let data = reduce_data(p, state, target, Model::TypeIII)?;
        let c = vandermonde_solve(&roots, &data.v)?;
        for (d, l) in c.d.iter().zip(&roots.roots) {
            sum += (d * exp_clamped(l * t)).norm_sqr();
        }
    }
    Ok(sum.sqrt())
}
