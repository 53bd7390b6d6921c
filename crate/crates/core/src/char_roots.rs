//! Characteristic roots of the frequency-wise fourth-order equation
//!
//! `z^4 + delta r^2 z^3 + (b^2 + kappa + gamma^2) r^2 z^2 + b^2 delta r^4 z + b^2 kappa r^4 = 0`
//!
//! together with their classification and the leading-order expansions for
//! small and large frequencies.

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::model_params::{DerivedParams, ModelParams};

/// A root is treated as real when `|Im| <= REAL_TOL * (1 + |z|)`.
pub const REAL_TOL: f64 = 1e-9;
/// Per-root residual bound relative to [`Quartic::residual_scale`].
pub const RESIDUAL_TOL: f64 = 1e-9;

/// Monic quartic `z^4 + c3 z^3 + c2 z^2 + c1 z + c0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quartic {
    pub c3: f64,
    pub c2: f64,
    pub c1: f64,
    pub c0: f64,
}

impl Quartic {
    pub fn at(p: &ModelParams, r: f64) -> Self {
        let r2 = r * r;
        let r4 = r2 * r2;
        let b2 = p.b * p.b;
        Self {
            c3: p.delta * r2,
            c2: (b2 + p.kappa + p.gamma * p.gamma) * r2,
            c1: b2 * p.delta * r4,
            c0: b2 * p.kappa * r4,
        }
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        (((z + self.c3) * z + self.c2) * z + self.c1) * z + self.c0
    }

    pub fn derivative(&self, z: Complex64) -> Complex64 {
        ((z * 4.0 + 3.0 * self.c3) * z + 2.0 * self.c2) * z + self.c1
    }

    /// `max(|coefficients|, 1) * max(1, |z|)^4`.
    pub fn residual_scale(&self, z: Complex64) -> f64 {
        let m = [1.0, self.c3.abs(), self.c2.abs(), self.c1.abs(), self.c0.abs()]
            .into_iter()
            .fold(0.0, f64::max);
        m * z.norm().max(1.0).powi(4)
    }

    /// Coefficient-sum bound on `|P(z)|` from rounding in Horner's scheme.
    fn eval_noise(&self, z: Complex64) -> f64 {
        let a = z.norm();
        let s = (((a + self.c3.abs()) * a + self.c2.abs()) * a + self.c1.abs()) * a + self.c0.abs();
        8.0 * f64::EPSILON * s
    }

    /// Standard discriminant of the quartic.
    pub fn discriminant(&self) -> f64 {
        let (a, b, c, d, e) = (1.0f64, self.c3, self.c2, self.c1, self.c0);
        256.0 * a.powi(3) * e.powi(3) - 192.0 * a * a * b * d * e * e
            - 128.0 * a * a * c * c * e * e
            + 144.0 * a * a * c * d * d * e
            - 27.0 * a * a * d.powi(4)
            + 144.0 * a * b * b * c * e * e
            - 6.0 * a * b * b * d * d * e
            - 80.0 * a * b * c * c * d * e
            + 18.0 * a * b * c * d.powi(3)
            + 16.0 * a * c.powi(4) * e
            - 4.0 * a * c.powi(3) * d * d
            - 27.0 * b.powi(4) * e * e
            + 18.0 * b.powi(3) * c * d * e
            - 4.0 * b.powi(3) * d.powi(3)
            - 4.0 * b * b * c.powi(3) * e
            + b * b * c * c * d * d
    }
}

/// Frequency-zone boundaries: small frequencies up to `eps0`, large from `n0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZoneConfig {
    pub eps0: f64,
    pub n0: f64,
}

impl Default for ZoneConfig {
    fn default() -> Self {
        Self { eps0: 0.1, n0: 10.0 }
    }
}

impl ZoneConfig {
    pub fn new(eps0: f64, n0: f64) -> Result<Self> {
        if !(eps0 > 0.0 && eps0 < n0 && n0.is_finite()) {
            return Err(LabError::InvalidParameter {
                name: "eps0",
                reason: format!("need 0 < eps0 < n0, got eps0 = {eps0}, n0 = {n0}"),
            });
        }
        Ok(Self { eps0, n0 })
    }
}

/// `re +/- i im` with `im > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConjugatePair {
    pub re: f64,
    pub im: f64,
}

/// Root structure at one frequency magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Zone {
    /// `r = 0`: quadruple root at the origin.
    Degenerate,
    /// Two pairs of non-real conjugate roots; `slow` has the smaller imaginary part.
    TwoConjugatePairs {
        slow: ConjugatePair,
        fast: ConjugatePair,
    },
    /// Two distinct negative real roots (`first < second`) and one conjugate pair.
    TwoRealOnePair {
        first: f64,
        second: f64,
        pair: ConjugatePair,
    },
    /// Purely imaginary roots `+/- i slow`, `+/- i fast` (no dissipation).
    TwoImaginaryPairs { slow: f64, fast: f64 },
    /// Four real roots in ascending order.
    FourReal { roots: [f64; 4] },
}

impl Zone {
    pub fn label(&self) -> &'static str {
        match self {
            Zone::Degenerate => "degenerate",
            Zone::TwoConjugatePairs { .. } => "two-conjugate-pairs",
            Zone::TwoRealOnePair { .. } => "two-real-one-pair",
            Zone::TwoImaginaryPairs { .. } => "two-imaginary-pairs",
            Zone::FourReal { .. } => "four-real",
        }
    }
}

/// The four characteristic roots at frequency magnitude `r`.
///
/// Ordering: conjugate pairs are stored as `(z, conj z)` with `Im z > 0`,
/// pairs sorted by `|Im|` ascending; real roots come first, ascending.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootSet {
    pub r: f64,
    pub roots: [Complex64; 4],
    pub zone: Zone,
}

impl RootSet {
    pub fn max_real_part(&self) -> f64 {
        self.roots.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_modulus(&self) -> f64 {
        self.roots.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Smallest pairwise distance divided by the largest modulus.
    pub fn relative_gap(&self) -> f64 {
        let m = self.max_modulus();
        if m == 0.0 {
            return 0.0;
        }
        let mut g = f64::INFINITY;
        for j in 0..4 {
            for k in j + 1..4 {
                g = g.min((self.roots[j] - self.roots[k]).norm());
            }
        }
        g / m
    }

    pub fn sum(&self) -> Complex64 {
        self.roots.iter().sum()
    }

    pub fn product(&self) -> Complex64 {
        self.roots.iter().product()
    }
}

/// Roots of the characteristic quartic at frequency magnitude `r`.
pub fn solve_quartic(p: &ModelParams, dp: &DerivedParams, r: f64) -> Result<RootSet> {
    if !(r >= 0.0 && r.is_finite()) {
        return Err(LabError::InvalidParameter {
            name: "r",
            reason: format!("frequency magnitude must be finite and >= 0, got {r}"),
        });
    }
    let zero = Complex64::new(0.0, 0.0);
    if r == 0.0 {
        return Ok(RootSet {
            r,
            roots: [zero; 4],
            zone: Zone::Degenerate,
        });
    }
    if p.delta == 0.0 {
        let (s, f) = (dp.nu2 * r, dp.nu1 * r);
        return Ok(RootSet {
            r,
            roots: [
                Complex64::new(0.0, s),
                Complex64::new(0.0, -s),
                Complex64::new(0.0, f),
                Complex64::new(0.0, -f),
            ],
            zone: Zone::TwoImaginaryPairs { slow: s, fast: f },
        });
    }
    let q = Quartic::at(p, r);
    let mut z = companion_roots(&q);
    for root in z.iter_mut() {
        *root = newton_polish(&q, *root, 2);
    }
    let (real, pairs) = split_structure(z);
    let set = match (real.len(), pairs.len()) {
        (0, 2) => {
            let mut factors = [pair_factor(pairs[0]), pair_factor(pairs[1])];
            refine_factors(&q, &mut factors);
            let mut a = factor_pair(factors[0]);
            let mut b = factor_pair(factors[1]);
            if a.im > b.im {
                std::mem::swap(&mut a, &mut b);
            }
            RootSet {
                r,
                roots: [
                    Complex64::new(a.re, a.im),
                    Complex64::new(a.re, -a.im),
                    Complex64::new(b.re, b.im),
                    Complex64::new(b.re, -b.im),
                ],
                zone: Zone::TwoConjugatePairs { slow: a, fast: b },
            }
        }
        (2, 1) => {
            let mut factors = [real_factor(real[0], real[1]), pair_factor(pairs[0])];
            refine_factors(&q, &mut factors);
            let (lo, hi) = factor_real(factors[0]).unwrap_or((real[0].min(real[1]), real[0].max(real[1])));
            let c = factor_pair(factors[1]);
            RootSet {
                r,
                roots: [
                    Complex64::new(lo, 0.0),
                    Complex64::new(hi, 0.0),
                    Complex64::new(c.re, c.im),
                    Complex64::new(c.re, -c.im),
                ],
                zone: Zone::TwoRealOnePair {
                    first: lo,
                    second: hi,
                    pair: c,
                },
            }
        }
        _ => {
            let mut v: Vec<f64> = real.clone();
            v.sort_by(f64::total_cmp);
            let mut factors = [real_factor(v[0], v[1]), real_factor(v[2], v[3])];
            refine_factors(&q, &mut factors);
            if let (Some((a, b)), Some((c, d))) = (factor_real(factors[0]), factor_real(factors[1])) {
                v = vec![a, b, c, d];
                v.sort_by(f64::total_cmp);
            }
            let roots = [v[0], v[1], v[2], v[3]];
            RootSet {
                r,
                roots: roots.map(|x| Complex64::new(x, 0.0)),
                zone: Zone::FourReal { roots },
            }
        }
    };
    for z in set.roots {
        let res = q.eval(z).norm();
        let scale = q.residual_scale(z);
        if !(res <= RESIDUAL_TOL * scale) {
            return Err(LabError::RootFailure {
                r,
                residual: res / scale,
                tolerance: RESIDUAL_TOL,
            });
        }
    }
    Ok(set)
}

/// Eigenvalues of the balanced companion matrix.
fn companion_roots(q: &Quartic) -> [Complex64; 4] {
    let mut m = Matrix4::<f64>::zeros();
    m[(0, 3)] = -q.c0;
    m[(1, 3)] = -q.c1;
    m[(2, 3)] = -q.c2;
    m[(3, 3)] = -q.c3;
    m[(1, 0)] = 1.0;
    m[(2, 1)] = 1.0;
    m[(3, 2)] = 1.0;
    balance(&mut m);
    let ev = m.complex_eigenvalues();
    [ev[0], ev[1], ev[2], ev[3]]
}

/// Diagonal similarity scaling by powers of two so that row and column norms match.
fn balance(m: &mut Matrix4<f64>) {
    const RADIX: f64 = 2.0;
    for _ in 0..64 {
        let mut done = true;
        for i in 0..4 {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..4 {
                if j != i {
                    c += m[(j, i)].abs();
                    r += m[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / RADIX;
            while c < g {
                f *= RADIX;
                c *= RADIX * RADIX;
            }
            g = r * RADIX;
            while c > g {
                f /= RADIX;
                c /= RADIX * RADIX;
            }
            if (c + r) / f < 0.95 * s {
                done = false;
                for j in 0..4 {
                    m[(i, j)] /= f;
                    m[(j, i)] *= f;
                }
            }
        }
        if done {
            break;
        }
    }
}

fn newton_polish(q: &Quartic, mut z: Complex64, steps: usize) -> Complex64 {
    for _ in 0..steps {
        let f = q.eval(z);
        if f.norm() <= q.eval_noise(z) {
            break;
        }
        let d = q.derivative(z);
        if d.norm() == 0.0 {
            break;
        }
        let next = z - f / d;
        if next.is_finite() && q.eval(next).norm() <= f.norm() {
            z = next;
        } else {
            break;
        }
    }
    z
}

/// Splits roots into real values and conjugate pairs (`Im > 0` representative).
fn split_structure(z: [Complex64; 4]) -> (Vec<f64>, Vec<ConjugatePair>) {
    let rel = |w: &Complex64| w.im.abs() / (1.0 + w.norm());
    let mut order: Vec<usize> = (0..4).collect();
    order.sort_by(|&a, &b| rel(&z[a]).total_cmp(&rel(&z[b])));
    let mut k = order.iter().filter(|&&i| rel(&z[i]) <= REAL_TOL).count();
    if k % 2 == 1 {
        // Conjugate symmetry forces an even count; promote or demote the borderline root.
        k = if rel(&z[order[k]]) <= 1e3 * REAL_TOL { k + 1 } else { k - 1 };
    }
    let real: Vec<f64> = order[..k].iter().map(|&i| z[i].re).collect();
    let mut rest: Vec<Complex64> = order[k..].iter().map(|&i| z[i]).collect();
    let mut pairs = Vec::new();
    while rest.len() >= 2 {
        let mut best = (0, 1, f64::INFINITY);
        for a in 0..rest.len() {
            for b in a + 1..rest.len() {
                let d = (rest[a] - rest[b].conj()).norm();
                if d < best.2 {
                    best = (a, b, d);
                }
            }
        }
        let (a, b, _) = best;
        let (za, zb) = (rest[a], rest[b]);
        pairs.push(ConjugatePair {
            re: 0.5 * (za.re + zb.re),
            im: 0.5 * (za.im.abs() + zb.im.abs()),
        });
        rest.remove(b);
        rest.remove(a);
    }
    (real, pairs)
}

/// Quadratic factor `z^2 + p z + q` stored as `(p, q)`.
type Factor = (f64, f64);

fn pair_factor(c: ConjugatePair) -> Factor {
    (-2.0 * c.re, c.re * c.re + c.im * c.im)
}

fn real_factor(a: f64, b: f64) -> Factor {
    (-(a + b), a * b)
}

fn factor_pair((p, q): Factor) -> ConjugatePair {
    let re = -0.5 * p;
    let disc = q - re * re;
    ConjugatePair {
        re,
        im: disc.max(0.0).sqrt(),
    }
}

fn factor_real((p, q): Factor) -> Option<(f64, f64)> {
    let disc = 0.25 * p * p - q;
    if disc < 0.0 {
        return None;
    }
    let big = -0.5 * p - p.signum() * disc.sqrt();
    if big == 0.0 {
        return Some((0.0, 0.0));
    }
    let small = q / big;
    Some((big.min(small), big.max(small)))
}

fn factor_residual(q: &Quartic, f: &[Factor; 2]) -> Vector4<f64> {
    let ((p1, q1), (p2, q2)) = (f[0], f[1]);
    Vector4::new(
        (p1 + p2 - q.c3) / (q.c3.abs() + p1.abs() + p2.abs()).max(f64::MIN_POSITIVE),
        (q1 + q2 + p1 * p2 - q.c2) / (q.c2.abs() + q1.abs() + q2.abs()).max(f64::MIN_POSITIVE),
        (p1 * q2 + p2 * q1 - q.c1) / (q.c1.abs() + (p1 * q2).abs() + (p2 * q1).abs()).max(f64::MIN_POSITIVE),
        (q1 * q2 - q.c0) / q.c0.abs().max(f64::MIN_POSITIVE),
    )
}

/// Newton iteration on the factorisation into two quadratics. Real parts are
/// read off the linear coefficients, which avoids the absolute-error floor of
/// complex root polishing when `|Re z| << |z|`.
fn refine_factors(q: &Quartic, f: &mut [Factor; 2]) {
    let mut res = factor_residual(q, f).norm();
    for _ in 0..4 {
        if res <= 4.0 * f64::EPSILON {
            break;
        }
        let ((p1, q1), (p2, q2)) = (f[0], f[1]);
        let s3 = (q.c3.abs() + p1.abs() + p2.abs()).max(f64::MIN_POSITIVE);
        let s2 = (q.c2.abs() + q1.abs() + q2.abs()).max(f64::MIN_POSITIVE);
        let s1 = (q.c1.abs() + (p1 * q2).abs() + (p2 * q1).abs()).max(f64::MIN_POSITIVE);
        let s0 = q.c0.abs().max(f64::MIN_POSITIVE);
        let jac = Matrix4::new(
            1.0 / s3, 0.0, 1.0 / s3, 0.0,
            p2 / s2, 1.0 / s2, p1 / s2, 1.0 / s2,
            q2 / s1, p2 / s1, q1 / s1, p1 / s1,
            0.0, q2 / s0, 0.0, q1 / s0,
        );
        let rhs = Vector4::new(
            (p1 + p2 - q.c3) / s3,
            (q1 + q2 + p1 * p2 - q.c2) / s2,
            (p1 * q2 + p2 * q1 - q.c1) / s1,
            (q1 * q2 - q.c0) / s0,
        );
        let Some(step) = jac.lu().solve(&rhs) else { break };
        let cand = [(p1 - step[0], q1 - step[1]), (p2 - step[2], q2 - step[3])];
        let cres = factor_residual(q, &cand).norm();
        if cres.is_finite() && cres < res {
            *f = cand;
            res = cres;
        } else {
            break;
        }
    }
}

/// Discriminant of the quartic and the auxiliary factor `8 c2 - 3 c3^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Discriminant {
    pub value: f64,
    pub auxiliary: f64,
}

pub fn discriminant(p: &ModelParams, r: f64) -> Discriminant {
    let q = Quartic::at(p, r);
    let r2 = r * r;
    Discriminant {
        value: q.discriminant(),
        auxiliary: 8.0 * (p.b * p.b + p.kappa + p.gamma * p.gamma) * r2 - 3.0 * p.delta * p.delta * r2 * r2,
    }
}

/// Regime of the leading-order expansion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Small,
    Large,
}

/// Leading-order root approximations in the small or large frequency zone.
pub fn asymptotic_roots(
    p: &ModelParams,
    dp: &DerivedParams,
    r: f64,
    regime: Regime,
    zones: &ZoneConfig,
) -> Result<RootSet> {
    match regime {
        Regime::Small => {
            if !(r > 0.0 && r <= zones.eps0) {
                return Err(LabError::Unsupported(format!(
                    "small-frequency expansion needs 0 < r <= {}, got {r}",
                    zones.eps0
                )));
            }
            let slow = ConjugatePair {
                re: -dp.c2 * r * r,
                im: dp.nu2 * r,
            };
            let fast = ConjugatePair {
                re: -dp.c1 * r * r,
                im: dp.nu1 * r,
            };
            let zone = if p.delta == 0.0 {
                Zone::TwoImaginaryPairs {
                    slow: slow.im,
                    fast: fast.im,
                }
            } else {
                Zone::TwoConjugatePairs { slow, fast }
            };
            Ok(RootSet {
                r,
                roots: [
                    Complex64::new(slow.re, slow.im),
                    Complex64::new(slow.re, -slow.im),
                    Complex64::new(fast.re, fast.im),
                    Complex64::new(fast.re, -fast.im),
                ],
                zone,
            })
        }
        Regime::Large => {
            if p.delta == 0.0 {
                return Err(LabError::Unsupported(
                    "large-frequency expansion requires delta > 0".into(),
                ));
            }
            if !(r >= zones.n0 && r.is_finite()) {
                return Err(LabError::Unsupported(format!(
                    "large-frequency expansion needs r >= {}, got {r}",
                    zones.n0
                )));
            }
            let first = -p.delta * r * r;
            let second = -p.kappa / p.delta;
            let pair = ConjugatePair {
                re: -p.gamma * p.gamma / (2.0 * p.delta),
                im: p.b * r,
            };
            Ok(RootSet {
                r,
                roots: [
                    Complex64::new(first, 0.0),
                    Complex64::new(second, 0.0),
                    Complex64::new(pair.re, pair.im),
                    Complex64::new(pair.re, -pair.im),
                ],
                zone: Zone::TwoRealOnePair {
                    first,
                    second,
                    pair,
                },
            })
        }
    }
}
