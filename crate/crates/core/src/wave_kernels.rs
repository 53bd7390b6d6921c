//! Double diffusion-wave kernels as radial factors.
//!
//! Every kernel is a function of `r = |xi|` times an angular tag. Vector
//! kernels point along `i xi / |xi|`; their radial factor already contains
//! the `1 / r` of `|i xi / |xi|^2|`.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::model_params::DerivedParams;
use crate::registry::Registry;
use crate::spectral_solution::{cos_difference, sinc, sinc_difference};

/// Below this value of `max(beta_j r t)` equal-amplitude kernels use the
/// compensated form.
pub const SERIES_THRESHOLD: f64 = 1e-3;

/// `(l1 sin(beta1 r t)/(beta1 r) e^{-c1 r^2 t} - l2 sin(beta2 r t)/(beta2 r) e^{-c2 r^2 t}) r^{-sigma}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoubleKernelSpec {
    pub l1: f64,
    pub l2: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub c1: f64,
    pub c2: f64,
    pub sigma: u32,
}

impl DoubleKernelSpec {
    pub fn new(l1: f64, l2: f64, beta1: f64, beta2: f64, c1: f64, c2: f64, sigma: u32) -> Result<Self> {
        let s = Self { l1, l2, beta1, beta2, c1, c2, sigma };
        s.validate()?;
        Ok(s)
    }

    /// Single diffusion wave `sin(beta r t)/(beta r) e^{-c r^2 t}`.
    pub fn single(beta: f64, c: f64) -> Self {
        Self { l1: 1.0, l2: 0.0, beta1: beta, beta2: beta, c1: c, c2: c, sigma: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(LabError::InvalidParameter { name, reason: format!("must be finite and > 0, got {v}") });
            }
        }
        for (name, v) in [("c1", self.c1), ("c2", self.c2)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(LabError::InvalidParameter { name, reason: format!("must be finite and >= 0, got {v}") });
            }
        }
        for (name, v) in [("l1", self.l1), ("l2", self.l2)] {
            if !v.is_finite() {
                return Err(LabError::InvalidParameter { name, reason: format!("must be finite, got {v}") });
            }
        }
        Ok(())
    }

    /// Swaps the roles of the two waves.
    pub fn swapped(&self) -> Self {
        Self { l1: self.l2, l2: self.l1, beta1: self.beta2, beta2: self.beta1, c1: self.c2, c2: self.c1, sigma: self.sigma }
    }

    pub fn equal_amplitudes(&self) -> bool {
        self.l1 == self.l2
    }

    /// Largest oscillation frequency in `r` at time `t`.
    pub fn oscillation(&self, t: f64) -> f64 {
        self.beta1.max(self.beta2) * t
    }

    pub fn without_diffusion(&self) -> Self {
        Self { c1: 0.0, c2: 0.0, ..*self }
    }

    pub fn with_sigma(&self, sigma: u32) -> Self {
        Self { sigma, ..*self }
    }
}

/// `l1 S1 e1 - l2 S2 e2` (no `r^{-sigma}`), evaluated term by term.
pub fn double_kernel_direct(s: &DoubleKernelSpec, t: f64, r: f64) -> f64 {
    let r2t = r * r * t;
    s.l1 * t * sinc(s.beta1 * r * t) * (-s.c1 * r2t).exp() - s.l2 * t * sinc(s.beta2 * r * t) * (-s.c2 * r2t).exp()
}

/// `l (S1 e1 - S2 e2)` for `l1 = l2 = l` written as
/// `l t [sinc(a) e2 expm1((c2 - c1) r^2 t) + (sinc a - sinc b) e2]`.
pub fn double_kernel_compensated(s: &DoubleKernelSpec, t: f64, r: f64) -> f64 {
    let (a, b) = (s.beta1 * r * t, s.beta2 * r * t);
    let r2t = r * r * t;
    let e2 = (-s.c2 * r2t).exp();
    s.l1 * t * e2 * (sinc(a) * ((s.c2 - s.c1) * r2t).exp_m1() + sinc_difference(a, b))
}

/// Radial value without the `r^{-sigma}` factor.
pub fn double_kernel_core(s: &DoubleKernelSpec, t: f64, r: f64) -> f64 {
    if s.equal_amplitudes() && s.oscillation(t) * r < SERIES_THRESHOLD {
        double_kernel_compensated(s, t, r)
    } else {
        double_kernel_direct(s, t, r)
    }
}

/// Full double kernel including `r^{-sigma}`; `r = 0` returns the limit.
pub fn double_kernel(s: &DoubleKernelSpec, t: f64, r: f64) -> f64 {
    if r == 0.0 {
        return double_kernel_at_origin(s, t);
    }
    double_kernel_core(s, t, r) * r.powi(-(s.sigma as i32))
}

/// `r -> 0+` limit, signed infinity where it diverges.
pub fn double_kernel_at_origin(s: &DoubleKernelSpec, t: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    let lead = (s.l1 - s.l2) * t;
    if s.sigma == 0 {
        return lead;
    }
    if lead != 0.0 {
        return lead.signum() * f64::INFINITY;
    }
    // l1 = l2 = l: core ~ l t r^2 ((c2 - c1) t + (beta2^2 - beta1^2) t^2 / 6)
    let second = s.l1 * t * ((s.c2 - s.c1) * t + (s.beta2 * s.beta2 - s.beta1 * s.beta1) * t * t / 6.0);
    match s.sigma {
        1 => 0.0,
        2 => second,
        _ if second == 0.0 => 0.0,
        _ => second.signum() * f64::INFINITY,
    }
}

/// Angular structure of a kernel symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Angular {
    Scalar,
    /// Directed along `i xi / |xi|^2`.
    Vector,
}

/// Kernel identifiers; `M` carries an explicit double-kernel spec.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum KernelId {
    G0,
    G1,
    G2,
    G3,
    G4,
    M(DoubleKernelSpec),
}

impl KernelId {
    pub fn angular(&self) -> Angular {
        match self {
            KernelId::G1 | KernelId::G3 => Angular::Vector,
            _ => Angular::Scalar,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            KernelId::G0 => "G0",
            KernelId::G1 => "G1",
            KernelId::G2 => "G2",
            KernelId::G3 => "G3",
            KernelId::G4 => "G4",
            KernelId::M(_) => "M",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name.to_ascii_uppercase().as_str() {
            "G0" => Ok(KernelId::G0),
            "G1" => Ok(KernelId::G1),
            "G2" => Ok(KernelId::G2),
            "G3" => Ok(KernelId::G3),
            "G4" => Ok(KernelId::G4),
            _ => Err(LabError::UnknownName {
                kind: "kernel",
                name: name.to_string(),
                known: "G0, G1, G2, G3, G4".to_string(),
            }),
        }
    }

    /// `(prefactor, spec)` with radial factor `prefactor * double_kernel(spec)`;
    /// `None` for the cosine kernel.
    pub fn double_form(&self, dp: &DerivedParams, gamma: f64) -> Option<(f64, DoubleKernelSpec)> {
        let (a0, a2) = (dp.alpha0, dp.alpha2);
        let wave = DoubleKernelSpec { l1: 1.0, l2: 1.0, beta1: dp.nu1, beta2: dp.nu2, c1: dp.c1, c2: dp.c2, sigma: 1 };
        let heat = DoubleKernelSpec { l1: (a2 - a0) / (2.0 * a2), l2: -(a0 + a2) / (2.0 * a2), sigma: 0, ..wave };
        match self {
            KernelId::G0 => None,
            KernelId::G1 => Some((gamma / a2, wave)),
            KernelId::G2 => Some((1.0, heat)),
            KernelId::G3 => Some((gamma / a2, wave.without_diffusion())),
            KernelId::G4 => Some((1.0, heat.without_diffusion())),
            KernelId::M(s) => Some((1.0, *s)),
        }
    }
}

/// `(cos(nu1 r t) e1 - cos(nu2 r t) e2) / r` without cancellation near `r = 0`.
pub fn cosine_kernel(dp: &DerivedParams, t: f64, r: f64) -> f64 {
    if r == 0.0 {
        return 0.0;
    }
    let (x1, x2) = (dp.nu1 * r * t, dp.nu2 * r * t);
    let r2t = r * r * t;
    let e1 = (-dp.c1 * r2t).exp();
    let e2 = (-dp.c2 * r2t).exp();
    (cos_difference(x1, x2) * e1 + x2.cos() * e2 * ((dp.c2 - dp.c1) * r2t).exp_m1()) / r
}

/// Signed radial factor of the kernel symbol.
pub fn kernel_radial(id: &KernelId, dp: &DerivedParams, gamma: f64, t: f64, r: f64) -> f64 {
    match id.double_form(dp, gamma) {
        None => cosine_kernel(dp, t, r),
        Some((pre, spec)) => pre * double_kernel(&spec, t, r),
    }
}

/// Radial kernel strategy selected by name.
pub trait RadialKernel: Send + Sync {
    fn id(&self) -> KernelId;
    fn eval(&self, dp: &DerivedParams, gamma: f64, t: f64, r: f64) -> f64 {
        kernel_radial(&self.id(), dp, gamma, t, r)
    }
}

struct Fixed(KernelId);

impl RadialKernel for Fixed {
    fn id(&self) -> KernelId {
        self.0
    }
}

/// Registry of the named kernels `G0`..`G4`.
pub fn kernels() -> Registry<dyn RadialKernel> {
    let mut reg: Registry<dyn RadialKernel> = Registry::new("kernel");
    for id in [KernelId::G0, KernelId::G1, KernelId::G2, KernelId::G3, KernelId::G4] {
        reg.register(id.label(), Box::new(Fixed(id)));
    }
    reg
}

/// Asymptotic profiles driven by the mean of the initial temperature rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Profile {
    Phi,
    Psi,
    PhiTilde,
    PsiTilde,
}

impl Profile {
    pub fn kernel(&self) -> KernelId {
        match self {
            Profile::Phi => KernelId::G1,
            Profile::Psi => KernelId::G2,
            Profile::PhiTilde => KernelId::G3,
            Profile::PsiTilde => KernelId::G4,
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "phi" => Ok(Profile::Phi),
            "psi" => Ok(Profile::Psi),
            "phi_tilde" => Ok(Profile::PhiTilde),
            "psi_tilde" => Ok(Profile::PsiTilde),
            _ => Err(LabError::UnknownName {
                kind: "profile",
                name: name.to_string(),
                known: "phi, psi, phi_tilde, psi_tilde".to_string(),
            }),
        }
    }
}

pub fn profile_amplitude(profile: Profile, dp: &DerivedParams, gamma: f64, mean_theta1: f64, t: f64, r: f64) -> f64 {
    if mean_theta1 == 0.0 {
        return 0.0;
    }
    kernel_radial(&profile.kernel(), dp, gamma, t, r) * mean_theta1
}
