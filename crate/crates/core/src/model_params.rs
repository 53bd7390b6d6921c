//! Physical constants of the coupled system and the closed-form constants
//! derived from them.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Relative tolerance used when checking algebraic identities between the
/// derived constants.
pub const INVARIANT_RTOL: f64 = 1e-10;

/// Physical constants: wave speed `b`, thermal parameter `kappa`, coupling
/// `gamma` and dissipation `delta` (`delta == 0` selects the type II model).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub b: f64,
    pub kappa: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl ModelParams {
    pub fn new(b: f64, kappa: f64, gamma: f64, delta: f64) -> Result<Self> {
        let p = Self {
            b,
            kappa,
            gamma,
            delta,
        };
        p.validate()?;
        Ok(p)
    }

    /// `b = kappa = gamma = delta = 1`.
    pub fn unit() -> Self {
        Self {
            b: 1.0,
            kappa: 1.0,
            gamma: 1.0,
            delta: 1.0,
        }
    }

    pub fn with_delta(self, delta: f64) -> Self {
        Self { delta, ..self }
    }

    pub fn is_type_two(&self) -> bool {
        self.delta == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name: &'static str, reason: &str| {
            Err(LabError::InvalidParameter {
                name,
                reason: reason.to_string(),
            })
        };
        if !self.b.is_finite() || self.b <= 0.0 {
            return bad("b", &format!("must be finite and > 0, got {}", self.b));
        }
        if !self.kappa.is_finite() || self.kappa <= 0.0 {
            return bad(
                "kappa",
                &format!("must be finite and > 0, got {}", self.kappa),
            );
        }
        if !self.gamma.is_finite() || self.gamma == 0.0 {
            return bad(
                "gamma",
                &format!("must be finite and != 0, got {}", self.gamma),
            );
        }
        if !self.delta.is_finite() || self.delta < 0.0 {
            return bad(
                "delta",
                &format!("must be finite and >= 0, got {}", self.delta),
            );
        }
        Ok(())
    }

    pub fn derive(&self) -> Result<DerivedParams> {
        derive(self)
    }
}

/// Constants derived from [`ModelParams`]: the `alpha` combinations, the two
/// propagation speeds (`nu1 > nu2`) and the two diffusion coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedParams {
    pub alpha0: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub nu1: f64,
    pub nu2: f64,
    pub c1: f64,
    pub c2: f64,
}

impl DerivedParams {
    /// True when `alpha0 == 0` (up to rounding), where both diffusion
    /// coefficients coincide and the double-wave lower bounds lose their
    /// hypothesis `c1 != c2`.
    pub fn equal_diffusion(&self) -> bool {
        self.alpha0.abs() <= 1e-12 * self.alpha1
    }

    /// Checks every algebraic identity tying the derived constants to the
    /// physical ones; returns the name of the first violated identity.
    pub fn check_invariants(&self, p: &ModelParams) -> std::result::Result<(), String> {
        let close = |a: f64, b: f64| (a - b).abs() <= INVARIANT_RTOL * a.abs().max(b.abs());
        let b2 = p.b * p.b;
        if !(self.alpha2 > 0.0) {
            return Err("alpha2 > 0".into());
        }
        if !close(
            self.alpha2 * self.alpha2,
            self.alpha1 * self.alpha1 - 4.0 * b2 * p.kappa,
        ) && !close(
            self.alpha2 * self.alpha2,
            alpha2_squared(p.b, p.kappa, p.gamma),
        ) {
            return Err("alpha2^2 = alpha1^2 - 4 b^2 kappa".into());
        }
        if !close(
            self.nu1 * self.nu1 + self.nu2 * self.nu2,
            b2 + p.kappa + p.gamma * p.gamma,
        ) {
            return Err("nu1^2 + nu2^2 = b^2 + kappa + gamma^2".into());
        }
        if !close(self.nu1 * self.nu1 * self.nu2 * self.nu2, b2 * p.kappa) {
            return Err("nu1^2 nu2^2 = b^2 kappa".into());
        }
        if !(self.nu1 > self.nu2 && self.nu2 > 0.0) {
            return Err("nu1 > nu2 > 0".into());
        }
        if !close(self.c1 + self.c2, p.delta / 2.0) && !(p.delta == 0.0 && self.c1 == 0.0 && self.c2 == 0.0) {
            return Err("c1 + c2 = delta / 2".into());
        }
        if p.delta > 0.0 && !(self.c1 > 0.0 && self.c2 > 0.0) {
            return Err("c1, c2 > 0 when delta > 0".into());
        }
        if p.delta == 0.0 && (self.c1 != 0.0 || self.c2 != 0.0) {
            return Err("c1 = c2 = 0 when delta = 0".into());
        }
        Ok(())
    }
}

/// `alpha1^2 - 4 b^2 kappa` written as a sum of non-negative terms.
fn alpha2_squared(b: f64, kappa: f64, gamma: f64) -> f64 {
    let b2 = b * b;
    let g2 = gamma * gamma;
    (b2 - kappa).powi(2) + g2 * (g2 + 2.0 * b2 + 2.0 * kappa)
}

pub fn derive(p: &ModelParams) -> Result<DerivedParams> {
    p.validate()?;
    let b2 = p.b * p.b;
    let g2 = p.gamma * p.gamma;
    let alpha0 = b2 - p.kappa - g2;
    let alpha1 = b2 + p.kappa + g2;
    let alpha2 = alpha2_squared(p.b, p.kappa, p.gamma).sqrt();
    let nu1 = ((alpha1 + alpha2) / 2.0).sqrt();
    let nu2 = p.b * p.kappa.sqrt() / nu1;
    // alpha2^2 - alpha0^2 = 4 b^2 gamma^2, so both differences stay positive.
    let gap = 4.0 * b2 * g2;
    let (minus, plus) = if alpha0 >= 0.0 {
        (gap / (alpha2 + alpha0), alpha2 + alpha0)
    } else {
        (alpha2 - alpha0, gap / (alpha2 - alpha0))
    };
    let c1 = p.delta / 4.0 * (minus / alpha2);
    let c2 = p.delta / 4.0 * (plus / alpha2);
    Ok(DerivedParams {
        alpha0,
        alpha1,
        alpha2,
        nu1,
        nu2,
        c1,
        c2,
    })
}

/// Which lower-bound hypotheses hold for a parameter set in dimension `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ThresholdFlags {
    pub n: usize,
    /// `alpha1 < 3 alpha2`, required in four dimensions.
    pub displacement: bool,
    /// `(a0-a2)^2 (a1-a2) > 2 (a0+a2)^2 (a1+a2)`.
    pub temperature_first: bool,
    /// `(a0+a2)^2 (a1+a2) > 2 (a0-a2)^2 (a1-a2)`.
    pub temperature_second: bool,
    /// Either temperature inequality, required in two dimensions.
    pub temperature: bool,
    pub equal_diffusion: bool,
}

pub fn threshold_flags(dp: &DerivedParams, n: usize) -> ThresholdFlags {
    let (a0, a1, a2) = (dp.alpha0, dp.alpha1, dp.alpha2);
    let lhs = (a0 - a2).powi(2) * (a1 - a2);
    let rhs = (a0 + a2).powi(2) * (a1 + a2);
    let first = lhs > 2.0 * rhs;
    let second = rhs > 2.0 * lhs;
    ThresholdFlags {
        n,
        displacement: if n == 4 { a1 < 3.0 * a2 } else { true },
        temperature_first: first,
        temperature_second: second,
        temperature: if n == 2 { first || second } else { true },
        equal_diffusion: dp.equal_diffusion(),
    }
}
