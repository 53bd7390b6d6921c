use thiserror::Error;

/// Errors raised by the laboratory.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("root refinement failed at r = {r}: residual {residual:e} exceeds {tolerance:e}")]
    RootFailure {
        r: f64,
        residual: f64,
        tolerance: f64,
    },

    #[error("near-degenerate roots at r = {r}: relative gap {gap:e}")]
    NearDegenerateRoots { r: f64, gap: f64 },

    #[error("unsupported request: {0}")]
    Unsupported(String),

    #[error("integral diverges: {0}")]
    Divergent(String),

    #[error("quadrature hit the cap of {cap} panels (estimated error {error:e}, target {target:e})")]
    PanelCap { cap: usize, error: f64, target: f64 },

    #[error("non-finite integrand value at r = {r}")]
    NonFinite { r: f64 },

    #[error("invalid window [{lo}, {hi}]: {reason}")]
    InvalidWindow { lo: f64, hi: f64, reason: String },

    #[error("invalid series: {0}")]
    InvalidSeries(String),

    #[error("unknown {kind} `{name}` (known: {known})")]
    UnknownName {
        kind: &'static str,
        name: String,
        known: String,
    },
}

pub type Result<T> = std::result::Result<T, LabError>;
