use alloc::string::String;

/// Errors produced by the simulation kernels.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("direction vector is not normalized (|k| = {norm})")]
    NotUnitVector { norm: f64 },
    #[error("direction vector is degenerate (zero length)")]
    DegenerateDirection,
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("sphere quadrature of degree {degree} cannot integrate degree-{required} integrands exactly")]
    QuadratureTooCoarse { degree: usize, required: usize },
    #[error("quadrature for {what} did not converge (relative change {change:e})")]
    NonConvergent { what: &'static str, change: f64 },
    #[error("high-temperature quantity requested at T = 0")]
    ZeroTemperature,
    #[error("operators live on different Fock bases (ncut {left} vs {right})")]
    BasisMismatch { left: usize, right: usize },
    #[error("Fock truncation ncut = {ncut} is below the minimum of 2")]
    TruncationTooSmall { ncut: usize },
    #[error("occupation ({0}, {1}, {2}) is not part of the truncated basis")]
    UnknownState(u32, u32, u32),
    #[error("density matrix check failed: {0}")]
    InvalidDensityMatrix(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("trace drifted by {drift:e} at t = {t} (step size too large?)")]
    TraceDrift { t: f64, drift: f64 },
    #[error("state became non-finite at t = {t}")]
    NonFinite { t: f64 },
    #[error("speed {speed} exceeds the non-relativistic guard {limit} at t = {t}")]
    SpeedGuard { t: f64, speed: f64, limit: f64 },
    #[error("order-reduced damping needs the potential Hessian")]
    MissingHessian,
    #[error("series of length {len} is too short (need at least {need})")]
    TooShort { len: usize, need: usize },
    #[error("trajectory is not uniformly sampled near t = {t}")]
    NonUniformSampling { t: f64 },
    #[error("implicit velocity solve did not converge at t = {t}")]
    VelocitySolve { t: f64 },
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: &str) -> Error {
    Error::InvalidParameter {
        name,
        reason: String::from(reason),
    }
}
