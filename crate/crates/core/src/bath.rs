//! Thermal graviton correlation kernels after the angular average.
//!
//! In the long-wavelength limit the kernels reduce to local weights times the
//! averaged polarization projector: `A = (k_B T/2πc²) Λ δ(t−t')` at high
//! temperature and `C = i(ħ/2πc²) Λ ∂_t δ(t−t')`. The raw mode integral is
//! UV divergent at equal times, so [`thermal_kernel_moments`] regularizes it
//! with `e^{−ω/Λ_uv}` and returns the cutoff-insensitive time moments.

use core::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::params::PhysicalParams;
use crate::quadrature::gauss_legendre;

/// Weight of `δ(t−t')` in the high-temperature noise kernel, `k_B T/(2πc²)`.
pub fn kernel_a_coefficient(params: &PhysicalParams) -> Result<f64> {
    let beta = params.beta().ok_or(Error::ZeroTemperature)?;
    let hbar = params.hbar();
    let c = params.c();
    Ok(hbar / (2.0 * PI * c * c) / (beta * hbar))
}

/// Weight of `∂_t δ(t−t')` in the dissipation kernel, `ħ/(2πc²)`.
pub fn kernel_c_coefficient(params: &PhysicalParams) -> f64 {
    params.hbar() / (2.0 * PI * params.c() * params.c())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub params: PhysicalParams,
    /// Exponential UV cutoff frequency.
    pub uv_cutoff: f64,
    /// Gauss–Legendre points for the frequency integral.
    pub quad_points: usize,
    /// Replace `coth(βħω/2)` by its classical limit `2/(βħω)`.
    pub classical_limit: bool,
}

impl KernelSpec {
    pub const MIN_QUAD_POINTS: usize = 64;

    pub fn new(params: PhysicalParams, uv_cutoff: f64) -> Self {
        KernelSpec {
            params,
            uv_cutoff,
            quad_points: 128,
            classical_limit: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.uv_cutoff > 0.0 && self.uv_cutoff.is_finite()) {
            return Err(invalid("uv_cutoff", "must be positive and finite"));
        }
        if self.quad_points < Self::MIN_QUAD_POINTS {
            return Err(invalid("quad_points", "must be at least 64"));
        }
        if self.params.beta().is_none() {
            return Err(Error::ZeroTemperature);
        }
        Ok(())
    }
}

/// Zeroth and second time moments of the symmetric noise kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelMoments {
    /// `∫ a(τ) dτ`, the weight of `δ(τ)`.
    pub m0: f64,
    /// `∫ τ² a_q(τ) dτ` of the quantum part `a − a_classical`; twice the
    /// weight of `δ̈(τ)`.
    pub m2: f64,
}

impl KernelMoments {
    pub fn ratio(&self) -> f64 {
        self.m2 / self.m0
    }
}

/// Time window, in units of the slowest kernel scale, over which moments are
/// taken. The window correction to `m0` is `≈ 0.8/WINDOW`.
const WINDOW: f64 = 400.0;
const U_MAX: f64 = 12.0;

/// `y coth(y) − 1`, stable for small `y`.
fn y_coth_y_minus_one(y: f64) -> f64 {
    if y.abs() < 0.05 {
        let y2 = y * y;
        // y²/3 − y⁴/45 + 2y⁶/945 − y⁸/4725
        y2 * (1.0 / 3.0 + y2 * (-1.0 / 45.0 + y2 * (2.0 / 945.0 - y2 / 4725.0)))
    } else {
        y / libm::tanh(y) - 1.0
    }
}

/// Moments of `a(τ) = N ∫₀^∞ dω ω coth(βħω/2) e^{−ω/Λ} cos ωτ`.
///
/// `N = ħ/(4π²c²)` pins `m0` to [`kernel_a_coefficient`] in the
/// high-temperature limit. Moments are taken against a Gaussian time window
/// `e^{−τ²/2σ²}` much wider than both `1/Λ` and `βħ`, which turns them into
/// smooth frequency integrals:
///
/// * `m0 = N√(2π) ∫ S(u/σ) e^{−u²/2} du`
/// * `m2 = N√(2π) σ² ∫ S_q(u/σ) (1 − u²) e^{−u²/2} du`
///
/// where `S` is the regularized spectral density and `S_q` its part beyond the
/// classical `2/(βħ)` plateau. The classical part carries the cutoff's own
/// broadening, which would otherwise swamp the `βħ`-scale second moment.
pub fn thermal_kernel_moments(spec: &KernelSpec) -> Result<KernelMoments> {
    spec.validate()?;
    let coarse = window_moments(spec, spec.quad_points);
    let fine = window_moments(spec, 2 * spec.quad_points);
    let change = |a: f64, b: f64| {
        if b == 0.0 {
            a.abs()
        } else {
            ((a - b) / b).abs()
        }
    };
    let worst = change(coarse.m0, fine.m0).max(if fine.m2 == 0.0 && coarse.m2 == 0.0 {
        0.0
    } else {
        change(coarse.m2, fine.m2)
    });
    if !(worst <= 1e-9) {
        return Err(Error::NonConvergent {
            what: "thermal kernel moments",
            change: worst,
        });
    }
    Ok(fine)
}

fn window_moments(spec: &KernelSpec, points: usize) -> KernelMoments {
    let p = &spec.params;
    let hbar = p.hbar();
    let c = p.c();
    let beta = p.beta().unwrap_or(f64::INFINITY);
    let half_bh = 0.5 * beta * hbar;
    let norm = hbar / (4.0 * PI * PI * c * c);
    let sigma = WINDOW * (1.0 / spec.uv_cutoff).max(beta * hbar);

    let (nodes, weights) = gauss_legendre(points);
    let half = 0.5 * U_MAX;
    let mut m0 = 0.0;
    let mut m2 = 0.0;
    for (x, wq) in nodes.iter().zip(&weights) {
        let u = half * (x + 1.0);
        let wu = half * wq * libm::exp(-0.5 * u * u);
        let omega = u / sigma;
        let cutoff = libm::exp(-omega / spec.uv_cutoff);
        let plateau = 1.0 / half_bh;
        let quantum = if spec.classical_limit {
            0.0
        } else {
            plateau * y_coth_y_minus_one(half_bh * omega)
        };
        m0 += wu * (plateau + quantum) * cutoff;
        m2 += wu * quantum * cutoff * (1.0 - u * u);
    }
    let root = libm::sqrt(2.0 * PI);
    KernelMoments {
        m0: norm * root * m0,
        m2: norm * root * sigma * sigma * m2,
    }
}
