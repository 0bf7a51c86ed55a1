//! Physical constants and the couplings derived from them.
//!
//! All formulas are homogeneous in the unit system, so any consistent choice
//! of `hbar`, `c` and `kb` works. [`Units::natural`] (all three equal to one)
//! is the default; tests only ever depend on the dimensionless ratios
//! `gamma`, `beta*hbar*omega` and `w*t`.

use core::f64::consts::PI;

use crate::error::{invalid, Result};

/// Values of the action quantum, the speed of light and Boltzmann's constant
/// in the caller's unit system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Units {
    pub hbar: f64,
    pub c: f64,
    pub kb: f64,
}

impl Units {
    pub const fn natural() -> Self {
        Units {
            hbar: 1.0,
            c: 1.0,
            kb: 1.0,
        }
    }

    /// CODATA values in SI units.
    pub const fn si() -> Self {
        Units {
            hbar: 1.054_571_817e-34,
            c: 299_792_458.0,
            kb: 1.380_649e-23,
        }
    }
}

impl Default for Units {
    fn default() -> Self {
        Units::natural()
    }
}

/// Mass, bath temperature and gravitational coupling of the particle.
///
/// The coupling enters only through `eps2 = ε²` (for gravity `ε² = 8πG/c³`).
/// `gamma` may be set directly with [`PhysicalParams::with_gamma`], in which
/// case `eps2` is back-computed so the two stay consistent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    mass: f64,
    temperature: f64,
    eps2: f64,
    gamma: f64,
    units: Units,
}

fn check_finite(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(invalid(name, "must be finite"))
    }
}

impl PhysicalParams {
    /// Parameters in natural units (`hbar = c = kb = 1`).
    pub fn new(mass: f64, temperature: f64, eps2: f64) -> Result<Self> {
        Self::with_units(mass, temperature, eps2, Units::natural())
    }

    pub fn with_units(mass: f64, temperature: f64, eps2: f64, units: Units) -> Result<Self> {
        for (name, value) in [
            ("mass", mass),
            ("temperature", temperature),
            ("eps2", eps2),
            ("hbar", units.hbar),
            ("c", units.c),
            ("kb", units.kb),
        ] {
            check_finite(name, value)?;
        }
        if mass <= 0.0 {
            return Err(invalid("mass", "must be positive"));
        }
        if temperature < 0.0 {
            return Err(invalid("temperature", "must be non-negative"));
        }
        if eps2 < 0.0 {
            return Err(invalid("eps2", "must be non-negative"));
        }
        if units.hbar <= 0.0 || units.c <= 0.0 || units.kb <= 0.0 {
            return Err(invalid("units", "hbar, c and kb must be positive"));
        }
        let gamma = eps2 * mass * mass * units.c * units.c / (10.0 * PI * units.hbar);
        Ok(PhysicalParams {
            mass,
            temperature,
            eps2,
            gamma,
            units,
        })
    }

    /// Override the dimensionless damping constant; `eps2` follows.
    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        check_finite("gamma", gamma)?;
        if gamma < 0.0 {
            return Err(invalid("gamma", "must be non-negative"));
        }
        let u = self.units;
        self.gamma = gamma;
        self.eps2 = gamma * 10.0 * PI * u.hbar / (self.mass * self.mass * u.c * u.c);
        Ok(self)
    }

    pub fn with_temperature(mut self, temperature: f64) -> Result<Self> {
        check_finite("temperature", temperature)?;
        if temperature < 0.0 {
            return Err(invalid("temperature", "must be non-negative"));
        }
        self.temperature = temperature;
        Ok(self)
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn eps2(&self) -> f64 {
        self.eps2
    }

    pub fn units(&self) -> Units {
        self.units
    }

    pub fn hbar(&self) -> f64 {
        self.units.hbar
    }

    pub fn c(&self) -> f64 {
        self.units.c
    }

    pub fn kb(&self) -> f64 {
        self.units.kb
    }

    /// `γ = ε² M² c² / (10 π ħ)`, dimensionless.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `w = 2 γ k_B T / ħ`, a frequency.
    pub fn w(&self) -> f64 {
        2.0 * self.gamma * self.units.kb * self.temperature / self.units.hbar
    }

    /// `β = 1/(k_B T)`; `None` at zero temperature.
    pub fn beta(&self) -> Option<f64> {
        if self.temperature > 0.0 {
            Some(1.0 / (self.units.kb * self.temperature))
        } else {
            None
        }
    }

    /// Coefficient `β²ħ²/12` multiplying the `q̇` double commutator.
    /// Zero at `T = 0`, where the diffusion terms are absent altogether.
    pub fn thermal_correction(&self) -> f64 {
        match self.beta() {
            Some(beta) => beta * beta * self.units.hbar * self.units.hbar / 12.0,
            None => 0.0,
        }
    }

    /// `γħ/c⁴`, the only combination of `γ` entering the classical equations.
    pub fn damping_strength(&self) -> f64 {
        let c2 = self.units.c * self.units.c;
        self.gamma * self.units.hbar / (c2 * c2)
    }

    /// `𝓜ħ² = 4wħ²/(3c⁴)`, the white-noise intensity.
    pub fn noise_intensity(&self) -> f64 {
        let c2 = self.units.c * self.units.c;
        4.0 * self.w() * self.units.hbar * self.units.hbar / (3.0 * c2 * c2)
    }
}
