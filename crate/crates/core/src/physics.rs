//! Physical constants, photon-flux/power equivalence and shared numeric
//! primitives.
//!
//! Everything downstream of the link budget is expressed in terms of mean
//! photon numbers per clock cycle, while hardware is specified in watts and
//! decibels. This module owns the conversions:
//!
//! - photon flux ↔ optical power: `P = μ · f_clock · h·c/λ`,
//! - decibel ↔ linear factors: `x = 10^(dB/10)`,
//! - the binary entropy `H2(p)` used by the secret-key-rate formula.
//!
//! Constants are the exact CODATA 2018 defined values so that reference
//! figures (e.g. 128 pW for μ=1 at 1 GHz, 1550 nm) reproduce bit-for-bit
//! across builds.

use crate::error::{Error, Result};

/// Planck constant in J·s (CODATA 2018, exact by definition).
pub const PLANCK_CONSTANT_J_S: f64 = 6.626_070_15e-34;

/// Speed of light in vacuum in m/s (CODATA 2018, exact by definition).
pub const SPEED_OF_LIGHT_M_S: f64 = 299_792_458.0;

// ---------------------------------------------------------------------------
// Photon flux
// ---------------------------------------------------------------------------

/// A pulsed single-photon-level source described by its mean photon number
/// per pulse, repetition rate and vacuum wavelength.
///
/// The equivalent continuous optical power of such a source is
/// `μ · f_clock · h·c/λ`; a weak coherent source attenuated to that power
/// emits on average `μ` photons per clock cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotonFluxSpec {
    /// Mean photon number per pulse (dimensionless, ≥ 0).
    pub mu: f64,
    /// Pulse repetition rate in Hz (> 0).
    pub clock_rate_hz: f64,
    /// Vacuum wavelength in metres (> 0).
    pub wavelength_m: f64,
}

impl PhotonFluxSpec {
    /// Creates a validated flux specification.
    pub fn new(mu: f64, clock_rate_hz: f64, wavelength_m: f64) -> Result<Self> {
        let spec = PhotonFluxSpec {
            mu,
            clock_rate_hz,
            wavelength_m,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Checks the field invariants.
    pub fn validate(&self) -> Result<()> {
        if !self.mu.is_finite() || self.mu < 0.0 {
            return Err(Error::domain(format!(
                "mean photon number must be finite and ≥ 0, got {}",
                self.mu
            )));
        }
        if !self.clock_rate_hz.is_finite() || self.clock_rate_hz <= 0.0 {
            return Err(Error::domain(format!(
                "clock rate must be finite and > 0, got {} Hz",
                self.clock_rate_hz
            )));
        }
        if !self.wavelength_m.is_finite() || self.wavelength_m <= 0.0 {
            return Err(Error::domain(format!(
                "wavelength must be finite and > 0, got {} m",
                self.wavelength_m
            )));
        }
        Ok(())
    }

    /// Energy of one photon at `wavelength_m`, in joules: `h·c/λ`.
    pub fn photon_energy_j(&self) -> f64 {
        PLANCK_CONSTANT_J_S * SPEED_OF_LIGHT_M_S / self.wavelength_m
    }
}

/// Equivalent optical power in watts of a pulsed source:
/// `P = μ · f_clock · h·c/λ`.
///
/// A mean photon number of exactly 1 at 1 GHz and 1550 nm corresponds to
/// ≈ 128 pW, the usual anchor for attenuator calibration.
pub fn power_for_flux(spec: &PhotonFluxSpec) -> Result<f64> {
    spec.validate()?;
    Ok(spec.mu * spec.clock_rate_hz * spec.photon_energy_j())
}

/// Mean photon number per pulse carried by `power_w` at the given clock rate
/// and wavelength. Exact inverse of [`power_for_flux`].
pub fn flux_for_power(power_w: f64, clock_rate_hz: f64, wavelength_m: f64) -> Result<f64> {
    if !power_w.is_finite() || power_w < 0.0 {
        return Err(Error::domain(format!(
            "optical power must be finite and ≥ 0, got {power_w} W"
        )));
    }
    // Validate rate/wavelength through a unit-flux spec.
    let unit = PhotonFluxSpec::new(1.0, clock_rate_hz, wavelength_m)?;
    Ok(power_w / (clock_rate_hz * unit.photon_energy_j()))
}

// ---------------------------------------------------------------------------
// Decibels
// ---------------------------------------------------------------------------

/// A power ratio (attenuation, gain or loss) expressed in decibels.
///
/// Positive values denote loss throughout this crate: a channel with
/// `Decibel(38.08)` transmits `10^(−38.08/10)` of the launched power.
/// Composition of cascaded elements is addition of dB values.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Decibel(pub f64);

impl Decibel {
    /// The dB value itself.
    pub fn value(&self) -> f64 {
        self.0
    }

    /// Linear power factor `10^(dB/10)`.
    ///
    /// Note this maps a *ratio* expressed in dB; for a loss of `x` dB use
    /// `Decibel(-x).to_linear()` or equivalently `1 / Decibel(x).to_linear()`.
    pub fn to_linear(&self) -> f64 {
        10f64.powf(self.0 / 10.0)
    }

    /// Builds a dB value from a linear power factor (> 0).
    pub fn from_linear(factor: f64) -> Result<Self> {
        if !factor.is_finite() || factor <= 0.0 {
            return Err(Error::domain(format!(
                "linear factor must be finite and > 0, got {factor}"
            )));
        }
        Ok(Decibel(10.0 * factor.log10()))
    }
}

impl std::ops::Add for Decibel {
    type Output = Decibel;

    /// Cascading two elements multiplies linear factors, i.e. adds dB.
    fn add(self, rhs: Decibel) -> Decibel {
        Decibel(self.0 + rhs.0)
    }
}

// ---------------------------------------------------------------------------
// Binary entropy
// ---------------------------------------------------------------------------

/// Binary entropy `H2(p) = −p·log2(p) − (1−p)·log2(1−p)` in bits.
///
/// The endpoints use the continuity convention `H2(0) = H2(1) = 0` so the
/// secret-key-rate formula stays finite at zero error.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !p.is_finite() || !(0.0..=1.0).contains(&p) {
        return Err(Error::domain(format!(
            "binary entropy argument must lie in [0, 1], got {p}"
        )));
    }
    if p == 0.0 || p == 1.0 {
        return Ok(0.0);
    }
    Ok(-p * p.log2() - (1.0 - p) * (1.0 - p).log2())
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
