//! Feasibility workbench for quantum communication over long lossy fibre
//! links.
//!
//! The library models a point-to-point fibre channel of a few hundred
//! kilometres carrying single-photon-level signals, and provides the
//! analysis tooling needed to judge whether quantum key distribution and
//! related quantum-communication experiments are feasible over it:
//!
//! - [`physics`] — constants, photon-flux/power equivalence, binary entropy
//!   and decibel conversions shared by every other module.
//! - [`channel`] — link budget (attenuation + insertion losses), a
//!   phenomenological stray-photon background spectrum with band filtering,
//!   and chromatic-dispersion pulse broadening.
//! - [`decoy`] — asymptotic decoy-state BB84: gains, QBERs, single-photon
//!   yield/error bounds, secret key rates, distance sweeps, flux ranking,
//!   and a Monte Carlo pulse-level oracle.
//! - [`phase`] — interferometric phase extraction from complementary
//!   detector traces, Welch-style PSD estimation, phase-noise synthesis and
//!   spectral tone detection.
//! - [`polarization`] — Stokes-vector state algebra on the Poincaré sphere,
//!   a quantized retarder-stack polarization controller, gradient-descent
//!   alignment, drift simulation and QBER estimation.
//! - [`timetag`] — time-tagged photon-pair simulation, delay histograms,
//!   coincidence windows, accidental statistics and CAR.
//! - [`optim`] — bounded derivative-free (Nelder–Mead) minimization used by
//!   the calibration utilities.
//!
//! All randomized operations take explicit 64-bit seeds and are
//! reproducible bit-for-bit, independent of internal chunking or worker
//! count; see [`rng`] for the substream convention.

pub mod channel;
pub mod decoy;
pub mod error;
pub mod optim;
pub mod phase;
pub mod physics;
pub mod polarization;
pub mod rng;
pub mod timetag;

pub use error::{Error, Result};
