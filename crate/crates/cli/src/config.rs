//! Experiment configuration: strict TOML with named sections mirroring the
//! core parameter types.
//!
//! Parsing is strict — any unknown key anywhere in the file is a hard
//! error, preventing silently ignored misconfiguration. Sections are
//! optional at parse time; each subcommand demands the sections it needs.

use qlink_core::channel::{ChannelParams, DetectorParams, GaussianPeak, StraySpectrum};
use qlink_core::decoy::ProtocolParams;
use qlink_core::phase::PhaseNoiseSpec;
use qlink_core::polarization::{DriftProcess, StepEvent};
use qlink_core::timetag::PairSourceParams;
use qlink_core::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

fn half() -> f64 {
    0.5
}
fn default_ec_efficiency() -> f64 {
    1.16
}
fn default_detector_name() -> String {
    "snspd".to_string()
}
fn default_bin_width_ps() -> u64 {
    qlink_core::timetag::DEFAULT_BIN_WIDTH_PS
}
fn default_range_ps() -> u64 {
    500_000
}
fn default_window_width_ps() -> u64 {
    12_000
}
fn default_side_windows() -> usize {
    8
}
fn default_side_pitch_ps() -> i64 {
    40_000
}
fn default_sample_rate_hz() -> f64 {
    2e6
}
fn one() -> f64 {
    1.0
}
fn default_mean_phase() -> f64 {
    std::f64::consts::FRAC_PI_2
}
fn default_segment_length() -> usize {
    1 << 18
}
fn default_tone_threshold() -> f64 {
    5.0
}
fn default_quantization() -> f64 {
    0.01
}
fn default_tolerance() -> f64 {
    0.05
}
fn default_max_evaluations() -> usize {
    500
}
fn default_trials() -> usize {
    100
}

/// Top-level configuration file.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Seed for randomized commands; may be overridden by `--seed`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Output directory; may be overridden by `--out`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub channel: Option<ChannelSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detector: Option<DetectorSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub receiver: Option<ReceiverSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub protocol: Option<ProtocolSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pair_source: Option<PairSourceSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coincidence: Option<CoincidenceSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phase: Option<PhaseSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drift: Option<DriftSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alignment: Option<AlignmentSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub calibration: Option<CalibrationSection>,
}

/// `[channel]` — fibre parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    pub length_km: f64,
    pub attenuation_db_per_km: f64,
    #[serde(default)]
    pub extra_insertion_loss_db: f64,
    #[serde(default)]
    pub dispersion_ps_per_nm_km: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stray: Option<StraySection>,
}

/// `[channel.stray]` — stray-photon spectrum.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StraySection {
    pub support_nm: (f64, f64),
    pub floor_per_s_per_nm: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub peaks: Vec<StrayPeakSection>,
}

/// One `[[channel.stray.peaks]]` entry.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrayPeakSection {
    pub center_nm: f64,
    pub fwhm_nm: f64,
    pub amplitude_per_s_per_nm: f64,
}

/// `[detector]` — single-photon detector.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSection {
    #[serde(default = "default_detector_name")]
    pub name: String,
    pub efficiency: f64,
    #[serde(default)]
    pub dark_rate_hz: f64,
    #[serde(default)]
    pub jitter_sigma_ps: f64,
}

/// `[receiver]` — lumped receiver optics.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReceiverSection {
    pub efficiency: f64,
}

/// `[protocol]` — decoy-state BB84 parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSection {
    pub mu_signal: f64,
    pub mu_decoy: f64,
    pub clock_rate_hz: f64,
    #[serde(default = "half")]
    pub sifting_factor: f64,
    #[serde(default = "default_ec_efficiency")]
    pub ec_efficiency: f64,
    pub intrinsic_error: f64,
    #[serde(default = "half")]
    pub vacuum_error: f64,
    pub background_yield: f64,
}

/// `[sweep]` — distance-sweep grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub l_min_km: f64,
    pub l_max_km: f64,
    pub step_km: f64,
}

/// `[pair_source]` — photon-pair source and arms.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairSourceSection {
    pub pair_rate_hz: f64,
    pub eta_signal: f64,
    pub eta_idler: f64,
    #[serde(default)]
    pub background_signal_hz: f64,
    #[serde(default)]
    pub background_idler_hz: f64,
    #[serde(default)]
    pub offset_ps: i64,
    #[serde(default)]
    pub broadening_signal_ps: f64,
    #[serde(default)]
    pub broadening_idler_ps: f64,
    #[serde(default)]
    pub jitter_sigma_ps: f64,
}

/// `[coincidence]` — acquisition and CAR-analysis settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoincidenceSection {
    pub duration_s: f64,
    #[serde(default = "default_bin_width_ps")]
    pub bin_width_ps: u64,
    #[serde(default = "default_range_ps")]
    pub range_ps: u64,
    #[serde(default = "default_window_width_ps")]
    pub window_width_ps: u64,
    /// Signal-window centre; defaults to the pair-source offset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window_center_ps: Option<i64>,
    #[serde(default = "default_side_windows")]
    pub side_windows_per_side: usize,
    #[serde(default = "default_side_pitch_ps")]
    pub side_window_pitch_ps: i64,
}

/// `[phase]` — phase-noise synthesis and PSD analysis settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseSection {
    #[serde(default = "default_sample_rate_hz")]
    pub sample_rate_hz: f64,
    pub duration_s: f64,
    #[serde(default = "one")]
    pub visibility: f64,
    #[serde(default = "one")]
    pub mean_power: f64,
    #[serde(default)]
    pub plateau_rad2_per_hz: f64,
    #[serde(default)]
    pub rolloff_exponent: f64,
    #[serde(default)]
    pub corner_low_hz: f64,
    #[serde(default)]
    pub corner_high_hz: f64,
    #[serde(default)]
    pub white_floor_rad2_per_hz: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tones: Vec<(f64, f64)>,
    #[serde(default = "default_mean_phase")]
    pub mean_phase_rad: f64,
    #[serde(default = "default_segment_length")]
    pub segment_length: usize,
    /// Segment overlap in samples; defaults to half the segment.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub overlap: Option<usize>,
    #[serde(default = "default_tone_threshold")]
    pub tone_threshold: f64,
    /// Roll-off fit band `[f_lo, f_hi]` in Hz; fit skipped when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rolloff_fit_band_hz: Option<(f64, f64)>,
    /// Write the synthesized interferometer trace CSV (large files).
    #[serde(default)]
    pub write_trace: bool,
}

/// `[drift]` — polarization drift run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftSection {
    pub diffusion_rate_rad2_per_s: f64,
    pub duration_s: f64,
    pub dt_s: f64,
    pub base_error: f64,
    #[serde(default)]
    pub initial_angle_rad: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub step_events: Vec<StepEventSection>,
}

/// One `[[drift.step_events]]` entry.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepEventSection {
    pub time_s: f64,
    pub magnitude_rad: f64,
}

/// `[alignment]` — EPC alignment trial batch.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlignmentSection {
    #[serde(default = "default_quantization")]
    pub quantization_rad: f64,
    #[serde(default = "default_tolerance")]
    pub tolerance_rad: f64,
    #[serde(default = "default_max_evaluations")]
    pub max_evaluations: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
}

/// `[calibration]` — targets and free parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationSection {
    pub targets: TargetsSection,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub free: BTreeMap<String, BoundsSection>,
}

/// `[calibration.targets]` — the supported named observables.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetsSection {
    /// Secret key rate at the configured channel length, bit/clock.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skr_224km: Option<f64>,
    /// Largest length with positive rate, km.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zero_crossing_km: Option<f64>,
    /// Total signal-channel singles, Hz.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub singles_signal_hz: Option<f64>,
    /// Total idler-channel singles, Hz.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub singles_idler_hz: Option<f64>,
    /// Coincidence-to-accidental ratio.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub car: Option<f64>,
}

/// `{ min = …, max = … }` bounds for one free parameter.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSection {
    pub min: f64,
    pub max: f64,
}

// ---------------------------------------------------------------------------
// Loading and section access
// ---------------------------------------------------------------------------

impl ExperimentConfig {
    /// Loads and strictly parses a TOML configuration file. All failures
    /// (unreadable file, syntax, unknown keys) are configuration errors.
    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::domain(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::domain(format!("config {}: {e}", path.display())))
    }

    fn missing(section: &str) -> Error {
        Error::domain(format!(
            "config needs a [{section}] section for this command"
        ))
    }

    /// The `[channel]` section as core parameters.
    pub fn channel(&self) -> Result<ChannelParams> {
        let s = self
            .channel
            .as_ref()
            .ok_or_else(|| Self::missing("channel"))?;
        let stray_model = match &s.stray {
            Some(st) => StraySpectrum::new(
                st.support_nm,
                st.floor_per_s_per_nm,
                st.peaks
                    .iter()
                    .map(|p| GaussianPeak {
                        center_nm: p.center_nm,
                        fwhm_nm: p.fwhm_nm,
                        amplitude_per_s_per_nm: p.amplitude_per_s_per_nm,
                    })
                    .collect(),
            )?,
            None => StraySpectrum::zero(),
        };
        let params = ChannelParams {
            length_km: s.length_km,
            attenuation_db_per_km: s.attenuation_db_per_km,
            extra_insertion_loss_db: s.extra_insertion_loss_db,
            dispersion_ps_per_nm_km: s.dispersion_ps_per_nm_km,
            stray_model,
        };
        params.validate()?;
        Ok(params)
    }

    /// The `[detector]` section as core parameters.
    pub fn detector(&self) -> Result<DetectorParams> {
        let s = self
            .detector
            .as_ref()
            .ok_or_else(|| Self::missing("detector"))?;
        let params = DetectorParams {
            name: s.name.clone(),
            efficiency: s.efficiency,
            dark_rate_hz: s.dark_rate_hz,
            jitter_sigma_ps: s.jitter_sigma_ps,
        };
        params.validate()?;
        Ok(params)
    }

    /// The `[receiver]` efficiency.
    pub fn receiver_efficiency(&self) -> Result<f64> {
        let s = self
            .receiver
            .as_ref()
            .ok_or_else(|| Self::missing("receiver"))?;
        if !(0.0..=1.0).contains(&s.efficiency) {
            return Err(Error::domain("receiver efficiency must lie in [0, 1]"));
        }
        Ok(s.efficiency)
    }

    /// The `[protocol]` section as core parameters.
    pub fn protocol(&self) -> Result<ProtocolParams> {
        let s = self
            .protocol
            .as_ref()
            .ok_or_else(|| Self::missing("protocol"))?;
        let params = ProtocolParams {
            mu_signal: s.mu_signal,
            mu_decoy: s.mu_decoy,
            clock_rate_hz: s.clock_rate_hz,
            sifting_factor: s.sifting_factor,
            ec_efficiency: s.ec_efficiency,
            intrinsic_error: s.intrinsic_error,
            vacuum_error: s.vacuum_error,
            background_yield: s.background_yield,
        };
        params.validate()?;
        Ok(params)
    }

    /// The `[sweep]` grid.
    pub fn sweep(&self) -> Result<&SweepSection> {
        self.sweep.as_ref().ok_or_else(|| Self::missing("sweep"))
    }

    /// The `[pair_source]` section as core parameters.
    pub fn pair_source(&self) -> Result<PairSourceParams> {
        let s = self
            .pair_source
            .as_ref()
            .ok_or_else(|| Self::missing("pair_source"))?;
        let params = PairSourceParams {
            pair_rate_hz: s.pair_rate_hz,
            eta_signal: s.eta_signal,
            eta_idler: s.eta_idler,
            background_signal_hz: s.background_signal_hz,
            background_idler_hz: s.background_idler_hz,
            offset_ps: s.offset_ps,
            broadening_signal_ps: s.broadening_signal_ps,
            broadening_idler_ps: s.broadening_idler_ps,
            jitter_sigma_ps: s.jitter_sigma_ps,
        };
        params.validate()?;
        Ok(params)
    }

    /// The `[coincidence]` analysis settings.
    pub fn coincidence(&self) -> Result<&CoincidenceSection> {
        self.coincidence
            .as_ref()
            .ok_or_else(|| Self::missing("coincidence"))
    }

    /// The `[phase]` settings.
    pub fn phase(&self) -> Result<&PhaseSection> {
        self.phase.as_ref().ok_or_else(|| Self::missing("phase"))
    }

    /// The `[drift]` settings.
    pub fn drift(&self) -> Result<&DriftSection> {
        self.drift.as_ref().ok_or_else(|| Self::missing("drift"))
    }

    /// The `[alignment]` settings.
    pub fn alignment(&self) -> Result<&AlignmentSection> {
        self.alignment
            .as_ref()
            .ok_or_else(|| Self::missing("alignment"))
    }

    /// The `[calibration]` settings.
    pub fn calibration(&self) -> Result<&CalibrationSection> {
        self.calibration
            .as_ref()
            .ok_or_else(|| Self::missing("calibration"))
    }
}

impl PhaseSection {
    /// The synthesis spec implied by this section.
    pub fn noise_spec(&self) -> PhaseNoiseSpec {
        PhaseNoiseSpec {
            plateau_rad2_per_hz: self.plateau_rad2_per_hz,
            rolloff_exponent: self.rolloff_exponent,
            corner_low_hz: self.corner_low_hz,
            corner_high_hz: self.corner_high_hz,
            white_floor_rad2_per_hz: self.white_floor_rad2_per_hz,
            tones: self.tones.clone(),
            mean_phase_rad: self.mean_phase_rad,
        }
    }

    /// Effective PSD overlap (half the segment unless set).
    pub fn effective_overlap(&self) -> usize {
        self.overlap.unwrap_or(self.segment_length / 2)
    }
}

impl DriftSection {
    /// The drift process implied by this section.
    pub fn process(&self) -> DriftProcess {
        DriftProcess {
            diffusion_rate_rad2_per_s: self.diffusion_rate_rad2_per_s,
            step_events: self
                .step_events
                .iter()
                .map(|e| StepEvent {
                    time_s: e.time_s,
                    magnitude_rad: e.magnitude_rad,
                })
                .collect(),
        }
    }
}
