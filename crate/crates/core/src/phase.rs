//! Interferometric phase-trace synthesis and analysis.
//!
//! A fibre interferometer with complementary outputs measures
//! `a = (P/2)·(1 + V·cos φ)` and `b = (P/2)·(1 − V·cos φ)`, so only
//! `cos φ` is observable and the recoverable phase is wrapped to `[0, π]`.
//! This module provides:
//!
//! - [`extract_phase`]: wrapped-phase recovery
//!   `φ = arccos(clamp((a − b)/(V·(a + b)), −1, 1))`,
//! - [`estimate_psd`]: Welch averaged-periodogram PSD (Hann window,
//!   overlapping segments, one-sided density in rad²/Hz) with the Parseval
//!   property,
//! - [`synthesize_phase_noise`]: seeded synthesis of a phase series whose
//!   expected PSD is a plateau/power-law/floor shape plus discrete tones,
//! - [`detect_tones`]: spectral peak detection against a local median
//!   floor, and
//! - [`fit_rolloff_exponent`]: robust log–log slope estimation.
//!
//! CSV interfaces use the fixed headers `time_s,det_a,det_b` for traces
//! and `freq_hz,psd_rad2_per_hz` for spectra.

use crate::error::{Error, Result};
use crate::rng::substream;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use realfft::RealFftPlanner;
use std::io::{BufRead, Write};

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

/// Complementary detector readings sampled at a fixed rate.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityTrace {
    /// Sampling rate in samples/s.
    pub sample_rate_hz: f64,
    /// First detector output (linear power units, ≥ 0).
    pub samples_a: Vec<f64>,
    /// Second detector output (linear power units, ≥ 0), same length.
    pub samples_b: Vec<f64>,
}

impl IntensityTrace {
    /// Checks the field invariants.
    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return Err(Error::domain("sample rate must be > 0"));
        }
        if self.samples_a.len() != self.samples_b.len() {
            return Err(Error::domain(format!(
                "detector traces must have equal length, got {} vs {}",
                self.samples_a.len(),
                self.samples_b.len()
            )));
        }
        for (i, (&a, &b)) in self.samples_a.iter().zip(&self.samples_b).enumerate() {
            if !(a.is_finite() && a >= 0.0 && b.is_finite() && b >= 0.0) {
                return Err(Error::domain(format!(
                    "detector readings must be finite and ≥ 0, got ({a}, {b}) at sample {i}"
                )));
            }
        }
        Ok(())
    }

    /// Number of samples per detector.
    pub fn len(&self) -> usize {
        self.samples_a.len()
    }

    /// Whether the trace is empty.
    pub fn is_empty(&self) -> bool {
        self.samples_a.is_empty()
    }

    /// Writes the trace as CSV with header `time_s,det_a,det_b`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "time_s,det_a,det_b")?;
        let dt = 1.0 / self.sample_rate_hz;
        for (i, (a, b)) in self.samples_a.iter().zip(&self.samples_b).enumerate() {
            writeln!(w, "{},{},{}", i as f64 * dt, a, b)?;
        }
        Ok(())
    }

    /// Reads a trace from CSV, inferring the sample rate from the time
    /// column. Any malformed content is a format error.
    pub fn read_csv<R: BufRead>(r: R) -> Result<IntensityTrace> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::format("empty trace file"))??;
        if header.trim() != "time_s,det_a,det_b" {
            return Err(Error::format(format!(
                "expected header 'time_s,det_a,det_b', got '{header}'"
            )));
        }
        let mut times = Vec::new();
        let mut samples_a = Vec::new();
        let mut samples_b = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split(',');
            let mut next = |name: &str| -> Result<f64> {
                fields
                    .next()
                    .ok_or_else(|| Error::format(format!("line {}: missing {name}", lineno + 2)))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::format(format!("line {}: bad {name}: {e}", lineno + 2)))
            };
            let t = next("time_s")?;
            let a = next("det_a")?;
            let b = next("det_b")?;
            if fields.next().is_some() {
                return Err(Error::format(format!(
                    "line {}: too many fields",
                    lineno + 2
                )));
            }
            if !(a.is_finite() && a >= 0.0 && b.is_finite() && b >= 0.0) {
                return Err(Error::format(format!(
                    "line {}: detector readings must be finite and ≥ 0",
                    lineno + 2
                )));
            }
            if let Some(&prev) = times.last() {
                if t <= prev {
                    return Err(Error::format(format!(
                        "line {}: time column must be strictly increasing",
                        lineno + 2
                    )));
                }
            }
            times.push(t);
            samples_a.push(a);
            samples_b.push(b);
        }
        if times.len() < 2 {
            return Err(Error::format("trace needs at least two samples"));
        }
        let span = times[times.len() - 1] - times[0];
        let sample_rate_hz = (times.len() - 1) as f64 / span;
        Ok(IntensityTrace {
            sample_rate_hz,
            samples_a,
            samples_b,
        })
    }
}

/// Wrapped interferometric phase, one value per sample, in `[0, π]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSeries {
    /// Sampling rate in samples/s.
    pub sample_rate_hz: f64,
    /// Wrapped phase in radians, each value in `[0, π]`.
    pub wrapped_phase: Vec<f64>,
    /// Per-sample quality flags; `true` marks samples with no usable
    /// intensity (excluded from PSD estimation).
    pub flagged: Vec<bool>,
    /// Fraction of samples whose arccos argument was clamped into
    /// `[−1, 1]` (visibility mis-estimation diagnostic).
    pub clipped_fraction: f64,
}

impl PhaseSeries {
    /// Checks the field invariants.
    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return Err(Error::domain("sample rate must be > 0"));
        }
        if self.flagged.len() != self.wrapped_phase.len() {
            return Err(Error::domain("flag vector must match the phase length"));
        }
        for (i, &p) in self.wrapped_phase.iter().enumerate() {
            if !(0.0..=std::f64::consts::PI).contains(&p) {
                return Err(Error::domain(format!(
                    "wrapped phase must lie in [0, π], got {p} at sample {i}"
                )));
            }
        }
        Ok(())
    }

    /// Number of samples.
    pub fn len(&self) -> usize {
        self.wrapped_phase.len()
    }

    /// Whether the series is empty.
    pub fn is_empty(&self) -> bool {
        self.wrapped_phase.is_empty()
    }
}

/// One-sided power spectral density estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdEstimate {
    /// Bin centre frequencies in Hz (0 … Nyquist).
    pub frequencies: Vec<f64>,
    /// One-sided density in rad²/Hz, same length as `frequencies`.
    pub density: Vec<f64>,
    /// Samples per Welch segment.
    pub segment_length: usize,
    /// Window descriptor (always `"hann"` here).
    pub window: String,
    /// Number of segments averaged (flagged segments excluded).
    pub segments_used: usize,
}

impl PsdEstimate {
    /// Frequency resolution (bin width) in Hz.
    pub fn bin_width_hz(&self) -> f64 {
        self.frequencies[1] - self.frequencies[0]
    }

    /// Total power: `Σ density · Δf`, the Parseval counterpart of the
    /// detrended input variance.
    pub fn integrated_power(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.bin_width_hz()
    }

    /// Mean density over the closed frequency band `[f_lo, f_hi]` Hz.
    pub fn band_mean(&self, f_lo: f64, f_hi: f64) -> f64 {
        let mut sum = 0.0;
        let mut n = 0usize;
        for (f, d) in self.frequencies.iter().zip(&self.density) {
            if *f >= f_lo && *f <= f_hi {
                sum += d;
                n += 1;
            }
        }
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    }

    /// Writes the estimate as CSV with header `freq_hz,psd_rad2_per_hz`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "freq_hz,psd_rad2_per_hz")?;
        for (f, d) in self.frequencies.iter().zip(&self.density) {
            writeln!(w, "{f},{d}")?;
        }
        Ok(())
    }
}

/// Shape specification for synthetic phase noise: a low-frequency plateau
/// rolling off as `f^(−exponent)` between two corner frequencies, a white
/// floor, and discrete tones, all centred on `mean_phase_rad`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseNoiseSpec {
    /// Plateau density below `corner_low_hz`, rad²/Hz (≥ 0; 0 disables the
    /// coloured component).
    pub plateau_rad2_per_hz: f64,
    /// Power-law exponent of the roll-off between the corners (≥ 0).
    pub rolloff_exponent: f64,
    /// Lower corner frequency in Hz.
    pub corner_low_hz: f64,
    /// Upper corner frequency in Hz (the density is flat again above).
    pub corner_high_hz: f64,
    /// Additive white phase-noise floor, rad²/Hz (≥ 0).
    pub white_floor_rad2_per_hz: f64,
    /// Discrete tones (frequency Hz, amplitude rad); each tone gets a
    /// seeded random initial phase.
    pub tones: Vec<(f64, f64)>,
    /// Centre of the synthesized phase excursion in rad (π/2 keeps small
    /// signals away from the wrap boundaries).
    pub mean_phase_rad: f64,
}

impl PhaseNoiseSpec {
    /// Checks the field invariants against a target sample rate.
    pub fn validate(&self, sample_rate_hz: f64) -> Result<()> {
        if !(self.plateau_rad2_per_hz >= 0.0 && self.plateau_rad2_per_hz.is_finite()) {
            return Err(Error::domain("plateau density must be finite and ≥ 0"));
        }
        if !(self.rolloff_exponent >= 0.0 && self.rolloff_exponent.is_finite()) {
            return Err(Error::domain("roll-off exponent must be finite and ≥ 0"));
        }
        if self.plateau_rad2_per_hz > 0.0 {
            if !(self.corner_low_hz > 0.0 && self.corner_high_hz > self.corner_low_hz) {
                return Err(Error::domain(
                    "corner frequencies must satisfy 0 < low < high",
                ));
            }
            if self.corner_high_hz >= 0.5 * sample_rate_hz {
                return Err(Error::domain(format!(
                    "upper corner {} Hz must lie below Nyquist ({} Hz)",
                    self.corner_high_hz,
                    0.5 * sample_rate_hz
                )));
            }
        }
        if !(self.white_floor_rad2_per_hz >= 0.0 && self.white_floor_rad2_per_hz.is_finite()) {
            return Err(Error::domain("white floor must be finite and ≥ 0"));
        }
        for &(f, a) in &self.tones {
            if !(f > 0.0 && f < 0.5 * sample_rate_hz) {
                return Err(Error::domain(format!(
                    "tone frequency {f} Hz must lie in (0, Nyquist)"
                )));
            }
            if !(a >= 0.0 && a.is_finite()) {
                return Err(Error::domain("tone amplitudes must be finite and ≥ 0"));
            }
        }
        if !self.mean_phase_rad.is_finite() {
            return Err(Error::domain("mean phase must be finite"));
        }
        Ok(())
    }

    /// A channel-like default: 0.02 rad²/Hz plateau rolling off as f⁻³
    /// between 10 Hz and 1 kHz, no white floor, a dominant 100 Hz tone of
    /// amplitude just under π/2 and a smaller 125 Hz tone, centred at π/2.
    pub fn channel_like() -> PhaseNoiseSpec {
        PhaseNoiseSpec {
            plateau_rad2_per_hz: 0.02,
            rolloff_exponent: 3.0,
            corner_low_hz: 10.0,
            corner_high_hz: 1000.0,
            white_floor_rad2_per_hz: 0.0,
            tones: vec![(100.0, 1.4), (125.0, 0.45)],
            mean_phase_rad: std::f64::consts::FRAC_PI_2,
        }
    }
}

/// One detected spectral peak.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToneDetection {
    /// Frequency of the peak bin in Hz.
    pub frequency_hz: f64,
    /// Floor-subtracted power integrated over the peak support, rad².
    pub power_rad2: f64,
}

// ---------------------------------------------------------------------------
// Phase extraction and forward model
// ---------------------------------------------------------------------------

/// Recovers the wrapped phase from complementary detector outputs:
///
/// `φ_t = arccos(clamp((a_t − b_t)/(V·(a_t + b_t)), −1, 1))`.
///
/// Samples with zero total intensity are flagged (phase set to π/2 as a
/// placeholder) and excluded from downstream PSD estimation. The fraction
/// of samples needing the clamp is reported as a quality metric.
pub fn extract_phase(trace: &IntensityTrace, visibility: f64) -> Result<PhaseSeries> {
    trace.validate()?;
    if !(visibility > 0.0 && visibility <= 1.0) {
        return Err(Error::domain(format!(
            "visibility must lie in (0, 1], got {visibility}"
        )));
    }
    let n = trace.len();
    let mut wrapped_phase = Vec::with_capacity(n);
    let mut flagged = vec![false; n];
    let mut clipped = 0usize;
    let samples = trace.samples_a.iter().zip(&trace.samples_b);
    for (flag, (&a, &b)) in flagged.iter_mut().zip(samples) {
        let total = a + b;
        if total <= 0.0 {
            *flag = true;
            wrapped_phase.push(std::f64::consts::FRAC_PI_2);
            continue;
        }
        let arg = (a - b) / (visibility * total);
        if arg.abs() > 1.0 {
            clipped += 1;
        }
        wrapped_phase.push(arg.clamp(-1.0, 1.0).acos());
    }
    Ok(PhaseSeries {
        sample_rate_hz: trace.sample_rate_hz,
        wrapped_phase,
        flagged,
        clipped_fraction: clipped as f64 / n.max(1) as f64,
    })
}

/// Forward model of the two-output interferometer:
/// `a = (P/2)(1 + V·cos φ)`, `b = (P/2)(1 − V·cos φ)`.
///
/// [`extract_phase`] inverts this exactly (for the same visibility) on
/// unflagged samples.
pub fn interference_trace(
    series: &PhaseSeries,
    visibility: f64,
    mean_power: f64,
) -> Result<IntensityTrace> {
    series.validate()?;
    if !(visibility > 0.0 && visibility <= 1.0) {
        return Err(Error::domain(format!(
            "visibility must lie in (0, 1], got {visibility}"
        )));
    }
    if !(mean_power > 0.0 && mean_power.is_finite()) {
        return Err(Error::domain("mean power must be finite and > 0"));
    }
    let half = 0.5 * mean_power;
    let mut samples_a = Vec::with_capacity(series.len());
    let mut samples_b = Vec::with_capacity(series.len());
    for &phi in &series.wrapped_phase {
        let c = visibility * phi.cos();
        samples_a.push(half * (1.0 + c));
        samples_b.push(half * (1.0 - c));
    }
    Ok(IntensityTrace {
        sample_rate_hz: series.sample_rate_hz,
        samples_a,
        samples_b,
    })
}

// ---------------------------------------------------------------------------
// PSD estimation (Welch)
// ---------------------------------------------------------------------------

/// Segments per parallel work unit; partial sums are combined in work-unit
/// index order so the result is identical for any worker count.
const SEGMENTS_PER_GROUP: usize = 16;

/// Welch averaged-periodogram estimate of the one-sided PSD.
///
/// Segments of `segment_length` samples advance by
/// `segment_length − overlap`; each segment is mean-detrended, Hann
/// windowed and transformed; densities are scaled by `1/(fs·Σw²)` with
/// one-sided doubling (DC and Nyquist excluded). Segments containing
/// flagged samples are dropped.
pub fn estimate_psd(
    series: &PhaseSeries,
    segment_length: usize,
    overlap: usize,
) -> Result<PsdEstimate> {
    series.validate()?;
    if segment_length < 8 {
        return Err(Error::domain("segment length must be at least 8 samples"));
    }
    if segment_length > series.len() {
        return Err(Error::domain(format!(
            "segment length {segment_length} exceeds series length {}",
            series.len()
        )));
    }
    if overlap >= segment_length {
        return Err(Error::domain(
            "overlap must be smaller than the segment length",
        ));
    }

    let hop = segment_length - overlap;
    let any_flagged = series.flagged.iter().any(|&f| f);
    let starts: Vec<usize> = (0..)
        .map(|k| k * hop)
        .take_while(|s| s + segment_length <= series.len())
        .filter(|&s| !any_flagged || !series.flagged[s..s + segment_length].iter().any(|&f| f))
        .collect();
    if starts.is_empty() {
        return Err(Error::domain(
            "no usable segments (series too short or all segments contain flagged samples)",
        ));
    }

    let window: Vec<f64> = (0..segment_length)
        .map(|i| {
            0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / segment_length as f64).cos())
        })
        .collect();
    let window_power: f64 = window.iter().map(|w| w * w).sum();
    let n_bins = segment_length / 2 + 1;
    let fs = series.sample_rate_hz;

    // Fixed-size groups of segments are processed in parallel; each group
    // accumulates sequentially and groups are then summed in index order,
    // keeping the floating-point reduction order independent of threads.
    // The plan is immutable and shared; only the scratch is per-group.
    let fft = RealFftPlanner::<f64>::new().plan_fft_forward(segment_length);
    let group_sums: Vec<Vec<f64>> = starts
        .par_chunks(SEGMENTS_PER_GROUP)
        .map(|group| {
            let mut input = fft.make_input_vec();
            let mut spectrum = fft.make_output_vec();
            let mut acc = vec![0.0f64; n_bins];
            for &start in group {
                let seg = &series.wrapped_phase[start..start + segment_length];
                let mean = seg.iter().sum::<f64>() / segment_length as f64;
                for ((x, &s), w) in input.iter_mut().zip(seg).zip(&window) {
                    *x = (s - mean) * w;
                }
                fft.process(&mut input, &mut spectrum)
                    .expect("FFT length matches the plan");
                for (a, c) in acc.iter_mut().zip(&spectrum) {
                    *a += c.norm_sqr();
                }
            }
            acc
        })
        .collect();

    let mut density = vec![0.0f64; n_bins];
    for group in &group_sums {
        for (d, g) in density.iter_mut().zip(group) {
            *d += g;
        }
    }
    let scale = 1.0 / (fs * window_power * starts.len() as f64);
    for (k, d) in density.iter_mut().enumerate() {
        let one_sided = if k == 0 || (segment_length.is_multiple_of(2) && k == n_bins - 1) {
            1.0
        } else {
            2.0
        };
        *d *= scale * one_sided;
    }

    let frequencies = (0..n_bins)
        .map(|k| k as f64 * fs / segment_length as f64)
        .collect();
    Ok(PsdEstimate {
        frequencies,
        density,
        segment_length,
        window: "hann".to_string(),
        segments_used: starts.len(),
    })
}

// ---------------------------------------------------------------------------
// Phase-noise synthesis
// ---------------------------------------------------------------------------

/// First-order digital shelving section obtained from
/// `H(s) = (s + ω_z)/(s + ω_p)` by the bilinear transform with corner
/// prewarping. A cascade of log-spaced sections approximates an
/// `f^(−exponent)` roll-off between two corners.
struct ShelfSection {
    b0: f64,
    b1: f64,
    a1: f64,
    x1: f64,
    y1: f64,
}

impl ShelfSection {
    fn new(f_zero_hz: f64, f_pole_hz: f64, sample_rate_hz: f64) -> ShelfSection {
        let warp =
            |f: f64| 2.0 * sample_rate_hz * (std::f64::consts::PI * f / sample_rate_hz).tan();
        let wz = warp(f_zero_hz);
        let wp = warp(f_pole_hz);
        let k = 2.0 * sample_rate_hz;
        let a0 = k + wp;
        ShelfSection {
            b0: (k + wz) / a0,
            b1: (wz - k) / a0,
            a1: (wp - k) / a0,
            x1: 0.0,
            y1: 0.0,
        }
    }

    #[inline]
    fn step(&mut self, x: f64) -> f64 {
        let y = self.b0 * x + self.b1 * self.x1 - self.a1 * self.y1;
        self.x1 = x;
        self.y1 = y;
        y
    }
}

/// Synthesizes a seeded phase series whose expected one-sided PSD is flat
/// at the plateau below the lower corner, follows `f^(−exponent)` between
/// the corners, is flat again above the upper corner, and sits on an
/// additive white floor, plus the listed tones. The sum is folded into
/// `[0, π]` by `arccos(cos(·))` — the physically observable wrapped phase.
///
/// Identical seed, spec, duration and rate give identical output. The
/// plateau component, white floor and tone phases draw from three
/// independent seed substreams.
pub fn synthesize_phase_noise(
    spec: &PhaseNoiseSpec,
    duration_s: f64,
    sample_rate_hz: f64,
    seed: u64,
) -> Result<PhaseSeries> {
    if !(sample_rate_hz > 0.0 && sample_rate_hz.is_finite()) {
        return Err(Error::domain("sample rate must be > 0"));
    }
    spec.validate(sample_rate_hz)?;
    if !(duration_s > 0.0 && duration_s.is_finite()) {
        return Err(Error::domain("duration must be > 0"));
    }
    let n = (duration_s * sample_rate_hz).round() as usize;
    if n < 2 {
        return Err(Error::domain(
            "duration × sample_rate must cover at least 2 samples",
        ));
    }

    let mut unwrapped = vec![spec.mean_phase_rad; n];

    // Coloured component: white Gaussian noise through a shelving cascade.
    if spec.plateau_rad2_per_hz > 0.0 && spec.rolloff_exponent > 0.0 {
        let (f1, f2, alpha) = (
            spec.corner_low_hz,
            spec.corner_high_hz,
            spec.rolloff_exponent,
        );
        let decades = (f2 / f1).log10();
        let k_sections = (2.0 * alpha * decades).ceil().max(4.0) as usize;
        let ratio = f2 / f1;
        let warp = |f: f64| (std::f64::consts::PI * f / sample_rate_hz).tan();
        let mut dc_gain = 1.0;
        let mut cascade: Vec<ShelfSection> = (0..k_sections)
            .map(|i| {
                let pole = f1 * ratio.powf(i as f64 / k_sections as f64);
                let zero = pole * ratio.powf(alpha / (2.0 * k_sections as f64));
                // The digital DC gain carries the bilinear tan-warping of
                // corners approaching Nyquist, so it must be accumulated
                // from the warped ratios rather than (f2/f1)^(α/2).
                dc_gain *= warp(zero) / warp(pole);
                ShelfSection::new(zero, pole, sample_rate_hz)
            })
            .collect();
        let sigma_in = (spec.plateau_rad2_per_hz * sample_rate_hz / 2.0).sqrt() / dc_gain;
        let mut rng = substream(seed, 0);
        // Let the slowest pole settle before recording.
        let warmup = (4.0 * sample_rate_hz / (2.0 * std::f64::consts::PI * f1))
            .ceil()
            .min(1e7) as usize;
        for _ in 0..warmup {
            let mut x: f64 = rng.sample::<f64, _>(StandardNormal) * sigma_in;
            for s in cascade.iter_mut() {
                x = s.step(x);
            }
        }
        for u in unwrapped.iter_mut() {
            let mut x: f64 = rng.sample::<f64, _>(StandardNormal) * sigma_in;
            for s in cascade.iter_mut() {
                x = s.step(x);
            }
            *u += x;
        }
    }

    // White floor.
    if spec.white_floor_rad2_per_hz > 0.0 {
        let sigma = (spec.white_floor_rad2_per_hz * sample_rate_hz / 2.0).sqrt();
        let mut rng = substream(seed, 1);
        for u in unwrapped.iter_mut() {
            *u += rng.sample::<f64, _>(StandardNormal) * sigma;
        }
    }

    // Tones, via phasor recurrence (renormalized periodically).
    if !spec.tones.is_empty() {
        let mut rng = substream(seed, 2);
        for &(freq, amp) in &spec.tones {
            let theta0: f64 = rng.gen::<f64>() * 2.0 * std::f64::consts::PI;
            if amp == 0.0 {
                continue;
            }
            let dphi = 2.0 * std::f64::consts::PI * freq / sample_rate_hz;
            let (step_im, step_re) = dphi.sin_cos();
            let (mut im, mut re) = theta0.sin_cos();
            for chunk in unwrapped.chunks_mut(65536) {
                for u in chunk {
                    *u += amp * im;
                    let new_re = re * step_re - im * step_im;
                    let new_im = re * step_im + im * step_re;
                    re = new_re;
                    im = new_im;
                }
                let norm = (re * re + im * im).sqrt();
                re /= norm;
                im /= norm;
            }
        }
    }

    // Fold to the observable wrapped phase in [0, π], in place: the
    // principal angle acos(cos(u)) equals π − |u mod 2π − π|, and the
    // algebraic form avoids the ill-conditioning of acos near ±1. The
    // reduction into [0, 2π) runs by conditional subtraction: stationary
    // synthesis keeps |u| within a few radians, so the loops almost never
    // iterate and the fold stays branch-predictable instead of paying a
    // libm fmod per sample.
    const TAU: f64 = 2.0 * std::f64::consts::PI;
    for u in unwrapped.iter_mut() {
        let mut x = *u;
        while x >= TAU {
            x -= TAU;
        }
        while x < 0.0 {
            x += TAU;
        }
        *u = std::f64::consts::PI - (x - std::f64::consts::PI).abs();
    }
    let n_samples = unwrapped.len();
    Ok(PhaseSeries {
        sample_rate_hz,
        wrapped_phase: unwrapped,
        flagged: vec![false; n_samples],
        clipped_fraction: 0.0,
    })
}

// ---------------------------------------------------------------------------
// Tone detection and roll-off fitting
// ---------------------------------------------------------------------------

/// Locates spectral peaks: bins whose density exceeds
/// `threshold × local median floor` are grouped into supports (gaps of up
/// to 2 bins bridge window-leakage nulls); each support yields one
/// detection at its maximum bin with the floor-subtracted power integrated
/// across the support. Returns detections in increasing frequency order.
pub fn detect_tones(psd: &PsdEstimate, threshold: f64) -> Result<Vec<ToneDetection>> {
    if psd.frequencies.len() < 4 {
        return Err(Error::domain("PSD must contain at least 4 bins"));
    }
    if !(threshold > 1.0 && threshold.is_finite()) {
        return Err(Error::domain("prominence threshold must be > 1"));
    }
    let n = psd.density.len();
    let half_window = (n / 100).clamp(8, 256);

    // Wrapped phase is bounded by [0, π], so genuine spectral power is
    // O(1) rad²; totals at round-off scale are FFT dust (e.g. a constant
    // input) and carry no tones.
    let total_power = psd.integrated_power();
    if total_power <= 1e-20 {
        return Ok(Vec::new());
    }

    // Rolling median floor. The DC bin and its two neighbours are excluded
    // throughout: mean detrending leaves leakage there and a local median
    // is meaningless that close to the edge. The window bounds advance by
    // at most one bin per step, so the sorted window is maintained
    // incrementally — one removal and one insertion — rather than re-sorting
    // per bin.
    const FIRST_BIN: usize = 3;
    let mut floor = vec![0.0f64; n];
    let mut lo = FIRST_BIN;
    let mut hi = (FIRST_BIN + half_window).min(n - 1);
    let mut window: Vec<f64> = psd.density[lo..=hi].to_vec();
    window.sort_by(f64::total_cmp);
    for (i, slot) in floor.iter_mut().enumerate().skip(FIRST_BIN) {
        let new_lo = i.saturating_sub(half_window).max(FIRST_BIN);
        if new_lo > lo {
            let outgoing = psd.density[lo];
            let at = window
                .binary_search_by(|probe| probe.total_cmp(&outgoing))
                .expect("outgoing value is present in the window");
            window.remove(at);
            lo = new_lo;
        }
        let new_hi = (i + half_window).min(n - 1);
        if new_hi > hi {
            let incoming = psd.density[new_hi];
            let at = window
                .binary_search_by(|probe| probe.total_cmp(&incoming))
                .unwrap_or_else(|insert_at| insert_at);
            window.insert(at, incoming);
            hi = new_hi;
        }
        *slot = window[window.len() / 2];
    }

    let above: Vec<bool> = (0..n)
        .map(|i| i >= FIRST_BIN && psd.density[i] > threshold * floor[i])
        .collect();

    // Group above-threshold bins into supports, bridging ≤ 2-bin gaps
    // (window-leakage nulls), then split each support at saddles between
    // sub-peaks of sufficient prominence.
    let mut detections = Vec::new();
    let mut i = FIRST_BIN;
    while i < n {
        if !above[i] {
            i += 1;
            continue;
        }
        let start = i;
        let mut end = i;
        let mut j = i + 1;
        let mut gap = 0usize;
        while j < n && gap <= 2 {
            if above[j] {
                end = j;
                gap = 0;
            } else {
                gap += 1;
            }
            j += 1;
        }
        for (sub_start, sub_end, peak_bin) in split_support(&psd.density, start, end, threshold) {
            let power: f64 = (sub_start..=sub_end)
                .map(|k| (psd.density[k] - floor[k]).max(0.0))
                .sum::<f64>()
                * psd.bin_width_hz();
            // Reject leakage shoulders that carry no meaningful power.
            if power > 1e-9 * total_power {
                detections.push(ToneDetection {
                    frequency_hz: psd.frequencies[peak_bin],
                    power_rad2: power,
                });
            }
        }
        i = end + 1;
    }
    Ok(detections)
}

/// Splits one above-threshold support into sub-peaks: local maxima are
/// retained only while they rise at least `threshold ×` above the saddle
/// separating them from a stronger neighbour (two tones linked by their
/// leakage shoulders stay distinct; sidelobe ripple merges into its
/// mainlobe). Returns `(sub_start, sub_end, peak_bin)` per retained peak,
/// with boundaries at the saddles.
fn split_support(
    density: &[f64],
    start: usize,
    end: usize,
    threshold: f64,
) -> Vec<(usize, usize, usize)> {
    let mut peaks: Vec<usize> = (start..=end)
        .filter(|&k| {
            let left = if k == start {
                f64::NEG_INFINITY
            } else {
                density[k - 1]
            };
            let right = if k == end {
                f64::NEG_INFINITY
            } else {
                density[k + 1]
            };
            density[k] > left && density[k] >= right
        })
        .collect();
    if peaks.is_empty() {
        // Degenerate plateau: keep the first bin of the support.
        peaks.push(start);
    }

    // Iteratively absorb the weaker of any adjacent pair whose saddle is
    // not deep enough.
    loop {
        let mut merged = false;
        let mut idx = 0;
        while peaks.len() > 1 && idx + 1 < peaks.len() {
            let (a, b) = (peaks[idx], peaks[idx + 1]);
            let saddle = density[a + 1..b]
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min);
            if density[a].min(density[b]) < threshold * saddle {
                let drop = if density[a] <= density[b] {
                    idx
                } else {
                    idx + 1
                };
                peaks.remove(drop);
                merged = true;
                idx = idx.saturating_sub(1);
            } else {
                idx += 1;
            }
        }
        if !merged {
            break;
        }
    }

    // Boundaries at the saddle minima between retained peaks.
    let mut out = Vec::with_capacity(peaks.len());
    let mut left_edge = start;
    for (k, &peak) in peaks.iter().enumerate() {
        let right_edge = if k + 1 < peaks.len() {
            let next = peaks[k + 1];
            (peak + 1..next)
                .min_by(|&a, &b| density[a].partial_cmp(&density[b]).unwrap())
                .expect("adjacent maxima are separated by at least one bin")
        } else {
            end
        };
        out.push((left_edge, right_edge, peak));
        left_edge = right_edge + 1;
    }
    out
}

/// Fits the power-law exponent of a PSD over `[f_lo, f_hi]` by the
/// Theil–Sen median slope in log–log coordinates (robust to tones riding
/// on the roll-off). Returns the positive exponent α for `density ∝ f^(−α)`.
pub fn fit_rolloff_exponent(psd: &PsdEstimate, f_lo: f64, f_hi: f64) -> Result<f64> {
    if !(f_lo > 0.0 && f_hi > f_lo) {
        return Err(Error::domain("fit band must satisfy 0 < f_lo < f_hi"));
    }
    let pts: Vec<(f64, f64)> = psd
        .frequencies
        .iter()
        .zip(&psd.density)
        .filter(|(f, d)| **f >= f_lo && **f <= f_hi && **d > 0.0)
        .map(|(f, d)| (f.log10(), d.log10()))
        .collect();
    if pts.len() < 8 {
        return Err(Error::domain(format!(
            "fit band [{f_lo}, {f_hi}] Hz contains only {} usable bins (need ≥ 8)",
            pts.len()
        )));
    }
    // Decimate to bounded work while keeping the band coverage.
    let stride = (pts.len() / 256).max(1);
    let sample: Vec<(f64, f64)> = pts.iter().copied().step_by(stride).collect();
    let mut slopes = Vec::with_capacity(sample.len() * (sample.len() - 1) / 2);
    for i in 0..sample.len() {
        for j in (i + 1)..sample.len() {
            let dx = sample[j].0 - sample[i].0;
            if dx.abs() > 1e-12 {
                slopes.push((sample[j].1 - sample[i].1) / dx);
            }
        }
    }
    if slopes.is_empty() {
        return Err(Error::domain("degenerate fit band"));
    }
    slopes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(-slopes[slopes.len() / 2])
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
