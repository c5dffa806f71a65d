//! Python bindings for the workbench core: link budgets, decoy-state key
//! rates, pair-source coincidence simulation, phase-noise metrology and
//! polarization drift/alignment.
//!
//! Build with `cargo build -p qlink-py`, then import the produced
//! `libqlink.so` as module `qlink` (see `python/smoke_test.py`).

// `#[pyfunction]`/`#[pymethods]` expansions insert `PyErr::from` on values
// that are already `PyErr`, which trips this lint on every binding.
#![allow(clippy::useless_conversion)]

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use qlink_core::{channel, decoy, phase, physics, polarization, timetag, Error};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(io) => PyIOError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn state(s: (f64, f64, f64)) -> PyResult<polarization::PolarizationState> {
    polarization::PolarizationState::pure(s.0, s.1, s.2).map_err(to_py)
}

// ---------------------------------------------------------------------------
// Parameter types
// ---------------------------------------------------------------------------

/// Fibre channel: length, attenuation, lumped extra loss, dispersion.
#[pyclass(name = "Channel")]
#[derive(Clone)]
struct PyChannel(channel::ChannelParams);

#[pymethods]
impl PyChannel {
    #[new]
    #[pyo3(signature = (length_km, attenuation_db_per_km, extra_insertion_loss_db=0.0, dispersion_ps_per_nm_km=0.0))]
    fn new(
        length_km: f64,
        attenuation_db_per_km: f64,
        extra_insertion_loss_db: f64,
        dispersion_ps_per_nm_km: f64,
    ) -> PyResult<Self> {
        let params = channel::ChannelParams {
            length_km,
            attenuation_db_per_km,
            extra_insertion_loss_db,
            dispersion_ps_per_nm_km,
            stray_model: channel::StraySpectrum::zero(),
        };
        params.validate().map_err(to_py)?;
        Ok(PyChannel(params))
    }

    #[getter]
    fn length_km(&self) -> f64 {
        self.0.length_km
    }

    #[getter]
    fn attenuation_db_per_km(&self) -> f64 {
        self.0.attenuation_db_per_km
    }

    /// End-to-end fibre loss in dB at `length_km` (defaults to the
    /// configured length).
    #[pyo3(signature = (length_km=None))]
    fn total_loss_db(&self, length_km: Option<f64>) -> f64 {
        self.0.total_loss_db(length_km.unwrap_or(self.0.length_km))
    }

    fn __repr__(&self) -> String {
        format!(
            "Channel(length_km={}, attenuation_db_per_km={})",
            self.0.length_km, self.0.attenuation_db_per_km
        )
    }
}

/// Single-photon detector: efficiency, dark rate, timing jitter.
#[pyclass(name = "Detector")]
#[derive(Clone)]
struct PyDetector(channel::DetectorParams);

#[pymethods]
impl PyDetector {
    #[new]
    #[pyo3(signature = (efficiency, dark_rate_hz=0.0, jitter_sigma_ps=0.0, name="snspd".to_string()))]
    fn new(
        efficiency: f64,
        dark_rate_hz: f64,
        jitter_sigma_ps: f64,
        name: String,
    ) -> PyResult<Self> {
        let params = channel::DetectorParams {
            name,
            efficiency,
            dark_rate_hz,
            jitter_sigma_ps,
        };
        params.validate().map_err(to_py)?;
        Ok(PyDetector(params))
    }

    #[getter]
    fn efficiency(&self) -> f64 {
        self.0.efficiency
    }
}

/// Decoy-state BB84 protocol parameters.
#[pyclass(name = "Protocol")]
#[derive(Clone)]
struct PyProtocol(decoy::ProtocolParams);

#[pymethods]
impl PyProtocol {
    #[new]
    #[pyo3(signature = (mu_signal, mu_decoy, clock_rate_hz, intrinsic_error, background_yield,
                        sifting_factor=0.5, ec_efficiency=1.16, vacuum_error=0.5))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        mu_signal: f64,
        mu_decoy: f64,
        clock_rate_hz: f64,
        intrinsic_error: f64,
        background_yield: f64,
        sifting_factor: f64,
        ec_efficiency: f64,
        vacuum_error: f64,
    ) -> PyResult<Self> {
        let params = decoy::ProtocolParams {
            mu_signal,
            mu_decoy,
            clock_rate_hz,
            sifting_factor,
            ec_efficiency,
            intrinsic_error,
            vacuum_error,
            background_yield,
        };
        params.validate().map_err(to_py)?;
        Ok(PyProtocol(params))
    }

    #[getter]
    fn mu_signal(&self) -> f64 {
        self.0.mu_signal
    }

    #[getter]
    fn mu_decoy(&self) -> f64 {
        self.0.mu_decoy
    }

    #[getter]
    fn clock_rate_hz(&self) -> f64 {
        self.0.clock_rate_hz
    }
}

/// Photon-pair source with per-arm survival, backgrounds and spreads.
#[pyclass(name = "PairSource")]
#[derive(Clone)]
struct PyPairSource(timetag::PairSourceParams);

#[pymethods]
impl PyPairSource {
    #[new]
    #[pyo3(signature = (pair_rate_hz, eta_signal, eta_idler, background_signal_hz=0.0,
                        background_idler_hz=0.0, offset_ps=0, broadening_signal_ps=0.0,
                        broadening_idler_ps=0.0, jitter_sigma_ps=0.0))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        pair_rate_hz: f64,
        eta_signal: f64,
        eta_idler: f64,
        background_signal_hz: f64,
        background_idler_hz: f64,
        offset_ps: i64,
        broadening_signal_ps: f64,
        broadening_idler_ps: f64,
        jitter_sigma_ps: f64,
    ) -> PyResult<Self> {
        let params = timetag::PairSourceParams {
            pair_rate_hz,
            eta_signal,
            eta_idler,
            background_signal_hz,
            background_idler_hz,
            offset_ps,
            broadening_signal_ps,
            broadening_idler_ps,
            jitter_sigma_ps,
        };
        params.validate().map_err(to_py)?;
        Ok(PyPairSource(params))
    }

    #[getter]
    fn pair_rate_hz(&self) -> f64 {
        self.0.pair_rate_hz
    }
}

// ---------------------------------------------------------------------------
// Result types
// ---------------------------------------------------------------------------

/// Secret-key-rate evaluation with all decoy intermediates.
#[pyclass(name = "SkrResult")]
struct PySkrResult(decoy::SkrResult);

#[pymethods]
impl PySkrResult {
    #[getter]
    fn rate_per_clock(&self) -> f64 {
        self.0.rate_per_clock
    }

    #[getter]
    fn gain_signal(&self) -> f64 {
        self.0.signal.gain
    }

    #[getter]
    fn qber_signal(&self) -> f64 {
        self.0.signal.qber
    }

    #[getter]
    fn gain_decoy(&self) -> f64 {
        self.0.decoy.gain
    }

    #[getter]
    fn qber_decoy(&self) -> f64 {
        self.0.decoy.qber
    }

    #[getter]
    fn y1_lower(&self) -> f64 {
        self.0.y1_lower
    }

    #[getter]
    fn e1_upper(&self) -> f64 {
        self.0.e1_upper
    }

    fn __repr__(&self) -> String {
        format!("SkrResult(rate_per_clock={:e})", self.0.rate_per_clock)
    }
}

/// Key rate versus distance, with the positive-rate horizon.
#[pyclass(name = "SkrCurve")]
struct PySkrCurve(decoy::SkrCurve);

#[pymethods]
impl PySkrCurve {
    /// `(length_km, eta, rate_per_clock)` rows.
    fn points(&self) -> Vec<(f64, f64, f64)> {
        self.0
            .points
            .iter()
            .map(|p| (p.length_km, p.eta, p.skr.rate_per_clock))
            .collect()
    }

    #[getter]
    fn zero_crossing_km(&self) -> Option<f64> {
        self.0.zero_crossing_km
    }
}

/// Time-tagged two-channel acquisition.
#[pyclass(name = "TimeTagStream")]
struct PyTimeTagStream(timetag::TimeTagStream);

#[pymethods]
impl PyTimeTagStream {
    #[getter]
    fn duration_s(&self) -> f64 {
        self.0.duration_s
    }

    fn total_tags(&self) -> u64 {
        self.0.total_tags()
    }

    fn singles_rate_hz(&self, channel: u32) -> PyResult<f64> {
        self.0.singles_rate_hz(channel).map_err(to_py)
    }

    fn timestamps_ps(&self, channel: u32) -> PyResult<Vec<u64>> {
        Ok(self.0.channel(channel).map_err(to_py)?.to_vec())
    }
}

/// Cross-correlation histogram of arrival-time differences.
#[pyclass(name = "DelayHistogram")]
struct PyDelayHistogram(timetag::DelayHistogram);

#[pymethods]
impl PyDelayHistogram {
    #[getter]
    fn bin_width_ps(&self) -> u64 {
        self.0.bin_width_ps
    }

    fn counts(&self) -> Vec<u64> {
        self.0.counts.clone()
    }

    fn bin_center_ps(&self, index: usize) -> f64 {
        self.0.bin_center_ps(index)
    }

    /// `(index, centre_ps, counts)` of the tallest bin.
    fn peak(&self) -> Option<(usize, f64, u64)> {
        self.0.peak()
    }

    fn count_in_window(&self, start_ps: i64, width_ps: u64) -> u64 {
        self.0.count_in_window(start_ps, width_ps)
    }
}

/// Coincidence-to-accidental ratio with its statistical uncertainty.
#[pyclass(name = "CarEstimate")]
struct PyCarEstimate(timetag::CarEstimate);

#[pymethods]
impl PyCarEstimate {
    #[getter]
    fn car(&self) -> f64 {
        self.0.car
    }

    #[getter]
    fn uncertainty(&self) -> f64 {
        self.0.uncertainty
    }

    #[getter]
    fn coincidences(&self) -> u64 {
        self.0.coincidences
    }

    #[getter]
    fn accidentals_estimate(&self) -> f64 {
        self.0.accidentals_estimate
    }

    #[getter]
    fn infinite(&self) -> bool {
        self.0.infinite
    }
}

/// Sampled interferometric phase record.
#[pyclass(name = "PhaseSeries")]
struct PyPhaseSeries(phase::PhaseSeries);

#[pymethods]
impl PyPhaseSeries {
    #[getter]
    fn sample_rate_hz(&self) -> f64 {
        self.0.sample_rate_hz
    }

    fn __len__(&self) -> usize {
        self.0.wrapped_phase.len()
    }

    fn values(&self) -> Vec<f64> {
        self.0.wrapped_phase.clone()
    }

    #[getter]
    fn clipped_fraction(&self) -> f64 {
        self.0.clipped_fraction
    }
}

/// One-sided Welch PSD estimate.
#[pyclass(name = "PsdEstimate")]
struct PyPsdEstimate(phase::PsdEstimate);

#[pymethods]
impl PyPsdEstimate {
    fn frequencies(&self) -> Vec<f64> {
        self.0.frequencies.clone()
    }

    fn density(&self) -> Vec<f64> {
        self.0.density.clone()
    }

    fn bin_width_hz(&self) -> f64 {
        self.0.bin_width_hz()
    }

    fn integrated_power(&self) -> f64 {
        self.0.integrated_power()
    }

    #[getter]
    fn segments_used(&self) -> usize {
        self.0.segments_used
    }
}

// ---------------------------------------------------------------------------
// Physics and link budget
// ---------------------------------------------------------------------------

/// Optical power (W) carrying `mu` photons per clock at a wavelength.
#[pyfunction]
fn power_for_flux(mu: f64, clock_rate_hz: f64, wavelength_m: f64) -> PyResult<f64> {
    physics::power_for_flux(&physics::PhotonFluxSpec {
        mu,
        clock_rate_hz,
        wavelength_m,
    })
    .map_err(to_py)
}

/// Binary Shannon entropy H₂(p) in bits.
#[pyfunction]
fn binary_entropy(p: f64) -> PyResult<f64> {
    physics::binary_entropy(p).map_err(to_py)
}

/// End-to-end detection probability through fibre, receiver and detector.
#[pyfunction]
fn transmittance(
    channel: &PyChannel,
    length_km: f64,
    receiver_efficiency: f64,
    detector_efficiency: f64,
) -> PyResult<f64> {
    channel::transmittance(
        &channel.0,
        length_km,
        receiver_efficiency,
        detector_efficiency,
    )
    .map_err(to_py)
}

/// Chromatic-dispersion arrival spread D·L·Δλ in ps.
#[pyfunction]
fn dispersion_broadening(
    dispersion_ps_per_nm_km: f64,
    length_km: f64,
    filter_bandwidth_nm: f64,
) -> PyResult<f64> {
    channel::dispersion_broadening(dispersion_ps_per_nm_km, length_km, filter_bandwidth_nm)
        .map_err(to_py)
}

// ---------------------------------------------------------------------------
// Decoy-state BB84
// ---------------------------------------------------------------------------

/// `(gain, qber)` of a mean-photon-number `mu` pulse at transmittance eta.
#[pyfunction]
fn gain_and_qber(mu: f64, eta: f64, protocol: &PyProtocol) -> PyResult<(f64, f64)> {
    let g = decoy::gain_and_qber(mu, eta, &protocol.0).map_err(to_py)?;
    Ok((g.gain, g.qber))
}

/// Decoy-bounded secret key rate at transmittance eta.
#[pyfunction]
fn secret_key_rate(protocol: &PyProtocol, eta: f64) -> PyResult<PySkrResult> {
    decoy::secret_key_rate(&protocol.0, eta)
        .map(PySkrResult)
        .map_err(to_py)
}

/// Key-rate curve over a length grid, with the zero crossing bisected.
#[pyfunction]
fn sweep_distance(
    protocol: &PyProtocol,
    channel: &PyChannel,
    detector: &PyDetector,
    receiver_efficiency: f64,
    l_min_km: f64,
    l_max_km: f64,
    step_km: f64,
) -> PyResult<PySkrCurve> {
    decoy::sweep_distance(
        &protocol.0,
        &channel.0,
        &detector.0,
        receiver_efficiency,
        l_min_km,
        l_max_km,
        step_km,
    )
    .map(PySkrCurve)
    .map_err(to_py)
}

/// Winning `(mu, nu)` pair plus the `(mu, nu, rate_per_clock)` table.
type FluxRankingTuple = ((f64, f64), Vec<(f64, f64, f64)>);

/// Ranks every ordered (mu, nu) pair from the candidate fluxes; returns
/// the winner and the `(mu, nu, rate_per_clock)` table.
#[pyfunction]
fn optimize_flux(
    candidates: Vec<f64>,
    protocol: &PyProtocol,
    eta: f64,
) -> PyResult<FluxRankingTuple> {
    let ranking = decoy::optimize_flux(&candidates, &protocol.0, eta).map_err(to_py)?;
    let table = ranking
        .table
        .iter()
        .map(|c| (c.mu_signal, c.mu_decoy, c.skr.rate_per_clock))
        .collect();
    Ok((ranking.best, table))
}

/// Pulse-level Monte Carlo: `(gates, clicks, errors)` tallies.
#[pyfunction]
fn simulate_gates(
    mu: f64,
    eta: f64,
    protocol: &PyProtocol,
    n_gates: u64,
    seed: u64,
) -> PyResult<(u64, u64, u64)> {
    let t = decoy::simulate_gates(mu, eta, &protocol.0, n_gates, seed).map_err(to_py)?;
    Ok((t.gates, t.clicks, t.errors))
}

// ---------------------------------------------------------------------------
// Coincidences
// ---------------------------------------------------------------------------

/// Seeded pair-source acquisition over `duration_s`.
#[pyfunction]
fn simulate_pairs(source: &PyPairSource, duration_s: f64, seed: u64) -> PyResult<PyTimeTagStream> {
    timetag::simulate_pairs(&source.0, duration_s, seed)
        .map(PyTimeTagStream)
        .map_err(to_py)
}

/// All-pairs delay histogram between two channels.
#[pyfunction]
fn delay_histogram(
    stream: &PyTimeTagStream,
    channel_a: u32,
    channel_b: u32,
    bin_width_ps: u64,
    range_ps: u64,
) -> PyResult<PyDelayHistogram> {
    timetag::delay_histogram(&stream.0, channel_a, channel_b, bin_width_ps, range_ps)
        .map(PyDelayHistogram)
        .map_err(to_py)
}

/// CAR from a signal window and disjoint accidental windows
/// (`(start_ps, width_ps)` pairs).
#[pyfunction]
fn car(
    histogram: &PyDelayHistogram,
    signal_window: (i64, u64),
    accidental_windows: Vec<(i64, u64)>,
) -> PyResult<PyCarEstimate> {
    timetag::car(&histogram.0, signal_window, &accidental_windows)
        .map(PyCarEstimate)
        .map_err(to_py)
}

/// Poissonian accidental coincidence rate S_a·S_b·τ in 1/s.
#[pyfunction]
fn accidental_rate(singles_a_hz: f64, singles_b_hz: f64, window_s: f64) -> PyResult<f64> {
    timetag::accidental_rate(singles_a_hz, singles_b_hz, window_s).map_err(to_py)
}

/// Solves `(pair_rate, eta_signal, eta_idler)` from observed singles,
/// backgrounds and CAR in a coincidence window.
#[pyfunction]
fn calibrate_pair_source(
    singles_signal_hz: f64,
    singles_idler_hz: f64,
    background_signal_hz: f64,
    background_idler_hz: f64,
    car: f64,
    window_s: f64,
) -> PyResult<(f64, f64, f64)> {
    timetag::PairSourceParams::calibrate_to_observed(
        singles_signal_hz,
        singles_idler_hz,
        background_signal_hz,
        background_idler_hz,
        car,
        window_s,
    )
    .map_err(to_py)
}

/// Coincidence-window width covering dispersion on both arms plus
/// `coverage` sigmas of combined detector jitter, in ps.
#[pyfunction]
#[pyo3(signature = (channel, filter_bandwidths_nm, jitter_sigma_ps, coverage=4.0))]
fn window_recommendation(
    channel: &PyChannel,
    filter_bandwidths_nm: Vec<f64>,
    jitter_sigma_ps: f64,
    coverage: f64,
) -> PyResult<f64> {
    timetag::window_recommendation(&channel.0, &filter_bandwidths_nm, jitter_sigma_ps, coverage)
        .map_err(to_py)
}

// ---------------------------------------------------------------------------
// Phase metrology
// ---------------------------------------------------------------------------

/// Synthesizes wrapped interferometric phase with a plateau/roll-off/floor
/// spectrum plus tones (`(frequency_hz, power_rad2)` pairs).
#[pyfunction]
#[pyo3(signature = (duration_s, sample_rate_hz, seed, plateau_rad2_per_hz=0.0,
                    rolloff_exponent=0.0, corner_low_hz=0.0, corner_high_hz=0.0,
                    white_floor_rad2_per_hz=0.0, tones=vec![],
                    mean_phase_rad=std::f64::consts::FRAC_PI_2))]
#[allow(clippy::too_many_arguments)]
fn synthesize_phase_noise(
    duration_s: f64,
    sample_rate_hz: f64,
    seed: u64,
    plateau_rad2_per_hz: f64,
    rolloff_exponent: f64,
    corner_low_hz: f64,
    corner_high_hz: f64,
    white_floor_rad2_per_hz: f64,
    tones: Vec<(f64, f64)>,
    mean_phase_rad: f64,
) -> PyResult<PyPhaseSeries> {
    let spec = phase::PhaseNoiseSpec {
        plateau_rad2_per_hz,
        rolloff_exponent,
        corner_low_hz,
        corner_high_hz,
        white_floor_rad2_per_hz,
        tones,
        mean_phase_rad,
    };
    phase::synthesize_phase_noise(&spec, duration_s, sample_rate_hz, seed)
        .map(PyPhaseSeries)
        .map_err(to_py)
}

/// Welch PSD of a phase series; `overlap` defaults to half a segment.
#[pyfunction]
#[pyo3(signature = (series, segment_length, overlap=None))]
fn estimate_psd(
    series: &PyPhaseSeries,
    segment_length: usize,
    overlap: Option<usize>,
) -> PyResult<PyPsdEstimate> {
    phase::estimate_psd(
        &series.0,
        segment_length,
        overlap.unwrap_or(segment_length / 2),
    )
    .map(PyPsdEstimate)
    .map_err(to_py)
}

/// Spectral peaks above `threshold ×` the local median floor, as
/// `(frequency_hz, power_rad2)` pairs.
#[pyfunction]
fn detect_tones(psd: &PyPsdEstimate, threshold: f64) -> PyResult<Vec<(f64, f64)>> {
    Ok(phase::detect_tones(&psd.0, threshold)
        .map_err(to_py)?
        .into_iter()
        .map(|t| (t.frequency_hz, t.power_rad2))
        .collect())
}

// ---------------------------------------------------------------------------
// Polarization
// ---------------------------------------------------------------------------

/// Base QBER from a polarizer extinction ratio in dB.
#[pyfunction]
fn base_qber_from_extinction_db(extinction_db: f64) -> PyResult<f64> {
    polarization::base_qber_from_extinction_db(extinction_db).map_err(to_py)
}

/// QBER of a Stokes vector `(s1, s2, s3)` measured against a basis pole.
#[pyfunction]
fn qber_for_state(
    state_s: (f64, f64, f64),
    basis_s: (f64, f64, f64),
    base_error: f64,
) -> PyResult<f64> {
    polarization::qber_for_state(&state(state_s)?, &state(basis_s)?, base_error).map_err(to_py)
}

/// Brownian drift on the Poincaré sphere with optional step events
/// (`(time_s, magnitude_rad)`), sampled every `dt_s`. Returns
/// `(time_s, s1, s2, s3)` rows.
#[pyfunction]
#[pyo3(signature = (initial_s, diffusion_rate_rad2_per_s, duration_s, dt_s, seed, step_events=vec![]))]
fn simulate_drift(
    initial_s: (f64, f64, f64),
    diffusion_rate_rad2_per_s: f64,
    duration_s: f64,
    dt_s: f64,
    seed: u64,
    step_events: Vec<(f64, f64)>,
) -> PyResult<Vec<(f64, f64, f64, f64)>> {
    let process = polarization::DriftProcess {
        diffusion_rate_rad2_per_s,
        step_events: step_events
            .into_iter()
            .map(|(time_s, magnitude_rad)| polarization::StepEvent {
                time_s,
                magnitude_rad,
            })
            .collect(),
    };
    let timeline =
        polarization::simulate_drift(&process, &state(initial_s)?, duration_s, dt_s, seed)
            .map_err(to_py)?;
    Ok(timeline
        .iter()
        .map(|s| (s.time_s, s.state.s1, s.state.s2, s.state.s3))
        .collect())
}

/// Aligns a quantized 4-stage retarder stack from `input_s` onto
/// `target_s`; returns `(converged, evaluations, final_distance_rad)`.
#[pyfunction]
#[pyo3(signature = (input_s, target_s, quantization_rad=0.01, tolerance_rad=0.05, max_evaluations=500))]
fn align_epc(
    input_s: (f64, f64, f64),
    target_s: (f64, f64, f64),
    quantization_rad: f64,
    tolerance_rad: f64,
    max_evaluations: usize,
) -> PyResult<(bool, usize, f64)> {
    let stack = polarization::RetarderStack::epc(quantization_rad).map_err(to_py)?;
    let opts = polarization::AlignmentOptions {
        tolerance_rad,
        max_evaluations,
    };
    let outcome =
        polarization::align_gradient_descent(&stack, &state(input_s)?, &state(target_s)?, &opts)
            .map_err(to_py)?;
    Ok((
        outcome.converged,
        outcome.evaluations,
        outcome.final_distance_rad,
    ))
}

/// QBER point estimate with a 68 % interval from correct/wrong counts;
/// exact Clopper–Pearson below 100 counts. Returns
/// `(qber, low, high, exact)`.
#[pyfunction]
fn qber_from_counts(n_correct: u64, n_wrong: u64) -> PyResult<(f64, f64, f64, bool)> {
    let est = polarization::qber_from_counts(n_correct, n_wrong).map_err(to_py)?;
    Ok((est.qber, est.interval_low, est.interval_high, est.exact))
}

// ---------------------------------------------------------------------------
// Module definition
// ---------------------------------------------------------------------------

#[pymodule]
fn qlink(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyChannel>()?;
    m.add_class::<PyDetector>()?;
    m.add_class::<PyProtocol>()?;
    m.add_class::<PyPairSource>()?;
    m.add_class::<PySkrResult>()?;
    m.add_class::<PySkrCurve>()?;
    m.add_class::<PyTimeTagStream>()?;
    m.add_class::<PyDelayHistogram>()?;
    m.add_class::<PyCarEstimate>()?;
    m.add_class::<PyPhaseSeries>()?;
    m.add_class::<PyPsdEstimate>()?;

    m.add_function(wrap_pyfunction!(power_for_flux, m)?)?;
    m.add_function(wrap_pyfunction!(binary_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(transmittance, m)?)?;
    m.add_function(wrap_pyfunction!(dispersion_broadening, m)?)?;
    m.add_function(wrap_pyfunction!(gain_and_qber, m)?)?;
    m.add_function(wrap_pyfunction!(secret_key_rate, m)?)?;
    m.add_function(wrap_pyfunction!(sweep_distance, m)?)?;
    m.add_function(wrap_pyfunction!(optimize_flux, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_gates, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_pairs, m)?)?;
    m.add_function(wrap_pyfunction!(delay_histogram, m)?)?;
    m.add_function(wrap_pyfunction!(car, m)?)?;
    m.add_function(wrap_pyfunction!(accidental_rate, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate_pair_source, m)?)?;
    m.add_function(wrap_pyfunction!(window_recommendation, m)?)?;
    m.add_function(wrap_pyfunction!(synthesize_phase_noise, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_psd, m)?)?;
    m.add_function(wrap_pyfunction!(detect_tones, m)?)?;
    m.add_function(wrap_pyfunction!(base_qber_from_extinction_db, m)?)?;
    m.add_function(wrap_pyfunction!(qber_for_state, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_drift, m)?)?;
    m.add_function(wrap_pyfunction!(align_epc, m)?)?;
    m.add_function(wrap_pyfunction!(qber_from_counts, m)?)?;
    Ok(())
}
