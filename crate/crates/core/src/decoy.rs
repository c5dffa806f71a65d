//! Asymptotic decoy-state BB84 analysis.
//!
//! Implements the standard two-intensity (signal + weak decoy, with a
//! separately measured vacuum yield) bounds:
//!
//! - per-intensity gain and QBER under the Poissonian channel model
//!   `Q = Y0 + 1 − e^(−η·μ)` and `E·Q = e0·Y0 + e_opt·(1 − e^(−η·μ))`,
//! - the single-photon yield lower bound and error upper bound,
//! - the asymptotic secret key rate
//!   `R = max(0, q·{ −Q_μ·f·H2(E_μ) + Q1·[1 − H2(e1)] })`,
//! - distance sweeps with zero-crossing search, flux-pair ranking, and
//! - a pulse-level Monte Carlo oracle (`simulate_gates`) that tags every
//!   pulse with its true photon number so the analytic bounds can be
//!   validated against empirical per-photon-number yields and error rates.
//!
//! All rates are per clock cycle unless suffixed otherwise.

use crate::channel::{transmittance, ChannelParams, DetectorParams};
use crate::error::{Error, Result};
use crate::physics::binary_entropy;
use crate::rng::substream;
use rand::Rng;
use rayon::prelude::*;
use std::io::Write;

// ---------------------------------------------------------------------------
// Parameter records
// ---------------------------------------------------------------------------

/// Protocol and link-noise parameters of a decoy-state BB84 session.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolParams {
    /// Signal-state mean photon number μ (> decoy).
    pub mu_signal: f64,
    /// Decoy-state mean photon number ν (> 0).
    pub mu_decoy: f64,
    /// Clock (pulse repetition) rate in Hz.
    pub clock_rate_hz: f64,
    /// Sifting factor q (basis-match fraction; 1/2 for standard BB84).
    pub sifting_factor: f64,
    /// Error-correction inefficiency f ≥ 1 relative to the Shannon limit.
    pub ec_efficiency: f64,
    /// Intrinsic optical error probability e_opt of a detected signal
    /// photon (misalignment + finite extinction), in [0, 0.5].
    pub intrinsic_error: f64,
    /// Error probability of a background-only click, e0 (1/2 for a
    /// basis-independent background).
    pub vacuum_error: f64,
    /// Background yield Y0: probability of a click per gate with no photon
    /// present (dark + stray counts of all detectors, per clock cycle).
    pub background_yield: f64,
}

impl ProtocolParams {
    /// Checks the field invariants.
    pub fn validate(&self) -> Result<()> {
        if !(self.mu_decoy.is_finite() && self.mu_decoy > 0.0) {
            return Err(Error::domain(format!(
                "decoy flux must be > 0, got {}",
                self.mu_decoy
            )));
        }
        if !(self.mu_signal.is_finite() && self.mu_signal > self.mu_decoy) {
            return Err(Error::domain(format!(
                "signal flux must exceed decoy flux, got μ = {} vs ν = {}",
                self.mu_signal, self.mu_decoy
            )));
        }
        if !(self.clock_rate_hz.is_finite() && self.clock_rate_hz > 0.0) {
            return Err(Error::domain("clock rate must be > 0"));
        }
        if !(self.sifting_factor > 0.0 && self.sifting_factor <= 1.0) {
            return Err(Error::domain("sifting factor must lie in (0, 1]"));
        }
        if !(self.ec_efficiency.is_finite() && self.ec_efficiency >= 1.0) {
            return Err(Error::domain("error-correction efficiency must be ≥ 1"));
        }
        if !(0.0..=0.5).contains(&self.intrinsic_error) {
            return Err(Error::domain("intrinsic error must lie in [0, 0.5]"));
        }
        if !(0.0..=1.0).contains(&self.vacuum_error) {
            return Err(Error::domain("vacuum error must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.background_yield) {
            return Err(Error::domain("background yield must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Copy with both fluxes replaced (used by the flux optimizer).
    fn with_fluxes(&self, mu: f64, nu: f64) -> ProtocolParams {
        ProtocolParams {
            mu_signal: mu,
            mu_decoy: nu,
            ..self.clone()
        }
    }
}

/// Gain (detection probability per gate) and QBER of one intensity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainQber {
    /// Q: probability of a click per emitted pulse.
    pub gain: f64,
    /// E: error fraction among clicks.
    pub qber: f64,
}

/// Single-photon yield/error bounds from the two measured intensities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YieldBounds {
    /// Lower bound on the single-photon yield Y1 (clamped ≥ 0).
    pub y1_lower: f64,
    /// Upper bound on the single-photon error rate e1 (clamped to
    /// [0, 0.5]).
    pub e1_upper: f64,
    /// True when `y1_lower` = 0 leaves e1 without a finite bound; the
    /// reported `e1_upper` is then the conservative 0.5.
    pub e1_unbounded: bool,
}

/// Full decoy-state evaluation at one operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkrResult {
    /// Secret key rate in bits per clock cycle, clamped to ≥ 0.
    pub rate_per_clock: f64,
    /// The same rate before clamping (diagnostic; negative when the error
    /// correction cost exceeds the single-photon contribution).
    pub rate_unclamped: f64,
    /// Gain/QBER of the signal intensity.
    pub signal: GainQber,
    /// Gain/QBER of the decoy intensity.
    pub decoy: GainQber,
    /// Lower bound on the single-photon yield.
    pub y1_lower: f64,
    /// Upper bound on the single-photon error rate.
    pub e1_upper: f64,
    /// Whether the e1 bound degenerated to the conservative 0.5.
    pub e1_unbounded: bool,
    /// Single-photon gain Q1 = Y1_lower · μ · e^(−μ).
    pub q1: f64,
}

// ---------------------------------------------------------------------------
// Analytic model
// ---------------------------------------------------------------------------

/// Gain and QBER of a Poissonian source of mean photon number `mu` through
/// a channel of overall detection probability `eta`:
///
/// `Q = Y0 + 1 − e^(−η·μ)`,  `E·Q = e0·Y0 + e_opt·(1 − e^(−η·μ))`.
///
/// When `Q` is exactly zero (no background and vacuum pulses) the QBER is
/// reported as `e0` by the continuity convention.
pub fn gain_and_qber(mu: f64, eta: f64, params: &ProtocolParams) -> Result<GainQber> {
    if !(mu.is_finite() && mu >= 0.0) {
        return Err(Error::domain(format!(
            "mean photon number must be ≥ 0, got {mu}"
        )));
    }
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::domain(format!(
            "detection probability must lie in [0, 1], got {eta}"
        )));
    }
    let y0 = params.background_yield;
    let signal_part = -(-eta * mu).exp_m1(); // 1 − e^(−η·μ), accurate for small η·μ
    let gain = y0 + signal_part;
    let qber = if gain > 0.0 {
        (params.vacuum_error * y0 + params.intrinsic_error * signal_part) / gain
    } else {
        params.vacuum_error
    };
    Ok(GainQber { gain, qber })
}

/// Single-photon yield and error bounds from signal and decoy intensities
/// (vacuum + weak decoy estimate):
///
/// `Y1 ≥ (μ/(μν−ν²)) · [Q_ν·e^ν − Q_μ·e^μ·(ν²/μ²) − ((μ²−ν²)/μ²)·Y0]`
/// `e1 ≤ (E_ν·Q_ν·e^ν − e0·Y0) / (Y1_lower·ν)`
///
/// `y0` is the separately measured background yield; `e0` is taken from
/// `vacuum_error` at the call sites via [`secret_key_rate`], here fixed to
/// 1/2 by the dedicated parameter.
pub fn yield_bounds(
    signal: &GainQber,
    decoy: &GainQber,
    mu: f64,
    nu: f64,
    y0: f64,
    e0: f64,
) -> Result<YieldBounds> {
    if !(nu.is_finite() && nu > 0.0 && mu.is_finite()) || mu <= nu {
        return Err(Error::domain(format!(
            "yield bounds need μ > ν > 0, got μ = {mu}, ν = {nu}"
        )));
    }
    if !(0.0..=1.0).contains(&y0) || !(0.0..=1.0).contains(&e0) {
        return Err(Error::domain("Y0 and e0 must lie in [0, 1]"));
    }
    let prefactor = mu / (mu * nu - nu * nu);
    let bracket = decoy.gain * nu.exp()
        - signal.gain * mu.exp() * (nu * nu) / (mu * mu)
        - ((mu * mu - nu * nu) / (mu * mu)) * y0;
    let y1_lower = (prefactor * bracket).max(0.0);

    let (e1_upper, e1_unbounded) = if y1_lower > 0.0 {
        let numerator = decoy.qber * decoy.gain * nu.exp() - e0 * y0;
        ((numerator / (y1_lower * nu)).clamp(0.0, 0.5), false)
    } else {
        (0.5, true)
    };
    Ok(YieldBounds {
        y1_lower,
        e1_upper,
        e1_unbounded,
    })
}

/// Asymptotic decoy-state secret key rate at overall detection probability
/// `eta`:
///
/// `R = max(0, q·{ −Q_μ·f·H2(E_μ) + Q1·[1 − H2(e1_upper)] })`
///
/// with `Q1 = Y1_lower · μ · e^(−μ)`. All intermediates are reported.
pub fn secret_key_rate(params: &ProtocolParams, eta: f64) -> Result<SkrResult> {
    params.validate()?;
    let signal = gain_and_qber(params.mu_signal, eta, params)?;
    let decoy = gain_and_qber(params.mu_decoy, eta, params)?;
    let bounds = yield_bounds(
        &signal,
        &decoy,
        params.mu_signal,
        params.mu_decoy,
        params.background_yield,
        params.vacuum_error,
    )?;
    let q1 = bounds.y1_lower * params.mu_signal * (-params.mu_signal).exp();
    let rate_unclamped = params.sifting_factor
        * (-signal.gain * params.ec_efficiency * binary_entropy(signal.qber)?
            + q1 * (1.0 - binary_entropy(bounds.e1_upper)?));
    Ok(SkrResult {
        rate_per_clock: rate_unclamped.max(0.0),
        rate_unclamped,
        signal,
        decoy,
        y1_lower: bounds.y1_lower,
        e1_upper: bounds.e1_upper,
        e1_unbounded: bounds.e1_unbounded,
        q1,
    })
}

// ---------------------------------------------------------------------------
// Distance sweep
// ---------------------------------------------------------------------------

/// One evaluated point of a distance sweep.
#[derive(Debug, Clone)]
pub struct SkrCurvePoint {
    /// Fibre length in km.
    pub length_km: f64,
    /// Overall detection probability at this length.
    pub eta: f64,
    /// Full decoy-state evaluation.
    pub skr: SkrResult,
}

/// Distance-indexed SKR curve with the positivity boundary.
#[derive(Debug, Clone)]
pub struct SkrCurve {
    /// Evaluated grid points in increasing length order.
    pub points: Vec<SkrCurvePoint>,
    /// Largest length with R > 0, refined by bisection to 0.1 km; `None`
    /// when the grid does not bracket a positive-to-zero transition.
    pub zero_crossing_km: Option<f64>,
}

/// Exact CSV header emitted for SKR results.
pub const SKR_CSV_HEADER: &str =
    "length_km,eta,Q_mu,E_mu,Q_nu,E_nu,Y1_lower,e1_upper,Q1,skr_bits_per_clock,skr_bits_per_s";

impl SkrCurve {
    /// Writes the curve as CSV with the fixed [`SKR_CSV_HEADER`] columns.
    pub fn write_csv<W: Write>(&self, clock_rate_hz: f64, mut w: W) -> Result<()> {
        writeln!(w, "{SKR_CSV_HEADER}")?;
        for p in &self.points {
            let r = &p.skr;
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{}",
                p.length_km,
                p.eta,
                r.signal.gain,
                r.signal.qber,
                r.decoy.gain,
                r.decoy.qber,
                r.y1_lower,
                r.e1_upper,
                r.q1,
                r.rate_per_clock,
                r.rate_per_clock * clock_rate_hz,
            )?;
        }
        Ok(())
    }
}

/// Sweeps the secret key rate over fibre length from `l_min` to `l_max`
/// (inclusive) in steps of `step` km, and locates the positivity boundary.
///
/// `eta(L)` combines the channel attenuation with the receiver and detector
/// efficiencies via [`transmittance`]. Points are evaluated independently;
/// the output is identical regardless of evaluation order.
pub fn sweep_distance(
    params: &ProtocolParams,
    channel: &ChannelParams,
    detector: &DetectorParams,
    receiver_eff: f64,
    l_min: f64,
    l_max: f64,
    step: f64,
) -> Result<SkrCurve> {
    params.validate()?;
    detector.validate()?;
    if !(l_min.is_finite() && l_max.is_finite() && l_min >= 0.0 && l_min <= l_max) {
        return Err(Error::domain(format!(
            "sweep needs 0 ≤ l_min ≤ l_max, got [{l_min}, {l_max}]"
        )));
    }
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::domain(format!("sweep step must be > 0, got {step}")));
    }

    let n_points = ((l_max - l_min) / step + 1e-9).floor() as usize + 1;
    let eval = |length: f64| -> Result<SkrCurvePoint> {
        let eta = transmittance(channel, length, receiver_eff, detector.efficiency)?;
        Ok(SkrCurvePoint {
            length_km: length,
            eta,
            skr: secret_key_rate(params, eta)?,
        })
    };

    let points: Vec<SkrCurvePoint> = (0..n_points)
        .into_par_iter()
        .map(|i| eval(l_min + i as f64 * step))
        .collect::<Result<Vec<_>>>()?;

    // Find the last positive→zero transition and refine it by bisection.
    let mut zero_crossing_km = None;
    for w in points.windows(2).rev() {
        if w[0].skr.rate_per_clock > 0.0 && w[1].skr.rate_per_clock == 0.0 {
            let (mut lo, mut hi) = (w[0].length_km, w[1].length_km);
            while hi - lo > 0.1 {
                let mid = 0.5 * (lo + hi);
                if eval(mid)?.skr.rate_per_clock > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            zero_crossing_km = Some(0.5 * (lo + hi));
            break;
        }
    }
    Ok(SkrCurve {
        points,
        zero_crossing_km,
    })
}

// ---------------------------------------------------------------------------
// Flux optimization
// ---------------------------------------------------------------------------

/// One evaluated (signal, decoy) flux pair.
#[derive(Debug, Clone)]
pub struct FluxCandidate {
    /// Signal-state mean photon number of the pair.
    pub mu_signal: f64,
    /// Decoy-state mean photon number of the pair.
    pub mu_decoy: f64,
    /// Full evaluation at these fluxes.
    pub skr: SkrResult,
}

/// Ranking of all admissible flux pairs from a candidate list.
#[derive(Debug, Clone)]
pub struct FluxRanking {
    /// The (μ, ν) pair with the highest rate (ties broken towards smaller
    /// fluxes, deterministically).
    pub best: (f64, f64),
    /// All evaluated pairs, sorted by decreasing rate (same tie-break).
    pub table: Vec<FluxCandidate>,
}

impl FluxRanking {
    /// The evaluation for a specific pair, if it was in the candidate set.
    pub fn rate_for(&self, mu: f64, nu: f64) -> Option<&FluxCandidate> {
        self.table
            .iter()
            .find(|c| c.mu_signal == mu && c.mu_decoy == nu)
    }
}

/// Evaluates [`secret_key_rate`] for every ordered candidate pair with
/// μ > ν and returns the argmax plus the full table.
pub fn optimize_flux(candidates: &[f64], params: &ProtocolParams, eta: f64) -> Result<FluxRanking> {
    let mut fluxes: Vec<f64> = candidates.to_vec();
    for &f in &fluxes {
        if !(f.is_finite() && f > 0.0) {
            return Err(Error::domain(format!(
                "candidate fluxes must be > 0, got {f}"
            )));
        }
    }
    fluxes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    fluxes.dedup();
    if fluxes.len() < 2 {
        return Err(Error::domain(
            "flux optimization needs at least two distinct candidate fluxes",
        ));
    }

    let mut table = Vec::new();
    for (i, &mu) in fluxes.iter().enumerate() {
        for &nu in &fluxes[..i] {
            let skr = secret_key_rate(&params.with_fluxes(mu, nu), eta)?;
            table.push(FluxCandidate {
                mu_signal: mu,
                mu_decoy: nu,
                skr,
            });
        }
    }
    table.sort_by(|a, b| {
        b.skr
            .rate_per_clock
            .partial_cmp(&a.skr.rate_per_clock)
            .unwrap()
            .then(a.mu_signal.partial_cmp(&b.mu_signal).unwrap())
            .then(a.mu_decoy.partial_cmp(&b.mu_decoy).unwrap())
    });
    let best = (table[0].mu_signal, table[0].mu_decoy);
    Ok(FluxRanking { best, table })
}

// ---------------------------------------------------------------------------
// Monte Carlo oracle
// ---------------------------------------------------------------------------

/// Largest photon number tallied individually; larger pulses fall into the
/// overflow bucket at index `PHOTON_NUMBER_BUCKETS - 1`.
pub const PHOTON_NUMBER_BUCKETS: usize = 18;

/// Per-photon-number tallies from the pulse-level Monte Carlo.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PhotonNumberTally {
    /// Pulses emitted with this photon number.
    pub gates: u64,
    /// Pulses of this photon number that produced a click.
    pub clicks: u64,
    /// Clicks of this photon number recorded as errors.
    pub errors: u64,
}

/// Aggregated tallies of a [`simulate_gates`] run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GateTallies {
    /// Total simulated gates.
    pub gates: u64,
    /// Total clicks.
    pub clicks: u64,
    /// Total errors.
    pub errors: u64,
    /// Tallies resolved by true photon number (index = n, last bucket is
    /// overflow for n ≥ `PHOTON_NUMBER_BUCKETS − 1`).
    pub by_photon_number: Vec<PhotonNumberTally>,
}

impl GateTallies {
    fn zero() -> Self {
        GateTallies {
            gates: 0,
            clicks: 0,
            errors: 0,
            by_photon_number: vec![PhotonNumberTally::default(); PHOTON_NUMBER_BUCKETS],
        }
    }

    fn merge(mut self, other: GateTallies) -> GateTallies {
        self.gates += other.gates;
        self.clicks += other.clicks;
        self.errors += other.errors;
        for (a, b) in self
            .by_photon_number
            .iter_mut()
            .zip(&other.by_photon_number)
        {
            a.gates += b.gates;
            a.clicks += b.clicks;
            a.errors += b.errors;
        }
        self
    }

    /// Empirical gain Q = clicks/gates.
    pub fn gain(&self) -> f64 {
        self.clicks as f64 / self.gates as f64
    }

    /// Standard error of the empirical gain.
    pub fn gain_se(&self) -> f64 {
        let q = self.gain();
        (q * (1.0 - q) / self.gates as f64).sqrt()
    }

    /// Empirical QBER E = errors/clicks (0 when there were no clicks).
    pub fn qber(&self) -> f64 {
        if self.clicks == 0 {
            0.0
        } else {
            self.errors as f64 / self.clicks as f64
        }
    }

    /// Standard error of the empirical QBER.
    pub fn qber_se(&self) -> f64 {
        if self.clicks == 0 {
            return 0.0;
        }
        let e = self.qber();
        (e * (1.0 - e) / self.clicks as f64).sqrt()
    }

    /// Empirical yield Yn and its standard error for photon number `n`.
    pub fn yield_for(&self, n: usize) -> Option<(f64, f64)> {
        let t = self.by_photon_number.get(n)?;
        if t.gates == 0 {
            return None;
        }
        let y = t.clicks as f64 / t.gates as f64;
        Some((y, (y * (1.0 - y) / t.gates as f64).sqrt()))
    }

    /// Empirical error rate en and its standard error for photon number
    /// `n`.
    pub fn error_for(&self, n: usize) -> Option<(f64, f64)> {
        let t = self.by_photon_number.get(n)?;
        if t.clicks == 0 {
            return None;
        }
        let e = t.errors as f64 / t.clicks as f64;
        Some((e, (e * (1.0 - e) / t.clicks as f64).sqrt()))
    }
}

/// Gates per deterministic Monte Carlo chunk; each chunk draws from its own
/// seed substream so results do not depend on worker count.
const GATES_PER_CHUNK: u64 = 1 << 20;

/// Pulse-level Monte Carlo of `n_gates` clock cycles at mean photon number
/// `mu` through a channel of overall detection probability `eta`.
///
/// Per gate: the photon number is Poissonian with mean `mu`; each photon
/// survives independently with probability `eta`; an independent background
/// click occurs with probability `Y0`. A click stemming from at least one
/// surviving photon errs with probability `e_opt`, a background-only click
/// with probability `e0`. Identical seeds give identical tallies for any
/// worker count.
pub fn simulate_gates(
    mu: f64,
    eta: f64,
    params: &ProtocolParams,
    n_gates: u64,
    seed: u64,
) -> Result<GateTallies> {
    if !(mu.is_finite() && mu >= 0.0) {
        return Err(Error::domain(format!(
            "mean photon number must be ≥ 0, got {mu}"
        )));
    }
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::domain(format!(
            "detection probability must lie in [0, 1], got {eta}"
        )));
    }
    if n_gates == 0 {
        return Err(Error::domain("must simulate at least one gate"));
    }
    params.validate()?;

    let n_chunks = n_gates.div_ceil(GATES_PER_CHUNK);
    let tallies = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let gates = GATES_PER_CHUNK.min(n_gates - chunk * GATES_PER_CHUNK);
            simulate_chunk(mu, eta, params, gates, seed, chunk)
        })
        .reduce(GateTallies::zero, GateTallies::merge);
    Ok(tallies)
}

/// Simulates one deterministic chunk (substream = chunk index).
fn simulate_chunk(
    mu: f64,
    eta: f64,
    params: &ProtocolParams,
    gates: u64,
    seed: u64,
    chunk: u64,
) -> GateTallies {
    let mut rng = substream(seed, chunk);
    let mut out = GateTallies::zero();
    out.gates = gates;

    let y0 = params.background_yield;
    let e_opt = params.intrinsic_error;
    let e0 = params.vacuum_error;

    // Click probability per photon number: 1 − (1−η)^n, tabulated.
    let miss = 1.0 - eta;
    let mut p_click: [f64; 64] = [0.0; 64];
    for (n, p) in p_click.iter_mut().enumerate() {
        *p = 1.0 - miss.powi(n as i32);
    }

    // Small-μ Poisson sampling by one-uniform inverse-CDF walk; large μ
    // falls back to the library sampler (tests only).
    let exp_neg_mu = (-mu).exp();
    let large_mu = mu >= 12.0;
    let poisson = if large_mu {
        Some(rand_distr::Poisson::new(mu).expect("validated μ"))
    } else {
        None
    };

    for _ in 0..gates {
        let n: u64 = if mu == 0.0 {
            0
        } else if let Some(p) = &poisson {
            rng.sample(*p) as u64
        } else {
            let u: f64 = rng.gen();
            let mut p = exp_neg_mu;
            let mut cum = p;
            let mut n = 0u64;
            while u > cum && n < 512 {
                n += 1;
                p *= mu / n as f64;
                cum += p;
            }
            n
        };

        let signal_click = if n == 0 {
            false
        } else {
            let p = if (n as usize) < p_click.len() {
                p_click[n as usize]
            } else {
                1.0 - miss.powi(n as i32)
            };
            rng.gen::<f64>() < p
        };
        let background_click = rng.gen::<f64>() < y0;
        let click = signal_click || background_click;

        let bucket = (n as usize).min(PHOTON_NUMBER_BUCKETS - 1);
        out.by_photon_number[bucket].gates += 1;
        if click {
            out.clicks += 1;
            out.by_photon_number[bucket].clicks += 1;
            let p_err = if signal_click { e_opt } else { e0 };
            if rng.gen::<f64>() < p_err {
                out.errors += 1;
                out.by_photon_number[bucket].errors += 1;
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
