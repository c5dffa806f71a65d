//! Time-tagged single-photon streams and coincidence analysis.
//!
//! Provides:
//!
//! - [`TimeTagStream`]: per-channel picosecond timestamp sequences,
//! - [`simulate_pairs`]: a seeded pair-source model with independent arm
//!   survival, relative offset, Gaussian jitter, uniform dispersion
//!   broadening and Poisson backgrounds,
//! - [`delay_histogram`]: all-pairs cross-channel delay histograms via a
//!   linear two-pointer sweep,
//! - [`car`]: coincidence-to-accidental ratio from a signal window and
//!   disjoint accidental side windows,
//! - [`accidental_rate`] and [`window_recommendation`]: analytic
//!   cross-checks for accidentals and coincidence-window sizing,
//! - bit-exact binary tag files (`QTT1`) plus a CSV interchange format.
//!
//! Dispersion spread is modelled as uniform over ±Δt/2 per arm (flat
//! filter passband); delays are accumulated over all pairs within range
//! rather than nearest neighbours, which matches the accidental model
//! S_a·S_b·τ at low rates. Multi-pair emissions are neglected.

use crate::channel::{dispersion_broadening, ChannelParams};
use crate::error::{Error, Result};
use crate::rng::substream;
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use std::io::{Read, Write};

/// Conventional channel id for the signal arm.
pub const SIGNAL_CHANNEL: u32 = 0;
/// Conventional channel id for the idler arm.
pub const IDLER_CHANNEL: u32 = 1;
/// Default jitter coverage factor for [`window_recommendation`].
pub const DEFAULT_JITTER_COVERAGE: f64 = 4.0;
/// Default delay-histogram bin width in ps.
pub const DEFAULT_BIN_WIDTH_PS: u64 = 100;

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

/// One detector channel of a tag stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagChannel {
    /// Channel identifier.
    pub id: u32,
    /// Detection times in ps, strictly increasing.
    pub timestamps_ps: Vec<u64>,
}

/// A multi-channel time-tag acquisition.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeTagStream {
    /// Acquisition duration in seconds.
    pub duration_s: f64,
    /// Channels in ascending id order.
    pub channels: Vec<TagChannel>,
}

impl TimeTagStream {
    /// Checks the field invariants.
    pub fn validate(&self) -> Result<()> {
        if !(self.duration_s.is_finite() && self.duration_s >= 0.0) {
            return Err(Error::domain("duration must be finite and ≥ 0"));
        }
        let duration_ps = (self.duration_s * 1e12).round() as u128;
        let mut seen = std::collections::HashSet::new();
        for ch in &self.channels {
            if !seen.insert(ch.id) {
                return Err(Error::domain(format!("duplicate channel id {}", ch.id)));
            }
            for pair in ch.timestamps_ps.windows(2) {
                if pair[1] <= pair[0] {
                    return Err(Error::domain(format!(
                        "channel {} timestamps must be strictly increasing",
                        ch.id
                    )));
                }
            }
            if let Some(&last) = ch.timestamps_ps.last() {
                if u128::from(last) > duration_ps {
                    return Err(Error::domain(format!(
                        "channel {} timestamp {last} exceeds the acquisition duration",
                        ch.id
                    )));
                }
            }
        }
        Ok(())
    }

    /// Timestamps of the channel with the given id.
    pub fn channel(&self, id: u32) -> Result<&[u64]> {
        self.channels
            .iter()
            .find(|c| c.id == id)
            .map(|c| c.timestamps_ps.as_slice())
            .ok_or_else(|| Error::domain(format!("channel {id} not present in the stream")))
    }

    /// Total number of tags across all channels.
    pub fn total_tags(&self) -> u64 {
        self.channels
            .iter()
            .map(|c| c.timestamps_ps.len() as u64)
            .sum()
    }

    /// Empirical singles rate of a channel in Hz.
    pub fn singles_rate_hz(&self, id: u32) -> Result<f64> {
        if self.duration_s <= 0.0 {
            return Err(Error::domain("singles rate needs a positive duration"));
        }
        Ok(self.channel(id)?.len() as f64 / self.duration_s)
    }
}

/// Photon-pair source and detection-chain parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSourceParams {
    /// Pair emission rate at the source in pairs/s (≥ 0).
    pub pair_rate_hz: f64,
    /// End-to-end signal-arm transmittance in [0, 1].
    pub eta_signal: f64,
    /// End-to-end idler-arm transmittance in [0, 1].
    pub eta_idler: f64,
    /// Background (dark + stray) count rate on the signal channel in Hz.
    pub background_signal_hz: f64,
    /// Background count rate on the idler channel in Hz.
    pub background_idler_hz: f64,
    /// Fixed idler-minus-signal arrival offset in ps.
    pub offset_ps: i64,
    /// Full dispersion broadening of the signal arm in ps (uniform ±Δt/2).
    pub broadening_signal_ps: f64,
    /// Full dispersion broadening of the idler arm in ps (uniform ±Δt/2).
    pub broadening_idler_ps: f64,
    /// Combined instrument timing jitter σ in ps, applied per detection.
    pub jitter_sigma_ps: f64,
}

impl PairSourceParams {
    /// Checks the field invariants.
    pub fn validate(&self) -> Result<()> {
        for (label, v) in [
            ("pair rate", self.pair_rate_hz),
            ("signal background", self.background_signal_hz),
            ("idler background", self.background_idler_hz),
            ("signal broadening", self.broadening_signal_ps),
            ("idler broadening", self.broadening_idler_ps),
            ("jitter sigma", self.jitter_sigma_ps),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::domain(format!("{label} must be finite and ≥ 0")));
            }
        }
        for (label, v) in [("signal", self.eta_signal), ("idler", self.eta_idler)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::domain(format!(
                    "{label} transmittance must lie in [0, 1]"
                )));
            }
        }
        Ok(())
    }

    /// Solves pair rate and arm transmittances from observable rates.
    ///
    /// Given total singles S_a, S_b over backgrounds b_a, b_b, a CAR value
    /// and the coincidence window τ, the pair contributions are
    /// P = S − b per arm, the accidental rate is S_a·S_b·τ, and the true
    /// coincidence rate is (CAR − 1)·S_a·S_b·τ = R·η_s·η_i. Combined with
    /// P_a = R·η_s and P_b = R·η_i this fixes
    /// `R = P_a·P_b / ((CAR − 1)·S_a·S_b·τ)`.
    pub fn calibrate_to_observed(
        singles_signal_hz: f64,
        singles_idler_hz: f64,
        background_signal_hz: f64,
        background_idler_hz: f64,
        car: f64,
        window_s: f64,
    ) -> Result<(f64, f64, f64)> {
        if !car.is_finite() || car <= 1.0 {
            return Err(Error::domain("calibration requires CAR > 1"));
        }
        if !window_s.is_finite() || window_s <= 0.0 {
            return Err(Error::domain("coincidence window must be > 0"));
        }
        let p_a = singles_signal_hz - background_signal_hz;
        let p_b = singles_idler_hz - background_idler_hz;
        if !(p_a > 0.0 && p_b > 0.0) {
            return Err(Error::domain(
                "singles must exceed backgrounds on both channels",
            ));
        }
        let true_rate = (car - 1.0) * singles_signal_hz * singles_idler_hz * window_s;
        let pair_rate = p_a * p_b / true_rate;
        Ok((pair_rate, p_a / pair_rate, p_b / pair_rate))
    }
}

/// Cross-channel delay histogram.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DelayHistogram {
    /// Bin width in ps.
    pub bin_width_ps: u64,
    /// Half-range in ps: delays span [−range, +range).
    pub range_ps: u64,
    /// Counts per bin.
    pub counts: Vec<u64>,
    /// Total tags on the first (reference) channel.
    pub singles_a: u64,
    /// Total tags on the second channel.
    pub singles_b: u64,
}

impl DelayHistogram {
    /// Centre of bin `i` in ps.
    pub fn bin_center_ps(&self, i: usize) -> f64 {
        -(self.range_ps as f64) + (i as f64 + 0.5) * self.bin_width_ps as f64
    }

    /// Index and centre of the most populated bin (lowest index on ties);
    /// `None` when the histogram is empty.
    pub fn peak(&self) -> Option<(usize, f64, u64)> {
        let (idx, &count) = self
            .counts
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))?;
        if count == 0 {
            return None;
        }
        Some((idx, self.bin_center_ps(idx), count))
    }

    /// Sum of counts over bins whose centre lies in
    /// `[start_ps, start_ps + width_ps)`.
    pub fn count_in_window(&self, start_ps: i64, width_ps: u64) -> u64 {
        let end = start_ps as f64 + width_ps as f64;
        self.counts
            .iter()
            .enumerate()
            .filter(|(i, _)| {
                let c = self.bin_center_ps(*i);
                c >= start_ps as f64 && c < end
            })
            .map(|(_, &c)| c)
            .sum()
    }

    /// Total in-range counts.
    pub fn total_counts(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Writes the histogram as CSV with header `delay_ps,counts`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "delay_ps,counts")?;
        for (i, &c) in self.counts.iter().enumerate() {
            writeln!(w, "{},{}", self.bin_center_ps(i), c)?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

/// Draws a Poisson count for `rate_hz · duration_s` events.
fn poisson_count(rate_hz: f64, duration_s: f64, rng: &mut impl Rng) -> u64 {
    let lambda = rate_hz * duration_s;
    if lambda <= 0.0 {
        return 0;
    }
    Poisson::new(lambda).expect("positive lambda").sample(rng) as u64
}

/// Simulates a pair-source acquisition.
///
/// Pair emissions are Poisson at the source rate; each photon survives its
/// arm independently, so the emissions split into three thinned Poisson
/// classes (both survive, signal only, idler only). Surviving photons are
/// timestamped at the emission time plus the per-arm offset, a Gaussian
/// jitter of the configured σ and a uniform dispersion spread over
/// ±broadening/2; tags pushed outside the acquisition are dropped.
/// Independent Poisson backgrounds are added per channel, each channel is
/// sorted, and simultaneous tags are separated by 1 ps to keep timestamps
/// strictly increasing. Identical seeds give identical streams.
pub fn simulate_pairs(
    params: &PairSourceParams,
    duration_s: f64,
    seed: u64,
) -> Result<TimeTagStream> {
    params.validate()?;
    if !(duration_s > 0.0 && duration_s.is_finite()) {
        return Err(Error::domain("duration must be > 0"));
    }
    let duration_ps = (duration_s * 1e12).round() as u64;
    if duration_ps == 0 {
        return Err(Error::domain("duration must be at least 1 ps"));
    }

    let mut signal: Vec<u64> = Vec::new();
    let mut idler: Vec<u64> = Vec::new();

    // Timestamp = emission + offset + jitter + uniform dispersion spread,
    // dropped when pushed outside the acquisition.
    let place = |t: u64,
                 offset: i64,
                 broadening: f64,
                 jitter: f64,
                 rng: &mut rand_chacha::ChaCha8Rng|
     -> Option<u64> {
        let mut shift = offset as f64;
        if jitter > 0.0 {
            shift += rng.sample::<f64, _>(StandardNormal) * jitter;
        }
        if broadening > 0.0 {
            shift += rng.gen_range(-0.5 * broadening..0.5 * broadening);
        }
        let ts = t as i128 + shift.round() as i128;
        if ts >= 0 && ts <= duration_ps as i128 {
            Some(ts as u64)
        } else {
            None
        }
    };

    // Class 0: both photons survive.
    {
        let mut rng = substream(seed, 0);
        let rate = params.pair_rate_hz * params.eta_signal * params.eta_idler;
        let n = poisson_count(rate, duration_s, &mut rng);
        signal.reserve(n as usize);
        idler.reserve(n as usize);
        for _ in 0..n {
            let t = rng.gen_range(0..duration_ps);
            if let Some(ts) = place(
                t,
                0,
                params.broadening_signal_ps,
                params.jitter_sigma_ps,
                &mut rng,
            ) {
                signal.push(ts);
            }
            if let Some(ts) = place(
                t,
                params.offset_ps,
                params.broadening_idler_ps,
                params.jitter_sigma_ps,
                &mut rng,
            ) {
                idler.push(ts);
            }
        }
    }
    // Class 1: signal photon survives alone.
    {
        let mut rng = substream(seed, 1);
        let rate = params.pair_rate_hz * params.eta_signal * (1.0 - params.eta_idler);
        let n = poisson_count(rate, duration_s, &mut rng);
        signal.reserve(n as usize);
        for _ in 0..n {
            let t = rng.gen_range(0..duration_ps);
            if let Some(ts) = place(
                t,
                0,
                params.broadening_signal_ps,
                params.jitter_sigma_ps,
                &mut rng,
            ) {
                signal.push(ts);
            }
        }
    }
    // Class 2: idler photon survives alone.
    {
        let mut rng = substream(seed, 2);
        let rate = params.pair_rate_hz * (1.0 - params.eta_signal) * params.eta_idler;
        let n = poisson_count(rate, duration_s, &mut rng);
        idler.reserve(n as usize);
        for _ in 0..n {
            let t = rng.gen_range(0..duration_ps);
            if let Some(ts) = place(
                t,
                params.offset_ps,
                params.broadening_idler_ps,
                params.jitter_sigma_ps,
                &mut rng,
            ) {
                idler.push(ts);
            }
        }
    }
    // Classes 3/4: uniform Poisson backgrounds.
    for (stream_idx, rate, out) in [
        (3u64, params.background_signal_hz, &mut signal),
        (4u64, params.background_idler_hz, &mut idler),
    ] {
        let mut rng = substream(seed, stream_idx);
        let n = poisson_count(rate, duration_s, &mut rng);
        out.reserve(n as usize);
        for _ in 0..n {
            out.push(rng.gen_range(0..duration_ps));
        }
    }

    let finalize = |mut tags: Vec<u64>| -> Vec<u64> {
        tags.sort_unstable();
        for i in 1..tags.len() {
            if tags[i] <= tags[i - 1] {
                tags[i] = tags[i - 1] + 1;
            }
        }
        while tags.last().is_some_and(|&t| t > duration_ps) {
            tags.pop();
        }
        tags
    };

    let stream = TimeTagStream {
        duration_s,
        channels: vec![
            TagChannel {
                id: SIGNAL_CHANNEL,
                timestamps_ps: finalize(signal),
            },
            TagChannel {
                id: IDLER_CHANNEL,
                timestamps_ps: finalize(idler),
            },
        ],
    };
    stream.validate()?;
    Ok(stream)
}

// ---------------------------------------------------------------------------
// Histogram and CAR
// ---------------------------------------------------------------------------

/// Tags per worker chunk when histogramming in parallel.
const TAGS_PER_CHUNK: usize = 1 << 20;

/// Builds the all-pairs delay histogram between two channels: for every
/// tag t_a on `ch_a`, every `ch_b` tag with delay `t_b − t_a` in
/// [−range, +range) increments its bin. A two-pointer sweep over the
/// sorted streams keeps the cost linear in tags plus matches; reference
/// tags are partitioned into fixed chunks whose per-chunk counts are
/// summed, so the result is identical for any worker count.
pub fn delay_histogram(
    stream: &TimeTagStream,
    ch_a: u32,
    ch_b: u32,
    bin_width_ps: u64,
    range_ps: u64,
) -> Result<DelayHistogram> {
    stream.validate()?;
    if bin_width_ps == 0 {
        return Err(Error::domain("bin width must be > 0"));
    }
    if range_ps == 0 || !range_ps.is_multiple_of(bin_width_ps) {
        return Err(Error::domain(
            "histogram range must be a positive multiple of the bin width",
        ));
    }
    let a = stream.channel(ch_a)?;
    let b = stream.channel(ch_b)?;
    let n_bins = (2 * range_ps / bin_width_ps) as usize;
    let range = range_ps as i128;
    let width = bin_width_ps as i128;

    let counts = a
        .par_chunks(TAGS_PER_CHUNK)
        .map(|chunk| {
            let mut local = vec![0u64; n_bins];
            let mut lo = 0usize;
            let mut hi = 0usize;
            for &ta in chunk {
                let ta = ta as i128;
                while lo < b.len() && (b[lo] as i128) < ta - range {
                    lo += 1;
                }
                if hi < lo {
                    hi = lo;
                }
                while hi < b.len() && (b[hi] as i128) < ta + range {
                    hi += 1;
                }
                for &tb in &b[lo..hi] {
                    let idx = ((tb as i128 - ta + range) / width) as usize;
                    local[idx] += 1;
                }
            }
            local
        })
        .reduce(
            || vec![0u64; n_bins],
            |mut acc, local| {
                for (a, l) in acc.iter_mut().zip(local) {
                    *a += l;
                }
                acc
            },
        );

    Ok(DelayHistogram {
        bin_width_ps,
        range_ps,
        counts,
        singles_a: a.len() as u64,
        singles_b: b.len() as u64,
    })
}

/// Coincidence-to-accidental estimate from signal and side windows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarEstimate {
    /// Counts in the signal window.
    pub coincidences: u64,
    /// Raw counts summed over the accidental windows.
    pub accidental_counts: u64,
    /// Accidental estimate scaled to the signal-window width.
    pub accidentals_estimate: f64,
    /// Coincidence-to-accidental ratio (∞ when flagged infinite).
    pub car: f64,
    /// 1σ uncertainty from Poisson counting in both window sets.
    pub uncertainty: f64,
    /// True when the accidental estimate is zero and the ratio is
    /// unbounded.
    pub infinite: bool,
}

/// Computes the CAR of a delay histogram.
///
/// Coincidences are the counts inside the signal window
/// `(start_ps, width_ps)`; the accidental level is the mean of the
/// disjoint side-window counts scaled to the signal-window width. The 1σ
/// uncertainty propagates Poisson errors of both counts:
/// `σ/CAR = sqrt(1/C + 1/A_raw)`.
pub fn car(
    hist: &DelayHistogram,
    signal_window: (i64, u64),
    accidental_windows: &[(i64, u64)],
) -> Result<CarEstimate> {
    if accidental_windows.is_empty() {
        return Err(Error::domain("CAR needs at least one accidental window"));
    }
    let range = hist.range_ps as i64;
    let in_range = |w: &(i64, u64)| -> bool {
        w.1 > 0 && w.0 >= -range && w.0.saturating_add(w.1 as i64) <= range
    };
    if !in_range(&signal_window) {
        return Err(Error::domain("signal window outside the histogram range"));
    }
    let sig_end = signal_window.0 + signal_window.1 as i64;
    let mut acc_width = 0u64;
    for w in accidental_windows {
        if !in_range(w) {
            return Err(Error::domain(
                "accidental window outside the histogram range",
            ));
        }
        let end = w.0 + w.1 as i64;
        if w.0 < sig_end && signal_window.0 < end {
            return Err(Error::domain(
                "accidental windows must be disjoint from the signal window",
            ));
        }
        acc_width += w.1;
    }

    let coincidences = hist.count_in_window(signal_window.0, signal_window.1);
    let accidental_counts: u64 = accidental_windows
        .iter()
        .map(|w| hist.count_in_window(w.0, w.1))
        .sum();
    let scale = signal_window.1 as f64 / acc_width as f64;
    let accidentals_estimate = accidental_counts as f64 * scale;

    if accidentals_estimate <= 0.0 {
        return Ok(CarEstimate {
            coincidences,
            accidental_counts,
            accidentals_estimate,
            car: f64::INFINITY,
            uncertainty: f64::INFINITY,
            infinite: true,
        });
    }
    let car = coincidences as f64 / accidentals_estimate;
    let rel_var = if coincidences > 0 {
        1.0 / coincidences as f64 + 1.0 / accidental_counts as f64
    } else {
        1.0 / accidental_counts as f64
    };
    Ok(CarEstimate {
        coincidences,
        accidental_counts,
        accidentals_estimate,
        car,
        uncertainty: car * rel_var.sqrt(),
        infinite: false,
    })
}

/// Statistically expected accidental-coincidence rate for independent
/// singles: `S_a · S_b · τ` in coincidences/s.
pub fn accidental_rate(singles_a_hz: f64, singles_b_hz: f64, window_s: f64) -> Result<f64> {
    for (label, v) in [
        ("singles A", singles_a_hz),
        ("singles B", singles_b_hz),
        ("window", window_s),
    ] {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::domain(format!("{label} must be finite and ≥ 0")));
        }
    }
    Ok(singles_a_hz * singles_b_hz * window_s)
}

/// Recommends a coincidence-window width: the summed per-arm chromatic
/// dispersion broadening `D·L·Δλ` plus `coverage` times the combined
/// timing jitter ([`DEFAULT_JITTER_COVERAGE`] is the conventional 4).
pub fn window_recommendation(
    channel: &ChannelParams,
    filter_bandwidths_nm: &[f64],
    jitter_sigma_ps: f64,
    coverage: f64,
) -> Result<f64> {
    channel.validate()?;
    if !(jitter_sigma_ps.is_finite() && jitter_sigma_ps >= 0.0) {
        return Err(Error::domain("jitter sigma must be finite and ≥ 0"));
    }
    if !(coverage.is_finite() && coverage >= 0.0) {
        return Err(Error::domain("jitter coverage must be finite and ≥ 0"));
    }
    let mut window = coverage * jitter_sigma_ps;
    for &bw in filter_bandwidths_nm {
        window += dispersion_broadening(channel.dispersion_ps_per_nm_km, channel.length_km, bw)?;
    }
    Ok(window)
}

// ---------------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------------

/// Magic bytes of the binary tag format.
pub const QTT_MAGIC: &[u8; 4] = b"QTT1";
/// Version written by [`write_qtt`].
pub const QTT_VERSION: u32 = 1;

/// Merges a stream into canonical record order: ascending timestamp,
/// channel id breaking ties.
fn canonical_records(stream: &TimeTagStream) -> Vec<(u64, u32)> {
    let mut records: Vec<(u64, u32)> = stream
        .channels
        .iter()
        .flat_map(|c| c.timestamps_ps.iter().map(move |&t| (t, c.id)))
        .collect();
    records.sort_unstable();
    records
}

/// Groups records back into a validated stream; the duration is the last
/// timestamp rounded up to the next full second.
fn stream_from_records(records: Vec<(u64, u32)>, what: &str) -> Result<TimeTagStream> {
    if records.is_empty() {
        return Err(Error::format(format!("{what} contains no records")));
    }
    let mut by_channel: std::collections::BTreeMap<u32, Vec<u64>> =
        std::collections::BTreeMap::new();
    let mut max_ts = 0u64;
    for (ts, ch) in records {
        max_ts = max_ts.max(ts);
        by_channel.entry(ch).or_default().push(ts);
    }
    let stream = TimeTagStream {
        duration_s: (max_ts as f64 / 1e12).ceil().max(1.0),
        channels: by_channel
            .into_iter()
            .map(|(id, mut timestamps_ps)| {
                timestamps_ps.sort_unstable();
                TagChannel { id, timestamps_ps }
            })
            .collect(),
    };
    stream
        .validate()
        .map_err(|e| Error::format(format!("{what}: {e}")))?;
    Ok(stream)
}

/// Writes the canonical binary tag file: the `QTT1` magic, a u32 format
/// version, a u64 record count, then 16-byte little-endian records of
/// u64 timestamp_ps, u32 channel_id and u32 reserved (zero). Bit-exact
/// for a given stream.
pub fn write_qtt<W: Write>(stream: &TimeTagStream, mut w: W) -> Result<()> {
    stream.validate()?;
    let records = canonical_records(stream);
    w.write_all(QTT_MAGIC)?;
    w.write_all(&QTT_VERSION.to_le_bytes())?;
    w.write_all(&(records.len() as u64).to_le_bytes())?;
    for (ts, ch) in records {
        w.write_all(&ts.to_le_bytes())?;
        w.write_all(&ch.to_le_bytes())?;
        w.write_all(&0u32.to_le_bytes())?;
    }
    Ok(())
}

/// Reads a binary tag file written by [`write_qtt`]. Any structural
/// mismatch — bad magic, unknown version, truncation, trailing bytes or an
/// empty record set — is a format error.
pub fn read_qtt<R: Read>(mut r: R) -> Result<TimeTagStream> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() < 16 {
        return Err(Error::format("tag file too short for a QTT1 header"));
    }
    if &bytes[0..4] != QTT_MAGIC {
        return Err(Error::format("bad magic: not a QTT1 tag file"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != QTT_VERSION {
        return Err(Error::format(format!("unsupported QTT version {version}")));
    }
    let count = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let expected = 16 + count * 16;
    if bytes.len() != expected {
        return Err(Error::format(format!(
            "tag file length {} does not match {count} records",
            bytes.len()
        )));
    }
    let mut records = Vec::with_capacity(count);
    for i in 0..count {
        let base = 16 + i * 16;
        let ts = u64::from_le_bytes(bytes[base..base + 8].try_into().unwrap());
        let ch = u32::from_le_bytes(bytes[base + 8..base + 12].try_into().unwrap());
        records.push((ts, ch));
    }
    stream_from_records(records, "tag file")
}

/// Writes the CSV interchange format with header `channel,timestamp_ps`,
/// records in canonical order.
pub fn write_tag_csv<W: Write>(stream: &TimeTagStream, mut w: W) -> Result<()> {
    stream.validate()?;
    writeln!(w, "channel,timestamp_ps")?;
    for (ts, ch) in canonical_records(stream) {
        writeln!(w, "{ch},{ts}")?;
    }
    Ok(())
}

/// Reads the CSV interchange format.
pub fn read_tag_csv<R: Read>(mut r: R) -> Result<TimeTagStream> {
    let mut text = String::new();
    r.read_to_string(&mut text)?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == "channel,timestamp_ps" => {}
        _ => return Err(Error::format("expected header channel,timestamp_ps")),
    }
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let (ch, ts) = match (fields.next(), fields.next(), fields.next()) {
            (Some(ch), Some(ts), None) => (ch, ts),
            _ => {
                return Err(Error::format(format!(
                    "line {}: expected channel,timestamp_ps",
                    i + 2
                )))
            }
        };
        let ch: u32 = ch
            .trim()
            .parse()
            .map_err(|e| Error::format(format!("line {}: bad channel: {e}", i + 2)))?;
        let ts: u64 = ts
            .trim()
            .parse()
            .map_err(|e| Error::format(format!("line {}: bad timestamp: {e}", i + 2)))?;
        records.push((ts, ch));
    }
    stream_from_records(records, "tag CSV")
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
