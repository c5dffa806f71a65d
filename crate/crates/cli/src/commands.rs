//! Subcommand implementations.
//!
//! Every command reads a strict TOML config, resolves its output
//! directory, writes plot-ready CSV artifacts and prints a plain
//! `key: value` summary. Seeded commands require an explicit seed (flag or
//! config key); identical config + seed re-runs produce byte-identical
//! outputs regardless of worker count.

use crate::config::{CoincidenceSection, ExperimentConfig};
use qlink_core::channel::transmittance;
use qlink_core::decoy::{secret_key_rate, sweep_distance, SkrCurve, SkrCurvePoint};
use qlink_core::optim;
use qlink_core::phase::{
    detect_tones, estimate_psd, extract_phase, fit_rolloff_exponent, interference_trace,
    synthesize_phase_noise, IntensityTrace, PhaseSeries, PsdEstimate, ToneDetection,
};
use qlink_core::polarization::{
    align_gradient_descent, qber_for_state, simulate_drift, write_alignment_csv, write_drift_csv,
    AlignmentOptions, PolarizationState, RetarderStack,
};
use qlink_core::rng::substream;
use qlink_core::timetag::{
    accidental_rate, car, delay_histogram, read_qtt, read_tag_csv, simulate_pairs, write_qtt,
    CarEstimate, DelayHistogram, TimeTagStream, IDLER_CHANNEL, SIGNAL_CHANNEL,
};
use qlink_core::{Error, Result};
use rand::Rng;
use rand_distr::StandardNormal;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

// ---------------------------------------------------------------------------
// Shared plumbing
// ---------------------------------------------------------------------------

/// Resolves the seed for a randomized command: the flag wins, then the
/// config key; absence is a configuration error.
fn resolve_seed(flag: Option<u64>, cfg: &ExperimentConfig) -> Result<u64> {
    flag.or(cfg.seed).ok_or_else(|| {
        Error::domain("this command is randomized: pass --seed or set `seed` in the config")
    })
}

/// Resolves and creates the output directory: `--out` wins, then the
/// config `out_dir`, then the current directory.
fn resolve_out_dir(flag: Option<PathBuf>, cfg: &ExperimentConfig) -> Result<PathBuf> {
    let dir = flag
        .or_else(|| cfg.out_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

// ---------------------------------------------------------------------------
// skr / sweep
// ---------------------------------------------------------------------------

/// `qlink skr`: single-point secret key rate at the configured length.
pub fn cmd_skr(cfg: &ExperimentConfig, out: Option<PathBuf>) -> Result<()> {
    let channel = cfg.channel()?;
    let detector = cfg.detector()?;
    let receiver = cfg.receiver_efficiency()?;
    let protocol = cfg.protocol()?;
    let out_dir = resolve_out_dir(out, cfg)?;

    let eta = transmittance(&channel, channel.length_km, receiver, detector.efficiency)?;
    let skr = secret_key_rate(&protocol, eta)?;
    let curve = SkrCurve {
        points: vec![SkrCurvePoint {
            length_km: channel.length_km,
            eta,
            skr,
        }],
        zero_crossing_km: None,
    };
    let path = out_dir.join("skr.csv");
    curve.write_csv(protocol.clock_rate_hz, create(&path)?)?;

    println!("length_km: {}", channel.length_km);
    println!("eta: {eta}");
    println!("Q_mu: {}", skr.signal.gain);
    println!("E_mu: {}", skr.signal.qber);
    println!("Q_nu: {}", skr.decoy.gain);
    println!("E_nu: {}", skr.decoy.qber);
    println!("Y1_lower: {}", skr.y1_lower);
    println!("e1_upper: {}", skr.e1_upper);
    println!("Q1: {}", skr.q1);
    println!("skr_bits_per_clock: {}", skr.rate_per_clock);
    println!(
        "skr_bits_per_s: {}",
        skr.rate_per_clock * protocol.clock_rate_hz
    );
    println!("wrote: {}", path.display());
    Ok(())
}

/// `qlink sweep`: SKR over a length grid, written as `fig5.csv`.
pub fn cmd_sweep(
    cfg: &ExperimentConfig,
    out: Option<PathBuf>,
    lmin: Option<f64>,
    lmax: Option<f64>,
    step: Option<f64>,
) -> Result<()> {
    let channel = cfg.channel()?;
    let detector = cfg.detector()?;
    let receiver = cfg.receiver_efficiency()?;
    let protocol = cfg.protocol()?;
    let out_dir = resolve_out_dir(out, cfg)?;

    // Flags override the [sweep] section; the section is only required
    // when a flag is missing.
    let (l_min, l_max, step_km) = match (lmin, lmax, step) {
        (Some(a), Some(b), Some(s)) => (a, b, s),
        (a, b, s) => {
            let sec = cfg.sweep()?;
            (
                a.unwrap_or(sec.l_min_km),
                b.unwrap_or(sec.l_max_km),
                s.unwrap_or(sec.step_km),
            )
        }
    };

    let curve = sweep_distance(
        &protocol, &channel, &detector, receiver, l_min, l_max, step_km,
    )?;
    let path = out_dir.join("fig5.csv");
    curve.write_csv(protocol.clock_rate_hz, create(&path)?)?;

    println!("points: {}", curve.points.len());
    match curve.zero_crossing_km {
        Some(km) => println!("zero_crossing_km: {km}"),
        None => println!("zero_crossing_km: none"),
    }
    println!("wrote: {}", path.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// coincidences
// ---------------------------------------------------------------------------

/// Window placement: the effective centre, the `(start, width)` signal
/// window, and the accidental side windows.
type CarWindows = (i64, (i64, u64), Vec<(i64, u64)>);

/// Signal and accidental windows implied by a coincidence section. The
/// signal window is clamped into the histogram range and side windows
/// falling outside it are dropped (the centre may come from a histogram
/// peak anywhere in the range).
fn car_windows(coinc: &CoincidenceSection, default_center_ps: i64) -> Result<CarWindows> {
    let range = coinc.range_ps as i64;
    let width = coinc.window_width_ps;
    let half = width as i64 / 2;
    let center = coinc
        .window_center_ps
        .unwrap_or(default_center_ps)
        .clamp(-range + half, range - (width as i64 - half));
    let signal = (center - half, width);
    let mut sides = Vec::new();
    for k in 1..=coinc.side_windows_per_side as i64 {
        for start in [
            center - k * coinc.side_window_pitch_ps - half,
            center + k * coinc.side_window_pitch_ps - half,
        ] {
            if start >= -range && start + width as i64 <= range {
                sides.push((start, width));
            }
        }
    }
    if sides.is_empty() {
        return Err(Error::domain(
            "no accidental window fits inside the histogram range; \
             reduce side_window_pitch_ps or enlarge range_ps",
        ));
    }
    Ok((center, signal, sides))
}

/// Shared coincidence analysis: histogram CSV, CAR report, summary print.
fn analyze_stream(
    stream: &TimeTagStream,
    coinc: &CoincidenceSection,
    default_center_ps: i64,
    out_dir: &Path,
) -> Result<(DelayHistogram, CarEstimate)> {
    let hist = delay_histogram(
        stream,
        SIGNAL_CHANNEL,
        IDLER_CHANNEL,
        coinc.bin_width_ps,
        coinc.range_ps,
    )?;
    let (center, signal_window, side_windows) = car_windows(coinc, default_center_ps)?;
    let estimate = car(&hist, signal_window, &side_windows)?;

    let hist_path = out_dir.join("histogram.csv");
    hist.write_csv(create(&hist_path)?)?;

    let s_a = stream.singles_rate_hz(SIGNAL_CHANNEL)?;
    let s_b = stream.singles_rate_hz(IDLER_CHANNEL)?;
    let window_s = coinc.window_width_ps as f64 * 1e-12;
    let analytic = accidental_rate(s_a, s_b, window_s)?;

    let report_path = out_dir.join("car_report.txt");
    let mut report = create(&report_path)?;
    writeln!(report, "duration_s: {}", stream.duration_s)?;
    writeln!(report, "singles_signal_hz: {s_a}")?;
    writeln!(report, "singles_idler_hz: {s_b}")?;
    if let Some((_, peak_center, peak_count)) = hist.peak() {
        writeln!(report, "histogram_peak_ps: {peak_center}")?;
        writeln!(report, "histogram_peak_counts: {peak_count}")?;
    }
    writeln!(report, "window_center_ps: {center}")?;
    writeln!(report, "window_width_ps: {}", coinc.window_width_ps)?;
    writeln!(report, "coincidences: {}", estimate.coincidences)?;
    writeln!(report, "accidental_windows: {}", side_windows.len())?;
    writeln!(report, "accidental_counts: {}", estimate.accidental_counts)?;
    writeln!(
        report,
        "accidentals_estimate: {}",
        estimate.accidentals_estimate
    )?;
    writeln!(report, "car: {}", estimate.car)?;
    writeln!(report, "car_sigma: {}", estimate.uncertainty)?;
    writeln!(report, "car_infinite: {}", estimate.infinite)?;
    writeln!(report, "analytic_accidental_rate_per_s: {analytic}")?;
    writeln!(
        report,
        "analytic_accidentals_in_duration: {}",
        analytic * stream.duration_s
    )?;

    println!("singles_signal_hz: {s_a}");
    println!("singles_idler_hz: {s_b}");
    println!("coincidences: {}", estimate.coincidences);
    println!("accidentals_estimate: {}", estimate.accidentals_estimate);
    println!("car: {}", estimate.car);
    println!("car_sigma: {}", estimate.uncertainty);
    println!("wrote: {}", hist_path.display());
    println!("wrote: {}", report_path.display());
    Ok((hist, estimate))
}

/// `qlink coinc-sim`: seeded pair-source acquisition plus analysis.
pub fn cmd_coinc_sim(
    cfg: &ExperimentConfig,
    out: Option<PathBuf>,
    seed: Option<u64>,
    duration: Option<f64>,
    bin_width: Option<u64>,
) -> Result<()> {
    let params = cfg.pair_source()?;
    let mut coinc = cfg.coincidence()?.clone();
    if let Some(bw) = bin_width {
        coinc.bin_width_ps = bw;
    }
    let seed = resolve_seed(seed, cfg)?;
    let out_dir = resolve_out_dir(out, cfg)?;
    let duration_s = duration.unwrap_or(coinc.duration_s);

    let stream = simulate_pairs(&params, duration_s, seed)?;
    let tags_path = out_dir.join("tags.qtt");
    write_qtt(&stream, create(&tags_path)?)?;
    println!("tags: {}", stream.total_tags());
    println!("wrote: {}", tags_path.display());
    analyze_stream(&stream, &coinc, params.offset_ps, &out_dir)?;
    Ok(())
}

/// `qlink coinc-analyze`: histogram + CAR from a tag file (binary or CSV).
pub fn cmd_coinc_analyze(
    cfg: &ExperimentConfig,
    out: Option<PathBuf>,
    tags: &Path,
    bin_width: Option<u64>,
) -> Result<()> {
    let mut coinc = cfg.coincidence()?.clone();
    if let Some(bw) = bin_width {
        coinc.bin_width_ps = bw;
    }
    let out_dir = resolve_out_dir(out, cfg)?;

    let mut bytes = Vec::new();
    File::open(tags)?.read_to_end(&mut bytes)?;
    let stream = if bytes.starts_with(qlink_core::timetag::QTT_MAGIC) {
        read_qtt(bytes.as_slice())?
    } else {
        read_tag_csv(bytes.as_slice())?
    };
    for id in [SIGNAL_CHANNEL, IDLER_CHANNEL] {
        if stream.channel(id).is_err() {
            return Err(Error::format(format!(
                "tag file {} has no channel {id}",
                tags.display()
            )));
        }
    }
    // Without a configured centre, centre the window on the histogram peak.
    let default_center = match coinc.window_center_ps {
        Some(c) => c,
        None => {
            let hist = delay_histogram(
                &stream,
                SIGNAL_CHANNEL,
                IDLER_CHANNEL,
                coinc.bin_width_ps,
                coinc.range_ps,
            )?;
            hist.peak().map(|(_, center, _)| center as i64).unwrap_or(0)
        }
    };
    analyze_stream(&stream, &coinc, default_center, &out_dir)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// phase
// ---------------------------------------------------------------------------

/// Shared PSD + tone analysis: psd.csv, tones.csv, summary print.
fn analyze_phase(
    series: &PhaseSeries,
    phase: &crate::config::PhaseSection,
    out_dir: &Path,
) -> Result<(PsdEstimate, Vec<ToneDetection>)> {
    let psd = estimate_psd(series, phase.segment_length, phase.effective_overlap())?;
    let tones = detect_tones(&psd, phase.tone_threshold)?;

    let psd_path = out_dir.join("psd.csv");
    psd.write_csv(create(&psd_path)?)?;

    let tones_path = out_dir.join("tones.csv");
    let mut tw = create(&tones_path)?;
    writeln!(tw, "frequency_hz,power_rad2")?;
    // Strongest first, so the dominant tone leads the report.
    let mut by_power = tones.clone();
    by_power.sort_by(|a, b| b.power_rad2.partial_cmp(&a.power_rad2).unwrap());
    for t in &by_power {
        writeln!(tw, "{},{}", t.frequency_hz, t.power_rad2)?;
    }
    drop(tw);

    println!("samples: {}", series.wrapped_phase.len());
    println!("bin_width_hz: {}", psd.bin_width_hz());
    println!("segments_used: {}", psd.segments_used);
    println!("integrated_power_rad2: {}", psd.integrated_power());
    println!("tones_detected: {}", by_power.len());
    for t in &by_power {
        println!("tone: {} Hz, {} rad^2", t.frequency_hz, t.power_rad2);
    }
    if let Some((lo, hi)) = phase.rolloff_fit_band_hz {
        let alpha = fit_rolloff_exponent(&psd, lo, hi)?;
        println!("rolloff_exponent: {alpha}");
    }
    println!("wrote: {}", psd_path.display());
    println!("wrote: {}", tones_path.display());
    Ok((psd, tones))
}

/// `qlink phase-sim`: synthesize phase noise, analyze it, optionally
/// write the interferometer trace.
pub fn cmd_phase_sim(
    cfg: &ExperimentConfig,
    out: Option<PathBuf>,
    seed: Option<u64>,
    duration: Option<f64>,
) -> Result<()> {
    let phase = cfg.phase()?;
    let seed = resolve_seed(seed, cfg)?;
    let out_dir = resolve_out_dir(out, cfg)?;
    let duration_s = duration.unwrap_or(phase.duration_s);

    let series =
        synthesize_phase_noise(&phase.noise_spec(), duration_s, phase.sample_rate_hz, seed)?;
    if phase.write_trace {
        let trace = interference_trace(&series, phase.visibility, phase.mean_power)?;
        let trace_path = out_dir.join("trace.csv");
        trace.write_csv(create(&trace_path)?)?;
        println!("wrote: {}", trace_path.display());
    }
    analyze_phase(&series, phase, &out_dir)?;
    Ok(())
}

/// `qlink phase-analyze`: extract phase from a trace CSV and analyze it.
pub fn cmd_phase_analyze(cfg: &ExperimentConfig, out: Option<PathBuf>, trace: &Path) -> Result<()> {
    let phase = cfg.phase()?;
    let out_dir = resolve_out_dir(out, cfg)?;
    let file = File::open(trace)?;
    let trace = IntensityTrace::read_csv(BufReader::new(file))?;
    let series = extract_phase(&trace, phase.visibility)?;
    println!("sample_rate_hz: {}", series.sample_rate_hz);
    println!("clipped_fraction: {}", series.clipped_fraction);
    analyze_phase(&series, phase, &out_dir)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// polarization
// ---------------------------------------------------------------------------

/// `qlink pol-drift`: seeded drift timeline scored against the H pole.
pub fn cmd_pol_drift(
    cfg: &ExperimentConfig,
    out: Option<PathBuf>,
    seed: Option<u64>,
    duration: Option<f64>,
) -> Result<()> {
    let drift = cfg.drift()?;
    let seed = resolve_seed(seed, cfg)?;
    let out_dir = resolve_out_dir(out, cfg)?;
    let duration_s = duration.unwrap_or(drift.duration_s);

    let basis = PolarizationState::h();
    let initial = PolarizationState::pure(
        drift.initial_angle_rad.cos(),
        drift.initial_angle_rad.sin(),
        0.0,
    )?;
    let timeline = simulate_drift(&drift.process(), &initial, duration_s, drift.dt_s, seed)?;

    let path = out_dir.join("drift_timeline.csv");
    write_drift_csv(&timeline, &basis, drift.base_error, create(&path)?)?;

    let mut min_q = f64::INFINITY;
    let mut max_q = f64::NEG_INFINITY;
    for sample in &timeline {
        let q = qber_for_state(&sample.state, &basis, drift.base_error)?;
        min_q = min_q.min(q);
        max_q = max_q.max(q);
    }
    println!("samples: {}", timeline.len());
    println!("qber_min: {min_q}");
    println!("qber_max: {max_q}");
    println!("wrote: {}", path.display());
    Ok(())
}

/// `qlink pol-align`: batch of seeded alignment trials with a convergence
/// report; the first trial's trajectory goes to `alignment_log.csv`.
pub fn cmd_pol_align(
    cfg: &ExperimentConfig,
    out: Option<PathBuf>,
    seed: Option<u64>,
) -> Result<()> {
    let align = cfg.alignment()?;
    let seed = resolve_seed(seed, cfg)?;
    let out_dir = resolve_out_dir(out, cfg)?;
    if align.trials == 0 {
        return Err(Error::domain("alignment needs at least one trial"));
    }

    let target = PolarizationState::h();
    let opts = AlignmentOptions {
        tolerance_rad: align.tolerance_rad,
        max_evaluations: align.max_evaluations,
    };
    let mut converged = 0usize;
    let mut eval_sum = 0usize;
    let mut distance_sum = 0.0;
    let mut qber_sum = 0.0;
    let mut first_trajectory = None;
    for trial in 0..align.trials {
        let mut rng = substream(seed, trial as u64);
        let input = loop {
            let v: [f64; 3] = [
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
            ];
            if let Ok(s) = PolarizationState::pure(v[0], v[1], v[2]) {
                break s;
            }
        };
        let stack = RetarderStack::epc(align.quantization_rad)?;
        let outcome = align_gradient_descent(&stack, &input, &target, &opts)?;
        if outcome.converged {
            converged += 1;
        }
        eval_sum += outcome.evaluations;
        distance_sum += outcome.final_distance_rad;
        qber_sum += 0.5 * (1.0 - outcome.final_distance_rad.cos());
        if first_trajectory.is_none() {
            first_trajectory = Some(outcome.trajectory);
        }
    }

    let log_path = out_dir.join("alignment_log.csv");
    write_alignment_csv(
        first_trajectory.as_deref().unwrap_or(&[]),
        create(&log_path)?,
    )?;

    let n = align.trials as f64;
    let report_path = out_dir.join("alignment_report.txt");
    let mut report = create(&report_path)?;
    writeln!(report, "trials: {}", align.trials)?;
    writeln!(report, "converged: {converged}")?;
    writeln!(report, "convergence_rate: {}", converged as f64 / n)?;
    writeln!(report, "mean_evaluations: {}", eval_sum as f64 / n)?;
    writeln!(report, "mean_final_distance_rad: {}", distance_sum / n)?;
    writeln!(report, "mean_residual_qber: {}", qber_sum / n)?;

    println!("trials: {}", align.trials);
    println!("converged: {converged}");
    println!("convergence_rate: {}", converged as f64 / n);
    println!("mean_residual_qber: {}", qber_sum / n);
    println!("wrote: {}", log_path.display());
    println!("wrote: {}", report_path.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// calibrate
// ---------------------------------------------------------------------------

/// Free parameters the SKR calibration understands, in the fixed order
/// used for the optimization vector.
const FREE_PARAMS: [&str; 3] = [
    "background_yield_per_detector",
    "intrinsic_error",
    "receiver_efficiency",
];

/// One scored calibration target.
struct TargetScore {
    name: &'static str,
    target: f64,
    achieved: f64,
}

impl TargetScore {
    fn residual(&self) -> f64 {
        if self.target == 0.0 {
            self.achieved
        } else {
            (self.achieved - self.target) / self.target
        }
    }
}

/// Applies an SKR-family parameter vector to a config copy.
fn apply_free(cfg: &ExperimentConfig, names: &[&str], x: &[f64]) -> ExperimentConfig {
    let mut out = cfg.clone();
    for (name, &value) in names.iter().zip(x) {
        match *name {
            "background_yield_per_detector" => {
                if let Some(p) = out.protocol.as_mut() {
                    // Two gated detectors contribute to the vacuum yield.
                    p.background_yield = 2.0 * value;
                }
            }
            "intrinsic_error" => {
                if let Some(p) = out.protocol.as_mut() {
                    p.intrinsic_error = value;
                }
            }
            "receiver_efficiency" => {
                if let Some(r) = out.receiver.as_mut() {
                    r.efficiency = value;
                }
            }
            _ => unreachable!("free parameter names are validated before use"),
        }
    }
    out
}

/// Scores the SKR-family targets for a config; `None` when a target is
/// not requested.
fn score_skr_targets(
    cfg: &ExperimentConfig,
    skr_target: Option<f64>,
    crossing_target: Option<f64>,
) -> Result<Vec<TargetScore>> {
    let channel = cfg.channel()?;
    let detector = cfg.detector()?;
    let receiver = cfg.receiver_efficiency()?;
    let protocol = cfg.protocol()?;
    let mut scores = Vec::new();
    if let Some(target) = skr_target {
        let eta = transmittance(&channel, channel.length_km, receiver, detector.efficiency)?;
        let skr = secret_key_rate(&protocol, eta)?;
        scores.push(TargetScore {
            name: "skr_224km",
            target,
            achieved: skr.rate_per_clock,
        });
    }
    if let Some(target) = crossing_target {
        let (l_min, l_max, step) = match &cfg.sweep {
            Some(s) => (s.l_min_km, s.l_max_km, s.step_km),
            None => (0.0, 400.0, 1.0),
        };
        let curve = sweep_distance(&protocol, &channel, &detector, receiver, l_min, l_max, step)?;
        scores.push(TargetScore {
            name: "zero_crossing_km",
            target,
            // A missing crossing scores as zero length: maximally wrong.
            achieved: curve.zero_crossing_km.unwrap_or(0.0),
        });
    }
    Ok(scores)
}

/// `qlink calibrate`: solve free parameters against named paper
/// observables and write the calibrated config plus a residual report.
pub fn cmd_calibrate(cfg: &ExperimentConfig, out: Option<PathBuf>) -> Result<()> {
    let cal = cfg.calibration()?.clone();
    let out_dir = resolve_out_dir(out, cfg)?;

    for name in cal.free.keys() {
        if !FREE_PARAMS.contains(&name.as_str()) {
            return Err(Error::domain(format!(
                "unknown free parameter `{name}`; supported: {}",
                FREE_PARAMS.join(", ")
            )));
        }
    }
    for (name, b) in &cal.free {
        if !(b.min.is_finite() && b.max.is_finite() && b.min < b.max) {
            return Err(Error::domain(format!(
                "infeasible bounds for `{name}`: [{}, {}]",
                b.min, b.max
            )));
        }
    }
    let t = &cal.targets;
    let has_skr_family = t.skr_224km.is_some() || t.zero_crossing_km.is_some();
    let has_pair_family =
        t.singles_signal_hz.is_some() || t.singles_idler_hz.is_some() || t.car.is_some();
    if !has_skr_family && !has_pair_family {
        return Err(Error::domain("calibration needs at least one target"));
    }

    let mut calibrated = cfg.clone();
    let mut scores: Vec<TargetScore> = Vec::new();
    let mut free_values: Vec<(String, f64)> = Vec::new();
    let mut evaluations = 0usize;

    if has_skr_family {
        let names: Vec<&str> = cal.free.keys().map(|s| s.as_str()).collect();
        if names.is_empty() {
            // Identity calibration: score the config as given.
            scores.extend(score_skr_targets(cfg, t.skr_224km, t.zero_crossing_km)?);
            evaluations += 1;
        } else {
            let bounds: Vec<(f64, f64)> = cal.free.values().map(|b| (b.min, b.max)).collect();
            let start: Vec<f64> = bounds.iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect();
            let objective = |x: &[f64]| -> f64 {
                let candidate = apply_free(cfg, &names, x);
                match score_skr_targets(&candidate, t.skr_224km, t.zero_crossing_km) {
                    Ok(s) => s.iter().map(|s| s.residual().powi(2)).sum(),
                    Err(_) => f64::INFINITY,
                }
            };
            let outcome = optim::minimize(objective, &start, &bounds, &optim::Options::default())?;
            calibrated = apply_free(cfg, &names, &outcome.x);
            scores.extend(score_skr_targets(
                &calibrated,
                t.skr_224km,
                t.zero_crossing_km,
            )?);
            evaluations += outcome.evals;
            free_values.extend(
                names
                    .iter()
                    .zip(&outcome.x)
                    .map(|(n, &v)| (n.to_string(), v)),
            );
        }
    }

    if has_pair_family {
        let (s_a, s_b, car_target) = match (t.singles_signal_hz, t.singles_idler_hz, t.car) {
            (Some(a), Some(b), Some(c)) => (a, b, c),
            _ => {
                return Err(Error::domain(
                    "pair-source calibration needs singles_signal_hz, singles_idler_hz and car together",
                ))
            }
        };
        let source = cfg.pair_source()?;
        let window_s = cfg.coincidence()?.window_width_ps as f64 * 1e-12;
        let (pair_rate, eta_s, eta_i) =
            qlink_core::timetag::PairSourceParams::calibrate_to_observed(
                s_a,
                s_b,
                source.background_signal_hz,
                source.background_idler_hz,
                car_target,
                window_s,
            )?;
        let section = calibrated
            .pair_source
            .as_mut()
            .expect("pair_source checked above");
        section.pair_rate_hz = pair_rate;
        section.eta_signal = eta_s;
        section.eta_idler = eta_i;
        free_values.push(("pair_rate_hz".into(), pair_rate));
        free_values.push(("eta_signal".into(), eta_s));
        free_values.push(("eta_idler".into(), eta_i));
        // Score the closed-form solution through the analytic model.
        let achieved_a = pair_rate * eta_s + source.background_signal_hz;
        let achieved_b = pair_rate * eta_i + source.background_idler_hz;
        let achieved_car =
            1.0 + pair_rate * eta_s * eta_i / accidental_rate(achieved_a, achieved_b, window_s)?;
        scores.push(TargetScore {
            name: "singles_signal_hz",
            target: s_a,
            achieved: achieved_a,
        });
        scores.push(TargetScore {
            name: "singles_idler_hz",
            target: s_b,
            achieved: achieved_b,
        });
        scores.push(TargetScore {
            name: "car",
            target: car_target,
            achieved: achieved_car,
        });
        evaluations += 1;
    }

    // Calibrated config, prefixed with comments recording the fit.
    let config_path = out_dir.join("calibrated.toml");
    let mut header = String::new();
    header.push_str("# Calibrated configuration written by `qlink calibrate`.\n");
    for (name, value) in &free_values {
        header.push_str(&format!("# calibrated: {name} = {value}\n"));
        if let Some(b) = cal.free.get(name) {
            header.push_str(&format!("#   bounds: [{}, {}]\n", b.min, b.max));
        }
    }
    let body = toml::to_string_pretty(&calibrated)
        .map_err(|e| Error::domain(format!("cannot serialize calibrated config: {e}")))?;
    std::fs::write(&config_path, format!("{header}\n{body}"))?;

    let report_path = out_dir.join("residual_report.txt");
    let mut report = create(&report_path)?;
    let mut objective = 0.0;
    for s in &scores {
        objective += s.residual().powi(2);
        writeln!(
            report,
            "{}: target={} achieved={} residual={}",
            s.name,
            s.target,
            s.achieved,
            s.residual()
        )?;
    }
    writeln!(report, "objective: {objective}")?;
    writeln!(report, "evaluations: {evaluations}")?;
    for (name, value) in &free_values {
        writeln!(report, "{name}: {value}")?;
    }

    for s in &scores {
        println!(
            "{}: target={} achieved={} residual={}",
            s.name,
            s.target,
            s.achieved,
            s.residual()
        );
    }
    println!("objective: {objective}");
    println!("wrote: {}", config_path.display());
    println!("wrote: {}", report_path.display());
    Ok(())
}
