//! Polarization-state algebra on the Poincaré sphere.
//!
//! Provides:
//!
//! - [`PolarizationState`]: normalized Stokes components with the vector
//!   norm equal to the degree of polarization,
//! - [`RetarderStack`]: an electronic polarization controller modelled as
//!   quantized variable retarders with fixed axes alternating 0°/45°,
//! - [`apply_stack`]: composition of per-stage Poincaré rotations
//!   (preserves S0, degree of polarization and Stokes norm),
//! - [`align_gradient_descent`]: finite-difference ascent of the measured
//!   projection power over the quantized retardances,
//! - [`simulate_drift`]: Brownian motion on the sphere with optional step
//!   events, and
//! - QBER estimation: [`qber_for_state`] (misalignment model),
//!   [`base_qber_from_extinction_db`], and [`qber_from_counts`]
//!   (binomial point estimate with a 1σ interval).
//!
//! CSV interfaces: drift timelines as `time_s,s1,s2,s3,qber`, alignment
//! logs as `iter,objective,distance_rad`.

use crate::error::{Error, Result};
use crate::rng::substream;
use rand::Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{Beta, ContinuousCDF};
use std::io::Write;

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

/// Polarization state in Stokes form: total power `s0`, normalized vector
/// part `(s1, s2, s3)` whose Euclidean norm equals the degree of
/// polarization `dop`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarizationState {
    /// Total power S0 (≥ 0, arbitrary linear units).
    pub s0: f64,
    /// Normalized Stokes component along H/V.
    pub s1: f64,
    /// Normalized Stokes component along D/A.
    pub s2: f64,
    /// Normalized Stokes component along R/L.
    pub s3: f64,
    /// Degree of polarization in [0, 1]; equals |(s1, s2, s3)|.
    pub dop: f64,
}

impl PolarizationState {
    /// Tolerance for the norm/dop consistency invariant.
    const NORM_TOL: f64 = 1e-9;

    /// Fully polarized unit-power state along the given Poincaré vector
    /// (normalized internally).
    pub fn pure(s1: f64, s2: f64, s3: f64) -> Result<PolarizationState> {
        let norm = (s1 * s1 + s2 * s2 + s3 * s3).sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::domain("pure state needs a non-zero Stokes vector"));
        }
        Ok(PolarizationState {
            s0: 1.0,
            s1: s1 / norm,
            s2: s2 / norm,
            s3: s3 / norm,
            dop: 1.0,
        })
    }

    /// Horizontal |H⟩: s = (1, 0, 0).
    pub fn h() -> PolarizationState {
        PolarizationState {
            s0: 1.0,
            s1: 1.0,
            s2: 0.0,
            s3: 0.0,
            dop: 1.0,
        }
    }

    /// Vertical |V⟩: s = (−1, 0, 0).
    pub fn v() -> PolarizationState {
        PolarizationState {
            s0: 1.0,
            s1: -1.0,
            s2: 0.0,
            s3: 0.0,
            dop: 1.0,
        }
    }

    /// Diagonal |D⟩: s = (0, 1, 0).
    pub fn d() -> PolarizationState {
        PolarizationState {
            s0: 1.0,
            s1: 0.0,
            s2: 1.0,
            s3: 0.0,
            dop: 1.0,
        }
    }

    /// Anti-diagonal |A⟩: s = (0, −1, 0).
    pub fn a() -> PolarizationState {
        PolarizationState {
            s0: 1.0,
            s1: 0.0,
            s2: -1.0,
            s3: 0.0,
            dop: 1.0,
        }
    }

    /// Checks the field invariants.
    pub fn validate(&self) -> Result<()> {
        if !(self.s0.is_finite() && self.s0 >= 0.0) {
            return Err(Error::domain(format!("S0 must be ≥ 0, got {}", self.s0)));
        }
        if !(0.0..=1.0 + Self::NORM_TOL).contains(&self.dop) {
            return Err(Error::domain(format!(
                "dop must lie in [0, 1], got {}",
                self.dop
            )));
        }
        let norm = self.vector_norm();
        if norm > 1.0 + Self::NORM_TOL {
            return Err(Error::domain(format!(
                "Stokes vector norm must be ≤ 1, got {norm}"
            )));
        }
        if (norm - self.dop).abs() > 1e-6 {
            return Err(Error::domain(format!(
                "Stokes vector norm {norm} must equal dop {}",
                self.dop
            )));
        }
        Ok(())
    }

    /// Euclidean norm of the vector part.
    pub fn vector_norm(&self) -> f64 {
        (self.s1 * self.s1 + self.s2 * self.s2 + self.s3 * self.s3).sqrt()
    }
}

/// One variable retarder: a fixed physical axis plus a quantized
/// retardance. A waveplate at physical angle θ rotates the Poincaré sphere
/// about the equatorial axis (cos 2θ, sin 2θ, 0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetarderStage {
    /// Physical axis orientation in radians.
    pub axis_angle_rad: f64,
    /// Retardance in radians; an integer multiple of the stack
    /// quantization.
    pub retardance_rad: f64,
}

/// An electronic polarization controller: a fixed sequence of variable
/// retarders addressed with finite granularity.
#[derive(Debug, Clone, PartialEq)]
pub struct RetarderStack {
    /// Stages applied in order.
    pub stages: Vec<RetarderStage>,
    /// Actuation granularity in radians of retardance (> 0).
    pub quantization_rad: f64,
}

impl RetarderStack {
    /// Standard four-stage EPC with axes alternating 0° and 45°
    /// (Poincaré rotation axes alternating s1 and s2), all retardances
    /// zero.
    pub fn epc(quantization_rad: f64) -> Result<RetarderStack> {
        let stack = RetarderStack {
            stages: (0..4)
                .map(|i| RetarderStage {
                    axis_angle_rad: if i % 2 == 0 {
                        0.0
                    } else {
                        std::f64::consts::FRAC_PI_4
                    },
                    retardance_rad: 0.0,
                })
                .collect(),
            quantization_rad,
        };
        stack.validate()?;
        Ok(stack)
    }

    /// Checks the field invariants.
    pub fn validate(&self) -> Result<()> {
        if !(self.quantization_rad.is_finite() && self.quantization_rad > 0.0) {
            return Err(Error::domain("quantization step must be > 0"));
        }
        if self.stages.is_empty() {
            return Err(Error::domain("stack needs at least one stage"));
        }
        for (i, stage) in self.stages.iter().enumerate() {
            if !stage.axis_angle_rad.is_finite() || !stage.retardance_rad.is_finite() {
                return Err(Error::domain(format!("stage {i} has non-finite fields")));
            }
            let quanta = stage.retardance_rad / self.quantization_rad;
            if (quanta - quanta.round()).abs() > 1e-6 {
                return Err(Error::domain(format!(
                    "stage {i} retardance {} is not a multiple of the quantization {}",
                    stage.retardance_rad, self.quantization_rad
                )));
            }
        }
        Ok(())
    }

    /// Returns a copy with stage `idx` offset by `quanta` quantization
    /// steps.
    fn with_offset(&self, idx: usize, quanta: i64) -> RetarderStack {
        let mut out = self.clone();
        out.stages[idx].retardance_rad += quanta as f64 * self.quantization_rad;
        out
    }
}

// ---------------------------------------------------------------------------
// State algebra
// ---------------------------------------------------------------------------

/// Rodrigues rotation of `v` about the unit axis `axis` by `angle`.
fn rotate_about(v: [f64; 3], axis: [f64; 3], angle: f64) -> [f64; 3] {
    let (sin, cos) = angle.sin_cos();
    let dot = axis[0] * v[0] + axis[1] * v[1] + axis[2] * v[2];
    let cross = [
        axis[1] * v[2] - axis[2] * v[1],
        axis[2] * v[0] - axis[0] * v[2],
        axis[0] * v[1] - axis[1] * v[0],
    ];
    [
        v[0] * cos + cross[0] * sin + axis[0] * dot * (1.0 - cos),
        v[1] * cos + cross[1] * sin + axis[1] * dot * (1.0 - cos),
        v[2] * cos + cross[2] * sin + axis[2] * dot * (1.0 - cos),
    ]
}

/// Applies the stack to a state: each stage rotates the Poincaré vector
/// about (cos 2θ, sin 2θ, 0) by its retardance. S0 and dop are untouched.
pub fn apply_stack(stack: &RetarderStack, state: &PolarizationState) -> Result<PolarizationState> {
    stack.validate()?;
    state.validate()?;
    let mut v = [state.s1, state.s2, state.s3];
    for stage in &stack.stages {
        let (sin2t, cos2t) = (2.0 * stage.axis_angle_rad).sin_cos();
        v = rotate_about(v, [cos2t, sin2t, 0.0], stage.retardance_rad);
    }
    Ok(PolarizationState {
        s0: state.s0,
        s1: v[0],
        s2: v[1],
        s3: v[2],
        dop: state.dop,
    })
}

/// Angle between two states on the Poincaré sphere:
/// `arccos(ŝ_a · ŝ_b) ∈ [0, π]` over the normalized vector parts.
pub fn poincare_angle(a: &PolarizationState, b: &PolarizationState) -> Result<f64> {
    a.validate()?;
    b.validate()?;
    let (na, nb) = (a.vector_norm(), b.vector_norm());
    if na <= 0.0 || nb <= 0.0 {
        return Err(Error::domain(
            "Poincaré angle requires a non-zero degree of polarization",
        ));
    }
    let dot = (a.s1 * b.s1 + a.s2 * b.s2 + a.s3 * b.s3) / (na * nb);
    Ok(dot.clamp(-1.0, 1.0).acos())
}

/// QBER of a state measured against a basis pole, with an intrinsic base
/// error:
///
/// `QBER = e_base + (1 − 2·e_base)·(1 − cos Θ)/2`
///
/// where Θ is the Poincaré angle to the pole. Equals `e_base` at Θ = 0 and
/// `1 − e_base` at Θ = π. `cos Θ` is taken straight from the normalized
/// dot product, so orthogonal poles give exactly (1 ± 2·e_base)/2 with no
/// arccos/cos round trip.
pub fn qber_for_state(
    state: &PolarizationState,
    basis: &PolarizationState,
    base_error: f64,
) -> Result<f64> {
    if !(0.0..=0.5).contains(&base_error) {
        return Err(Error::domain("base error must lie in [0, 0.5]"));
    }
    state.validate()?;
    basis.validate()?;
    let (na, nb) = (state.vector_norm(), basis.vector_norm());
    if na <= 0.0 || nb <= 0.0 {
        return Err(Error::domain(
            "QBER against a basis requires a non-zero degree of polarization",
        ));
    }
    let cos_theta = ((state.s1 * basis.s1 + state.s2 * basis.s2 + state.s3 * basis.s3) / (na * nb))
        .clamp(-1.0, 1.0);
    Ok(base_error + (1.0 - 2.0 * base_error) * 0.5 * (1.0 - cos_theta))
}

/// Base QBER of a polarizing measurement with the given extinction ratio:
/// `1/(1 + 10^(ER/10))`.
pub fn base_qber_from_extinction_db(extinction_db: f64) -> Result<f64> {
    if !extinction_db.is_finite() {
        return Err(Error::domain("extinction ratio must be finite"));
    }
    Ok(1.0 / (1.0 + 10f64.powf(extinction_db / 10.0)))
}

/// Extinction ratio (dB) corresponding to a base QBER in (0, 0.5].
pub fn extinction_db_for_base_qber(base_qber: f64) -> Result<f64> {
    if !(base_qber > 0.0 && base_qber <= 0.5) {
        return Err(Error::domain("base QBER must lie in (0, 0.5]"));
    }
    Ok(10.0 * ((1.0 - base_qber) / base_qber).log10())
}

// ---------------------------------------------------------------------------
// Alignment
// ---------------------------------------------------------------------------

/// Alignment termination settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignmentOptions {
    /// Poincaré-distance tolerance in radians (> 0).
    pub tolerance_rad: f64,
    /// Budget of objective evaluations.
    pub max_evaluations: usize,
}

impl Default for AlignmentOptions {
    fn default() -> Self {
        AlignmentOptions {
            tolerance_rad: 0.05,
            max_evaluations: 500,
        }
    }
}

/// One logged alignment step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignmentStep {
    /// Iteration counter (0 = initial evaluation).
    pub iteration: usize,
    /// Normalized projected power in [0, 1] (the measurable objective).
    pub objective: f64,
    /// Poincaré distance to the target in radians.
    pub distance_rad: f64,
}

/// Result of a gradient-descent alignment run.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentOutcome {
    /// The stack after the final accepted move.
    pub stack: RetarderStack,
    /// Objective/distance trajectory, one entry per iteration.
    pub trajectory: Vec<AlignmentStep>,
    /// Whether the tolerance was reached within the budget.
    pub converged: bool,
    /// Objective evaluations consumed.
    pub evaluations: usize,
    /// Iterations performed (accepted or rejected sweeps).
    pub iterations: usize,
    /// Final Poincaré distance to the target in radians.
    pub final_distance_rad: f64,
    /// Extinction ratio implied by the final objective, in dB
    /// (`10·log10(p/(1−p))`, +∞ capped at 200 dB).
    pub achieved_extinction_db: f64,
}

/// Aligns `input` onto `target` by hill-climbing the measurable projection
/// power `p = (1 + cos Θ)/2` over the quantized retardances.
///
/// Each iteration probes every stage at ± the current step (an integer
/// number of quanta, grown ×2 after an accepted move and halved after a
/// rejected sweep, never below one quantum) and applies the single best
/// improving move; ties break toward the lowest stage index, then the
/// positive direction. Terminates when the Poincaré distance to the target
/// drops below the tolerance, or the evaluation budget is exhausted (the
/// outcome is then flagged non-converged — not an error).
pub fn align_gradient_descent(
    stack: &RetarderStack,
    input: &PolarizationState,
    target: &PolarizationState,
    opts: &AlignmentOptions,
) -> Result<AlignmentOutcome> {
    stack.validate()?;
    input.validate()?;
    target.validate()?;
    if !opts.tolerance_rad.is_finite() || opts.tolerance_rad <= 0.0 {
        return Err(Error::domain("alignment tolerance must be > 0"));
    }
    if opts.max_evaluations == 0 {
        return Err(Error::domain(
            "alignment needs a non-zero evaluation budget",
        ));
    }
    if input.dop <= 0.0 || target.dop <= 0.0 {
        return Err(Error::domain(
            "alignment requires polarized input and target",
        ));
    }

    let evaluations = std::cell::Cell::new(0usize);
    let measure = |s: &RetarderStack| -> Result<(f64, f64)> {
        evaluations.set(evaluations.get() + 1);
        let out = apply_stack(s, input)?;
        let theta = poincare_angle(&out, target)?;
        Ok((0.5 * (1.0 + theta.cos()), theta))
    };

    let mut current = stack.clone();
    let (mut objective, mut distance) = measure(&current)?;
    let mut trajectory = vec![AlignmentStep {
        iteration: 0,
        objective,
        distance_rad: distance,
    }];
    let mut converged = distance < opts.tolerance_rad;
    let mut step_quanta: i64 = 1;
    let mut iterations = 0usize;

    while !converged && evaluations.get() < opts.max_evaluations {
        iterations += 1;
        let mut best: Option<(usize, i64, f64, f64)> = None; // stage, ±quanta, obj, dist
        'probe: for stage in 0..current.stages.len() {
            for quanta in [step_quanta, -step_quanta] {
                if evaluations.get() >= opts.max_evaluations {
                    break 'probe;
                }
                let candidate = current.with_offset(stage, quanta);
                let (obj, dist) = measure(&candidate)?;
                // Strict improvement required; earlier probes win ties.
                if obj > objective && best.is_none_or(|b| obj > b.2) {
                    best = Some((stage, quanta, obj, dist));
                }
            }
        }
        match best {
            Some((stage, quanta, obj, dist)) => {
                current = current.with_offset(stage, quanta);
                objective = obj;
                distance = dist;
                step_quanta = (step_quanta * 2).min(1 << 20);
            }
            None => {
                step_quanta = (step_quanta / 2).max(1);
            }
        }
        trajectory.push(AlignmentStep {
            iteration: iterations,
            objective,
            distance_rad: distance,
        });
        converged = distance < opts.tolerance_rad;
    }

    let achieved_extinction_db = if objective >= 1.0 {
        200.0
    } else if objective <= 0.0 {
        -200.0
    } else {
        (10.0 * (objective / (1.0 - objective)).log10()).min(200.0)
    };
    Ok(AlignmentOutcome {
        stack: current,
        trajectory,
        converged,
        evaluations: evaluations.get(),
        iterations,
        final_distance_rad: distance,
        achieved_extinction_db,
    })
}

/// Writes an alignment trajectory as CSV with header
/// `iter,objective,distance_rad`.
pub fn write_alignment_csv<W: Write>(trajectory: &[AlignmentStep], mut w: W) -> Result<()> {
    writeln!(w, "iter,objective,distance_rad")?;
    for step in trajectory {
        writeln!(
            w,
            "{},{},{}",
            step.iteration, step.objective, step.distance_rad
        )?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Drift simulation
// ---------------------------------------------------------------------------

/// A discrete polarization disruption: a rotation of the Poincaré vector
/// about a seeded random axis by a fixed magnitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepEvent {
    /// Event time in seconds from the start of the run.
    pub time_s: f64,
    /// Rotation magnitude in radians.
    pub magnitude_rad: f64,
}

/// Stochastic drift model on the Poincaré sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftProcess {
    /// Isotropic angular diffusion rate in rad²/s (≥ 0).
    pub diffusion_rate_rad2_per_s: f64,
    /// Step events, applied in chronological order.
    pub step_events: Vec<StepEvent>,
}

impl DriftProcess {
    /// Checks the field invariants.
    pub fn validate(&self) -> Result<()> {
        if !(self.diffusion_rate_rad2_per_s >= 0.0 && self.diffusion_rate_rad2_per_s.is_finite()) {
            return Err(Error::domain("diffusion rate must be finite and ≥ 0"));
        }
        for (i, e) in self.step_events.iter().enumerate() {
            if !(e.time_s.is_finite() && e.time_s >= 0.0) {
                return Err(Error::domain(format!("event {i} time must be ≥ 0")));
            }
            if !(e.magnitude_rad.is_finite() && e.magnitude_rad >= 0.0) {
                return Err(Error::domain(format!("event {i} magnitude must be ≥ 0")));
            }
        }
        Ok(())
    }
}

/// One sample of a drift timeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftSample {
    /// Sample time in seconds.
    pub time_s: f64,
    /// State at this time.
    pub state: PolarizationState,
}

/// Simulates Brownian motion of the polarization on the Poincaré sphere:
/// per step of `dt_s`, two tangent-plane Gaussian increments of variance
/// `diffusion·dt` displace the unit vector, which is re-projected onto the
/// sphere; step events falling inside a step apply their rotation about a
/// seeded uniformly random axis. Samples are emitted at 0, dt, 2·dt, …,
/// through `duration_s`. Identical seeds give bitwise identical timelines.
pub fn simulate_drift(
    process: &DriftProcess,
    initial: &PolarizationState,
    duration_s: f64,
    dt_s: f64,
    seed: u64,
) -> Result<Vec<DriftSample>> {
    process.validate()?;
    initial.validate()?;
    if !(dt_s > 0.0 && dt_s.is_finite()) {
        return Err(Error::domain("time step must be > 0"));
    }
    if !(duration_s >= 0.0 && duration_s.is_finite()) {
        return Err(Error::domain("duration must be ≥ 0"));
    }
    let mut events = process.step_events.clone();
    events.sort_by(|a, b| a.time_s.partial_cmp(&b.time_s).unwrap());
    let mut event_idx = 0usize;

    let n_steps = (duration_s / dt_s).floor() as usize;
    let mut rng = substream(seed, 0);
    let sigma = (process.diffusion_rate_rad2_per_s * dt_s).sqrt();

    let norm0 = initial.vector_norm();
    let mut unit = if norm0 > 0.0 {
        [initial.s1 / norm0, initial.s2 / norm0, initial.s3 / norm0]
    } else {
        [0.0, 0.0, 0.0]
    };
    let make_state = |u: [f64; 3]| PolarizationState {
        s0: initial.s0,
        s1: u[0] * initial.dop,
        s2: u[1] * initial.dop,
        s3: u[2] * initial.dop,
        dop: initial.dop,
    };

    let mut timeline = Vec::with_capacity(n_steps + 1);
    timeline.push(DriftSample {
        time_s: 0.0,
        state: make_state(unit),
    });
    for step in 1..=n_steps {
        let t = step as f64 * dt_s;
        if norm0 > 0.0 {
            if sigma > 0.0 {
                // Tangent basis orthogonal to the current direction.
                let pick = if unit[0].abs() < 0.9 {
                    [1.0, 0.0, 0.0]
                } else {
                    [0.0, 1.0, 0.0]
                };
                let mut e1 = [
                    unit[1] * pick[2] - unit[2] * pick[1],
                    unit[2] * pick[0] - unit[0] * pick[2],
                    unit[0] * pick[1] - unit[1] * pick[0],
                ];
                let n1 = (e1[0] * e1[0] + e1[1] * e1[1] + e1[2] * e1[2]).sqrt();
                e1 = [e1[0] / n1, e1[1] / n1, e1[2] / n1];
                let e2 = [
                    unit[1] * e1[2] - unit[2] * e1[1],
                    unit[2] * e1[0] - unit[0] * e1[2],
                    unit[0] * e1[1] - unit[1] * e1[0],
                ];
                let g1: f64 = rng.sample::<f64, _>(StandardNormal) * sigma;
                let g2: f64 = rng.sample::<f64, _>(StandardNormal) * sigma;
                let moved = [
                    unit[0] + g1 * e1[0] + g2 * e2[0],
                    unit[1] + g1 * e1[1] + g2 * e2[1],
                    unit[2] + g1 * e1[2] + g2 * e2[2],
                ];
                let n = (moved[0] * moved[0] + moved[1] * moved[1] + moved[2] * moved[2]).sqrt();
                unit = [moved[0] / n, moved[1] / n, moved[2] / n];
            }
            while event_idx < events.len() && events[event_idx].time_s <= t {
                // Uniform random axis via a normalized Gaussian triple.
                let mut axis = [0.0f64; 3];
                loop {
                    for a in axis.iter_mut() {
                        *a = rng.sample(StandardNormal);
                    }
                    let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
                    if n > 1e-12 {
                        axis = [axis[0] / n, axis[1] / n, axis[2] / n];
                        break;
                    }
                }
                unit = rotate_about(unit, axis, events[event_idx].magnitude_rad);
                let n = (unit[0] * unit[0] + unit[1] * unit[1] + unit[2] * unit[2]).sqrt();
                unit = [unit[0] / n, unit[1] / n, unit[2] / n];
                event_idx += 1;
            }
        }
        timeline.push(DriftSample {
            time_s: t,
            state: make_state(unit),
        });
    }
    Ok(timeline)
}

/// Writes a drift timeline as CSV with header `time_s,s1,s2,s3,qber`,
/// scoring each sample against the basis pole with the given base error.
pub fn write_drift_csv<W: Write>(
    timeline: &[DriftSample],
    basis: &PolarizationState,
    base_error: f64,
    mut w: W,
) -> Result<()> {
    writeln!(w, "time_s,s1,s2,s3,qber")?;
    for sample in timeline {
        let qber = qber_for_state(&sample.state, basis, base_error)?;
        writeln!(
            w,
            "{},{},{},{},{}",
            sample.time_s, sample.state.s1, sample.state.s2, sample.state.s3, qber
        )?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Counting statistics
// ---------------------------------------------------------------------------

/// QBER point estimate with a 1σ binomial-proportion interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QberEstimate {
    /// Point estimate n_wrong/(n_correct + n_wrong).
    pub qber: f64,
    /// Lower edge of the 1σ interval.
    pub interval_low: f64,
    /// Upper edge of the 1σ interval.
    pub interval_high: f64,
    /// True when the exact (Clopper–Pearson) interval was used (totals
    /// below 100); otherwise the normal approximation.
    pub exact: bool,
}

/// Estimates the QBER from error counts. Totals of at least 100 use the
/// normal approximation `q ± sqrt(q(1−q)/n)`; smaller totals fall back to
/// the exact central 68.27% Clopper–Pearson interval.
pub fn qber_from_counts(n_correct: u64, n_wrong: u64) -> Result<QberEstimate> {
    let total = n_correct + n_wrong;
    if total == 0 {
        return Err(Error::domain("QBER estimate needs at least one count"));
    }
    let n = total as f64;
    let w = n_wrong as f64;
    let qber = w / n;
    if total >= 100 {
        let sigma = (qber * (1.0 - qber) / n).sqrt();
        return Ok(QberEstimate {
            qber,
            interval_low: (qber - sigma).max(0.0),
            interval_high: (qber + sigma).min(1.0),
            exact: false,
        });
    }
    // Central 68.27% Clopper–Pearson via Beta quantiles.
    let alpha = 1.0 - 0.682_689_492_137_086;
    let low = if n_wrong == 0 {
        0.0
    } else {
        Beta::new(w, n - w + 1.0)
            .map_err(|e| Error::domain(format!("interval: {e}")))?
            .inverse_cdf(alpha / 2.0)
    };
    let high = if n_wrong == total {
        1.0
    } else {
        Beta::new(w + 1.0, n - w)
            .map_err(|e| Error::domain(format!("interval: {e}")))?
            .inverse_cdf(1.0 - alpha / 2.0)
    };
    Ok(QberEstimate {
        qber,
        interval_low: low,
        interval_high: high,
        exact: true,
    })
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn assert_close(actual: f64, expected: f64, tol: f64) {
        assert!(
            (actual - expected).abs() <= tol,
            "expected {expected}, got {actual} (tolerance {tol})"
        );
    }

    fn random_pure(rng: &mut impl Rng) -> PolarizationState {
        loop {
            let v: [f64; 3] = [
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
            ];
            if let Ok(s) = PolarizationState::pure(v[0], v[1], v[2]) {
                return s;
            }
        }
    }

    fn random_stack(rng: &mut impl Rng) -> RetarderStack {
        let mut stack = RetarderStack::epc(0.01).unwrap();
        for stage in stack.stages.iter_mut() {
            stage.retardance_rad = rng.gen_range(-400i64..=400) as f64 * 0.01;
        }
        stack
    }

    // --- apply_stack ---------------------------------------------------------

    #[test]
    fn zero_retardances_are_the_identity() {
        let stack = RetarderStack::epc(0.01).unwrap();
        let mut rng = substream(1, 0);
        for _ in 0..20 {
            let s = random_pure(&mut rng);
            let out = apply_stack(&stack, &s).unwrap();
            assert_close(out.s1, s.s1, 1e-15);
            assert_close(out.s2, s.s2, 1e-15);
            assert_close(out.s3, s.s3, 1e-15);
        }
    }

    #[test]
    fn half_wave_plate_at_45_degrees_swaps_h_and_v() {
        let mut stack = RetarderStack::epc(PI).unwrap();
        stack.stages[1].retardance_rad = PI; // the 45° stage
        let out = apply_stack(&stack, &PolarizationState::h()).unwrap();
        assert_close(out.s1, -1.0, 1e-12);
        assert_close(out.s2, 0.0, 1e-12);
        assert_close(out.s3, 0.0, 1e-12);
        assert_close(
            poincare_angle(&out, &PolarizationState::v()).unwrap(),
            0.0,
            1e-7,
        );
    }

    #[test]
    fn random_stacks_preserve_power_dop_and_norm() {
        let mut rng = substream(2, 0);
        for _ in 0..50 {
            let stack = random_stack(&mut rng);
            let state = random_pure(&mut rng);
            let out = apply_stack(&stack, &state).unwrap();
            assert_eq!(out.s0, state.s0);
            assert_eq!(out.dop, state.dop);
            assert_close(out.vector_norm(), state.vector_norm(), 1e-12);
        }
    }

    #[test]
    fn non_quantized_retardance_is_rejected() {
        let mut stack = RetarderStack::epc(0.01).unwrap();
        stack.stages[0].retardance_rad = 0.0153;
        assert!(stack.validate().is_err());
        assert!(apply_stack(&stack, &PolarizationState::h()).is_err());
    }

    // --- poincare_angle ------------------------------------------------------

    #[test]
    fn poincare_angle_reference_pairs() {
        let h = PolarizationState::h();
        let v = PolarizationState::v();
        let d = PolarizationState::d();
        assert_close(poincare_angle(&h, &h).unwrap(), 0.0, 1e-15);
        assert_close(poincare_angle(&h, &v).unwrap(), PI, 1e-12);
        assert_close(poincare_angle(&h, &d).unwrap(), FRAC_PI_2, 1e-12);
    }

    #[test]
    fn unpolarized_states_have_no_angle() {
        let unpolarized = PolarizationState {
            s0: 1.0,
            s1: 0.0,
            s2: 0.0,
            s3: 0.0,
            dop: 0.0,
        };
        assert!(poincare_angle(&unpolarized, &PolarizationState::h()).is_err());
    }

    #[test]
    fn poincare_angle_is_a_metric_on_random_triples() {
        let mut rng = substream(3, 0);
        for _ in 0..50 {
            let (a, b, c) = (
                random_pure(&mut rng),
                random_pure(&mut rng),
                random_pure(&mut rng),
            );
            let ab = poincare_angle(&a, &b).unwrap();
            let ba = poincare_angle(&b, &a).unwrap();
            let ac = poincare_angle(&a, &c).unwrap();
            let cb = poincare_angle(&c, &b).unwrap();
            assert_close(ab, ba, 1e-12);
            assert!(ab <= ac + cb + 1e-9, "triangle inequality violated");
            assert_close(poincare_angle(&a, &a).unwrap(), 0.0, 1e-9);
        }
    }

    // --- qber_for_state ------------------------------------------------------

    #[test]
    fn aligned_state_with_no_base_error_is_error_free() {
        let h = PolarizationState::h();
        assert_eq!(qber_for_state(&h, &h, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn diagonal_state_in_hv_basis_errs_half_the_time() {
        let q = qber_for_state(&PolarizationState::d(), &PolarizationState::h(), 0.0).unwrap();
        assert_close(q, 0.5, 1e-12);
    }

    #[test]
    fn twenty_five_db_extinction_gives_a_third_of_a_percent() {
        let base = base_qber_from_extinction_db(25.0).unwrap();
        assert_close(base, 3.152_309_183_260_211_5e-3, 1e-15);
        // Round trip back to dB.
        assert_close(extinction_db_for_base_qber(base).unwrap(), 25.0, 1e-9);
    }

    #[test]
    fn qber_is_monotone_in_the_poincare_angle() {
        let h = PolarizationState::h();
        let base = 0.016;
        let mut last = -1.0;
        for k in 0..=50 {
            let theta = PI * k as f64 / 50.0;
            let state = PolarizationState::pure(theta.cos(), theta.sin(), 0.0).unwrap();
            let q = qber_for_state(&state, &h, base).unwrap();
            assert!(q >= last - 1e-12, "QBER must not decrease with Θ");
            last = q;
        }
        assert_close(last, 1.0 - base, 1e-12);
    }

    // --- align_gradient_descent ----------------------------------------------

    #[test]
    fn aligned_start_converges_without_iterating() {
        let stack = RetarderStack::epc(0.01).unwrap();
        let h = PolarizationState::h();
        let out = align_gradient_descent(&stack, &h, &h, &AlignmentOptions::default()).unwrap();
        assert!(out.converged);
        assert_eq!(out.iterations, 0);
        assert_eq!(out.evaluations, 1);
        assert_eq!(out.trajectory.len(), 1);
    }

    #[test]
    fn random_starts_converge_within_budget_for_most_seeds() {
        let opts = AlignmentOptions {
            tolerance_rad: 0.05,
            max_evaluations: 500,
        };
        let target = PolarizationState::h();
        let mut converged = 0;
        for seed in 0..100u64 {
            let mut rng = substream(seed, 7);
            let input = random_pure(&mut rng);
            let stack = RetarderStack::epc(0.01).unwrap();
            let out = align_gradient_descent(&stack, &input, &target, &opts).unwrap();
            if out.converged {
                assert!(out.final_distance_rad < opts.tolerance_rad);
                assert!(out.evaluations <= opts.max_evaluations);
                converged += 1;
            }
        }
        assert!(
            converged >= 95,
            "only {converged}/100 trials converged within 500 evaluations"
        );
    }

    #[test]
    fn coarse_quantization_under_budget_leaves_residual_base_qber_near_paper_value() {
        // Granularity-limited alignment: with ~0.33 rad actuation steps the
        // optimizer stalls short of the 25 dB (0.112 rad) tolerance and the
        // mean residual misalignment QBER lands near 1.6%.
        let tolerance = {
            let p = 1.0 - base_qber_from_extinction_db(25.0).unwrap();
            (2.0 * p - 1.0).acos()
        };
        let opts = AlignmentOptions {
            tolerance_rad: tolerance,
            max_evaluations: 300,
        };
        let target = PolarizationState::h();
        let mut qber_sum = 0.0;
        let trials = 60;
        for seed in 0..trials as u64 {
            let mut rng = substream(seed, 8);
            let input = random_pure(&mut rng);
            let stack = RetarderStack::epc(0.33).unwrap();
            let out = align_gradient_descent(&stack, &input, &target, &opts).unwrap();
            qber_sum += 0.5 * (1.0 - out.final_distance_rad.cos());
        }
        let mean_qber = qber_sum / trials as f64;
        assert!(
            (0.010..=0.022).contains(&mean_qber),
            "mean residual QBER {mean_qber} not near 1.6%"
        );
    }

    #[test]
    fn alignment_is_deterministic_and_logs_a_trajectory() {
        let mut rng = substream(11, 0);
        let input = random_pure(&mut rng);
        let target = PolarizationState::d();
        let stack = RetarderStack::epc(0.01).unwrap();
        let opts = AlignmentOptions::default();
        let a = align_gradient_descent(&stack, &input, &target, &opts).unwrap();
        let b = align_gradient_descent(&stack, &input, &target, &opts).unwrap();
        assert_eq!(a, b);
        assert!(a.trajectory.len() > 1);
        let first = a.trajectory.first().unwrap();
        let last = a.trajectory.last().unwrap();
        assert!(last.distance_rad < first.distance_rad);
        let mut buf = Vec::new();
        write_alignment_csv(&a.trajectory, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("iter,objective,distance_rad\n"));
        assert_eq!(text.lines().count(), a.trajectory.len() + 1);
    }

    // --- simulate_drift ------------------------------------------------------

    #[test]
    fn zero_diffusion_without_events_is_constant() {
        let process = DriftProcess {
            diffusion_rate_rad2_per_s: 0.0,
            step_events: vec![],
        };
        let initial = PolarizationState::pure(0.6, 0.8, 0.0).unwrap();
        let timeline = simulate_drift(&process, &initial, 100.0, 1.0, 5).unwrap();
        assert_eq!(timeline.len(), 101);
        for sample in &timeline {
            assert_eq!(sample.state, timeline[0].state);
        }
    }

    #[test]
    fn drift_is_bitwise_reproducible_per_seed() {
        let process = DriftProcess {
            diffusion_rate_rad2_per_s: 1e-6,
            step_events: vec![StepEvent {
                time_s: 50.0,
                magnitude_rad: 1.0,
            }],
        };
        let initial = PolarizationState::h();
        let a = simulate_drift(&process, &initial, 200.0, 0.5, 9).unwrap();
        let b = simulate_drift(&process, &initial, 200.0, 0.5, 9).unwrap();
        let c = simulate_drift(&process, &initial, 200.0, 0.5, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn drift_stays_on_the_sphere() {
        let process = DriftProcess {
            diffusion_rate_rad2_per_s: 1e-4,
            step_events: vec![StepEvent {
                time_s: 30.0,
                magnitude_rad: 2.0,
            }],
        };
        let initial = PolarizationState::h();
        for sample in simulate_drift(&process, &initial, 60.0, 0.1, 13).unwrap() {
            assert_close(sample.state.vector_norm(), 1.0, 1e-12);
            sample.state.validate().unwrap();
        }
    }

    #[test]
    fn tuned_slow_diffusion_keeps_nine_hour_qber_in_the_paper_band() {
        // Base error 3.0% sets the band floor; an initial misalignment of
        // 0.2 rad plus diffusion at 3e-8 rad²/s keeps the nine-hour QBER
        // inside [3.0%, 6.7%].
        let process = DriftProcess {
            diffusion_rate_rad2_per_s: 3e-8,
            step_events: vec![],
        };
        let initial = PolarizationState::pure(0.2f64.cos(), 0.2f64.sin(), 0.0).unwrap();
        let basis = PolarizationState::h();
        let timeline = simulate_drift(&process, &initial, 9.0 * 3600.0, 3.0, 41).unwrap();
        let mut min_q = f64::INFINITY;
        let mut max_q = f64::NEG_INFINITY;
        for sample in &timeline {
            let q = qber_for_state(&sample.state, &basis, 0.03).unwrap();
            min_q = min_q.min(q);
            max_q = max_q.max(q);
        }
        assert!(
            min_q >= 0.030 && max_q <= 0.067,
            "QBER band [{min_q}, {max_q}] outside [0.030, 0.067]"
        );
    }

    #[test]
    fn a_single_step_event_jumps_the_qber_above_ten_percent() {
        let event_time = 16_200.0;
        let process = DriftProcess {
            diffusion_rate_rad2_per_s: 3e-8,
            step_events: vec![StepEvent {
                time_s: event_time,
                magnitude_rad: 2.0,
            }],
        };
        let initial = PolarizationState::pure(0.2f64.cos(), 0.2f64.sin(), 0.0).unwrap();
        let basis = PolarizationState::h();
        let dt = 3.0;
        let timeline = simulate_drift(&process, &initial, 9.0 * 3600.0, dt, 41).unwrap();
        let qber: Vec<f64> = timeline
            .iter()
            .map(|s| qber_for_state(&s.state, &basis, 0.03).unwrap())
            .collect();
        let event_step = (event_time / dt) as usize;
        // Diffusion-induced QBER std before the event.
        let pre = &qber[..event_step];
        let mean = pre.iter().sum::<f64>() / pre.len() as f64;
        let std =
            (pre.iter().map(|q| (q - mean) * (q - mean)).sum::<f64>() / pre.len() as f64).sqrt();
        let jump = (qber[event_step] - qber[event_step - 1]).abs();
        assert!(
            jump > 10.0 * std,
            "jump {jump} not above 10× diffusion std {std}"
        );
        assert!(
            qber[event_step] > 0.10,
            "post-event QBER {} not above 10%",
            qber[event_step]
        );
        let mut buf = Vec::new();
        write_drift_csv(&timeline[..4], &basis, 0.03, &mut buf).unwrap();
        assert!(String::from_utf8(buf)
            .unwrap()
            .starts_with("time_s,s1,s2,s3,qber\n"));
    }

    // --- qber_from_counts ----------------------------------------------------

    #[test]
    fn all_wrong_and_all_right_edge_cases() {
        let all_wrong = qber_from_counts(0, 50).unwrap();
        assert_eq!(all_wrong.qber, 1.0);
        assert_eq!(all_wrong.interval_high, 1.0);
        assert!(all_wrong.exact);
        let all_right = qber_from_counts(50, 0).unwrap();
        assert_eq!(all_right.qber, 0.0);
        assert_eq!(all_right.interval_low, 0.0);
        assert!(qber_from_counts(0, 0).is_err());
    }

    #[test]
    fn large_sample_matches_the_binomial_standard_error() {
        // (9702, 298): 2.98% with σ = sqrt(q(1−q)/n) ≈ 0.17 points.
        let est = qber_from_counts(9702, 298).unwrap();
        assert_close(est.qber, 0.0298, 1e-12);
        assert!(!est.exact);
        let sigma = (est.interval_high - est.interval_low) / 2.0;
        assert_close(sigma, 1.700_351_728_319_761_4e-3, 1e-12);
    }

    #[test]
    fn small_samples_use_the_exact_interval() {
        let est = qber_from_counts(47, 5).unwrap();
        assert!(est.exact);
        assert!(est.interval_low > 0.0 && est.interval_low < est.qber);
        assert!(est.interval_high < 1.0 && est.interval_high > est.qber);
        // The exact interval is wider than the normal approximation here.
        let sigma_normal = (est.qber * (1.0 - est.qber) / 52.0).sqrt();
        assert!(est.interval_high - est.qber > 0.8 * sigma_normal);
    }
}
