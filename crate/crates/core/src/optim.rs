//! Bounded derivative-free minimization (Nelder–Mead simplex).
//!
//! The calibration utilities fit a handful of free parameters (intrinsic
//! optical error, background yield, receiver efficiency, spectral peak
//! shapes) against reference observables. The objectives are cheap, smooth
//! enough, and low-dimensional, so a classic Nelder–Mead simplex with box
//! projection is the pragmatic choice:
//!
//! - candidates are clamped into the feasible box before evaluation,
//! - all tie-breaking is by stable ordering, making every run bit-for-bit
//!   deterministic,
//! - convergence is declared when both the simplex diameter and the spread
//!   of objective values collapse below tolerances.

use crate::error::{Error, Result};

// ---------------------------------------------------------------------------
// Options and outcome
// ---------------------------------------------------------------------------

/// Termination controls for [`minimize`].
#[derive(Debug, Clone)]
pub struct Options {
    /// Hard budget on objective evaluations.
    pub max_evals: usize,
    /// Simplex diameter below which the search stops (per coordinate,
    /// relative to the box width).
    pub x_tol: f64,
    /// Spread of objective values below which the search stops.
    pub f_tol: f64,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            max_evals: 4000,
            x_tol: 1e-10,
            f_tol: 1e-15,
        }
    }
}

/// Result of a [`minimize`] run.
#[derive(Debug, Clone)]
pub struct Outcome {
    /// Best parameter vector found (inside the box).
    pub x: Vec<f64>,
    /// Objective value at `x`.
    pub fx: f64,
    /// Number of objective evaluations consumed.
    pub evals: usize,
    /// Number of simplex iterations performed.
    pub iterations: usize,
    /// Whether the tolerances were met within the budget.
    pub converged: bool,
}

// ---------------------------------------------------------------------------
// Nelder–Mead
// ---------------------------------------------------------------------------

/// Minimizes `f` over the axis-aligned box `bounds`, starting from `start`.
///
/// `start` is clamped into the box. A zero-dimensional problem returns the
/// (empty) start immediately. The search is fully deterministic.
pub fn minimize(
    mut f: impl FnMut(&[f64]) -> f64,
    start: &[f64],
    bounds: &[(f64, f64)],
    opts: &Options,
) -> Result<Outcome> {
    if start.len() != bounds.len() {
        return Err(Error::domain(format!(
            "start has {} coordinates but bounds has {}",
            start.len(),
            bounds.len()
        )));
    }
    for (i, &(lo, hi)) in bounds.iter().enumerate() {
        if !lo.is_finite() || !hi.is_finite() || lo >= hi {
            return Err(Error::domain(format!(
                "bounds[{i}] = [{lo}, {hi}] is not a non-empty finite interval"
            )));
        }
    }

    let n = start.len();
    if n == 0 {
        let fx = f(&[]);
        return Ok(Outcome {
            x: Vec::new(),
            fx,
            evals: 1,
            iterations: 0,
            converged: true,
        });
    }

    let clamp = |x: &mut [f64]| {
        for (xi, &(lo, hi)) in x.iter_mut().zip(bounds) {
            *xi = xi.clamp(lo, hi);
        }
    };

    // Initial simplex: the start point plus one vertex per dimension,
    // displaced by 10% of the box width (flipped if that leaves the box).
    let mut x0 = start.to_vec();
    clamp(&mut x0);
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| -> f64 {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.clone());
    for i in 0..n {
        let (lo, hi) = bounds[i];
        let step = 0.10 * (hi - lo);
        let mut v = x0.clone();
        v[i] = if v[i] + step <= hi {
            v[i] + step
        } else {
            v[i] - step
        };
        simplex.push(v);
    }
    let mut fvals: Vec<f64> = simplex.iter().map(|v| eval(v, &mut evals)).collect();

    // Standard coefficients: reflection, expansion, contraction, shrink.
    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut iterations = 0usize;
    let mut converged = false;

    while evals < opts.max_evals {
        // Order vertices by objective, stable in the original index for
        // deterministic tie-breaking.
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| {
            fvals[a]
                .partial_cmp(&fvals[b])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let reordered: Vec<Vec<f64>> = order.iter().map(|&i| simplex[i].clone()).collect();
        let refvals: Vec<f64> = order.iter().map(|&i| fvals[i]).collect();
        simplex = reordered;
        fvals = refvals;

        // Convergence: simplex spread in x (relative to box width) and f.
        let f_spread = fvals[n] - fvals[0];
        let mut x_spread = 0.0f64;
        for i in 0..n {
            let (lo, hi) = bounds[i];
            let width = hi - lo;
            for v in simplex.iter().skip(1) {
                x_spread = x_spread.max((v[i] - simplex[0][i]).abs() / width);
            }
        }
        if f_spread <= opts.f_tol && x_spread <= opts.x_tol {
            converged = true;
            break;
        }

        iterations += 1;

        // Centroid of all but the worst vertex.
        let mut centroid = vec![0.0; n];
        for v in simplex.iter().take(n) {
            for (c, &vi) in centroid.iter_mut().zip(v) {
                *c += vi;
            }
        }
        for c in centroid.iter_mut() {
            *c /= n as f64;
        }

        let lerp = |from: &[f64], towards: &[f64], t: f64| -> Vec<f64> {
            let mut out: Vec<f64> = from
                .iter()
                .zip(towards)
                .map(|(&a, &b)| a + t * (b - a))
                .collect();
            clamp(&mut out);
            out
        };

        // Reflection.
        let reflected = lerp(&centroid, &simplex[n], -alpha);
        let f_reflected = eval(&reflected, &mut evals);

        if f_reflected < fvals[0] {
            // Expansion.
            let expanded = lerp(&centroid, &simplex[n], -alpha * gamma);
            let f_expanded = eval(&expanded, &mut evals);
            if f_expanded < f_reflected {
                simplex[n] = expanded;
                fvals[n] = f_expanded;
            } else {
                simplex[n] = reflected;
                fvals[n] = f_reflected;
            }
            continue;
        }
        if f_reflected < fvals[n - 1] {
            simplex[n] = reflected;
            fvals[n] = f_reflected;
            continue;
        }

        // Contraction (outside if the reflection improved on the worst).
        let contracted = if f_reflected < fvals[n] {
            lerp(&centroid, &reflected, rho)
        } else {
            lerp(&centroid, &simplex[n], rho)
        };
        let f_contracted = eval(&contracted, &mut evals);
        if f_contracted < fvals[n].min(f_reflected) {
            simplex[n] = contracted;
            fvals[n] = f_contracted;
            continue;
        }

        // Shrink towards the best vertex.
        let best = simplex[0].clone();
        for i in 1..=n {
            simplex[i] = lerp(&best, &simplex[i], sigma);
            fvals[i] = eval(&simplex[i], &mut evals);
        }
    }

    Ok(Outcome {
        x: simplex[0].clone(),
        fx: fvals[0],
        evals,
        iterations,
        converged,
    })
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
