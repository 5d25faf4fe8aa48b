use std::f64::consts::PI;

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use super::phase::wrap_angle;
use crate::error::{Error, Result};

/// Values this close above `-π` are reported as `π`.
const BRANCH_TOL: f64 = 1e-12;

fn phasor_sum(phases: impl Iterator<Item = f64>) -> Complex<f64> {
    phases.fold(Complex::new(0.0, 0.0), |acc, th| {
        acc + Complex::from_polar(1.0, th)
    })
}

/// Circular difference between the mean phases of even- and odd-indexed
/// segments (head is index 0) at one instant, in `(-π, π]`.
pub fn even_odd_difference_at(phases: &[f64]) -> Result<f64> {
    if phases.len() < 2 {
        return Err(Error::Degenerate(
            "even/odd difference needs at least two segments",
        ));
    }
    let even = phasor_sum(phases.iter().step_by(2).copied());
    let odd = phasor_sum(phases.iter().skip(1).step_by(2).copied());
    let d = (even * odd.conj()).arg();
    Ok(if d <= -PI + BRANCH_TOL { PI } else { d })
}

/// Even/odd phase difference over time; `theta[k][i]` is the phase of
/// segment `k` at sample `i`.
pub fn even_odd_phase_difference(theta: &[Vec<f64>]) -> Result<Vec<f64>> {
    if theta.len() < 2 {
        return Err(Error::Degenerate(
            "even/odd difference needs at least two segments",
        ));
    }
    let n = theta[0].len();
    if let Some(bad) = theta.iter().find(|th| th.len() != n) {
        return Err(Error::Mismatch {
            what: "phase samples per segment",
            expected: n,
            got: bad.len(),
        });
    }
    let mut buf = vec![0.0; theta.len()];
    (0..n)
        .map(|i| {
            for (b, th) in buf.iter_mut().zip(theta) {
                *b = th[i];
            }
            even_odd_difference_at(&buf)
        })
        .collect()
}

/// Distance of each difference from `target` on the circle, in `[0, π]`.
pub fn phase_error(delta: &[f64], target: f64) -> Vec<f64> {
    delta.iter().map(|d| wrap_angle(d - target).abs()).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub converged: bool,
    /// Start of the first full period spent below tolerance, in periods
    /// from the first sample.
    pub periods_to_converge: Option<f64>,
    /// Whether the error never leaves the tolerance again after converging.
    pub stays_converged: bool,
    pub steady_state_mean: f64,
    pub steady_state_std: f64,
}

/// Convergence of an error series sampled at times `t`.
pub fn convergence_report(
    t: &[f64],
    e: &[f64],
    period: f64,
    tol: f64,
) -> Result<ConvergenceReport> {
    if !(period > 0.0 && period.is_finite()) {
        return Err(Error::config("period_estimate", "must be > 0"));
    }
    if t.len() != e.len() {
        return Err(Error::Mismatch {
            what: "error samples",
            expected: t.len(),
            got: e.len(),
        });
    }
    let (Some(&t0), Some(&t_end)) = (t.first(), t.last()) else {
        return Err(Error::Degenerate("empty error series"));
    };
    if t_end - t0 < period - 1e-9 {
        return Err(Error::Degenerate(
            "error series must cover at least one period",
        ));
    }

    // first index starting a full period of samples below tolerance
    let mut start = None;
    let mut run_start: Option<usize> = None;
    for (i, (&ti, &ei)) in t.iter().zip(e).enumerate() {
        if ei < tol {
            let s = *run_start.get_or_insert(i);
            if ti - t[s] >= period - 1e-9 {
                start = Some(s);
                break;
            }
        } else {
            run_start = None;
        }
    }

    let tail_from = t_end - 3.0 * period;
    let tail: Vec<f64> = t
        .iter()
        .zip(e)
        .filter(|(&ti, _)| ti >= tail_from - 1e-9)
        .map(|(_, &ei)| ei)
        .collect();
    let n = tail.len() as f64;
    let mean = tail.iter().sum::<f64>() / n;
    let std = (tail.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();

    Ok(ConvergenceReport {
        converged: start.is_some(),
        periods_to_converge: start.map(|s| (t[s] - t0) / period),
        stays_converged: start.is_some_and(|s| e[s..].iter().all(|&v| v < tol)),
        steady_state_mean: mean,
        steady_state_std: std,
    })
}
