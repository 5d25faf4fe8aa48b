//! Phase synchronization and posture statistics of recorded trials.

mod circular;
mod phase;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

pub use circular::{
    convergence_report, even_odd_difference_at, even_odd_phase_difference, phase_error,
    ConvergenceReport,
};
pub use phase::{
    build_phase_signal, estimate_phase, raw_phase_channels, segment_phases, unwrap, wrap_angle,
    PhaseModel, PhaseSeries, PhaseSignal, CORRECTION_ORDER, PHASE_CHANNELS,
};

use crate::error::Result;
use crate::sim::Trajectory;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub mean: f64,
    pub std: f64,
    /// Mean of absolute values.
    pub abs_mean: f64,
}

impl Stats {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let v: Vec<f64> = values.into_iter().collect();
        if v.is_empty() {
            return Stats::default();
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        Stats {
            mean,
            std: (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt(),
            abs_mean: v.iter().map(|x| x.abs()).sum::<f64>() / n,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PostureReport {
    pub window_start: f64,
    pub height: Stats,
    pub pitch: Stats,
    pub roll: Stats,
    /// Travel of the body origin along the mean heading.
    pub forward_displacement: f64,
    pub mean_speed: f64,
    /// Highest body-origin elevation above its value at the window start.
    pub elevation_gain: f64,
}

/// Posture statistics over records at or after `window_start`, skipping the
/// first record. `None` without ground (floating) or when the window is
/// empty.
pub fn posture_report(traj: &Trajectory, window_start: f64) -> Option<PostureReport> {
    if traj.floating {
        return None;
    }
    let window: Vec<_> = traj
        .records
        .iter()
        .skip(1)
        .filter(|r| r.t >= window_start - 1e-9)
        .collect();
    let (first, last) = (window.first()?, window.last()?);
    let heading = {
        let (x, y) = window.iter().fold((0.0, 0.0), |(x, y), r| {
            (x + r.body.forward[0], y + r.body.forward[1])
        });
        let norm = x.hypot(y);
        if norm > 0.0 {
            [x / norm, y / norm]
        } else {
            [1.0, 0.0]
        }
    };
    let dx = last.body.origin[0] - first.body.origin[0];
    let dy = last.body.origin[1] - first.body.origin[1];
    let forward = dx * heading[0] + dy * heading[1];
    let span = last.t - first.t;
    let z0 = first.body.origin[2];
    Some(PostureReport {
        window_start: first.t,
        height: Stats::of(window.iter().filter_map(|r| r.body.height)),
        pitch: Stats::of(window.iter().map(|r| r.body.pitch)),
        roll: Stats::of(window.iter().map(|r| r.body.roll)),
        forward_displacement: forward,
        mean_speed: if span > 0.0 { forward / span } else { 0.0 },
        elevation_gain: window
            .iter()
            .map(|r| r.body.origin[2] - z0)
            .fold(0.0, f64::max),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    /// Period used to express convergence in cycles.
    pub period: f64,
    /// Phase-error tolerance, rad.
    pub tolerance: f64,
    /// Target even/odd difference, rad.
    pub target: f64,
}

impl AnalysisOptions {
    pub fn with_period(period: f64) -> Self {
        Self {
            period,
            tolerance: 0.3,
            target: PI,
        }
    }
}

/// Phase-synchronization results of one trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyncReport {
    pub convergence: ConvergenceReport,
    pub final_difference: f64,
    pub final_error: f64,
    /// Fraction of phase steps running backward (see [`PhaseSeries`]).
    pub phase_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub n_segments: usize,
    pub duration: f64,
    pub options: AnalysisOptions,
    /// Absent for single-segment robots.
    pub sync: Option<SyncReport>,
    /// Over the post-convergence window (the whole trial when the phase
    /// never converges); absent when floating.
    pub posture: Option<PostureReport>,
    /// Over the whole trial; absent when floating.
    pub net_forward_displacement: Option<f64>,
}

/// Phase difference and error series of a trial, aligned with `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseTrace {
    pub t: Vec<f64>,
    pub delta: Vec<f64>,
    pub error: Vec<f64>,
}

pub fn phase_trace(traj: &Trajectory, target: f64) -> Result<PhaseTrace> {
    let phases = segment_phases(traj)?;
    let delta = even_odd_phase_difference(&phases.theta)?;
    let error = phase_error(&delta, target);
    Ok(PhaseTrace {
        t: phases.t,
        delta,
        error,
    })
}

pub fn analyze_trial(traj: &Trajectory, options: &AnalysisOptions) -> Result<TrialReport> {
    let sync = if traj.n_segments() >= 2 {
        let phases = segment_phases(traj)?;
        let delta = even_odd_phase_difference(&phases.theta)?;
        let error = phase_error(&delta, options.target);
        let convergence = convergence_report(&phases.t, &error, options.period, options.tolerance)?;
        Some(SyncReport {
            convergence,
            final_difference: delta.last().copied().unwrap_or(0.0),
            final_error: error.last().copied().unwrap_or(0.0),
            phase_residual: phases.residual,
        })
    } else {
        None
    };
    let window_start = sync
        .as_ref()
        .and_then(|s| s.convergence.periods_to_converge)
        .map(|p| traj.records[1].t + p * options.period)
        .unwrap_or(0.0);
    Ok(TrialReport {
        n_segments: traj.n_segments(),
        duration: traj.duration(),
        options: *options,
        sync,
        posture: posture_report(traj, window_start),
        net_forward_displacement: posture_report(traj, 0.0).map(|p| p.forward_displacement),
    })
}
