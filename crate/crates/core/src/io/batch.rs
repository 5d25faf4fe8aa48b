use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::tables::{write_body_csv, write_trajectory_csv};
use crate::analysis::{analyze_trial, AnalysisOptions, TrialReport};
use crate::error::{Error, Result};
use crate::sim::{fictive_cycle_time, run_trial, Simulator, Trajectory};
use crate::terrain::TerrainSpec;

pub const CONFIG_FILE: &str = "config.json";
pub const SUMMARY_FILE: &str = "summary.json";
pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const BODY_FILE: &str = "body.csv";
pub const ANALYSIS_FILE: &str = "analysis.json";

/// Directory name of trial `i` inside a batch directory.
pub fn trial_dir_name(i: usize) -> String {
    format!("trial_{i:03}")
}

/// Contents of a trial's `analysis.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub index: usize,
    pub seed: u64,
    pub report: Option<TrialReport>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub n_segments: usize,
    pub terrain: String,
    pub n_trials: usize,
    /// Indices of trials that raised an error.
    pub failed: Vec<usize>,
    /// Fractions of all trials.
    pub convergence_rate: f64,
    pub stays_converged_rate: f64,
    pub median_periods_to_converge: Option<f64>,
    pub mean_abs_pitch: Option<f64>,
    pub mean_abs_roll: Option<f64>,
    pub mean_height: Option<f64>,
    pub mean_speed: Option<f64>,
    /// Trials with positive net forward displacement.
    pub forward_trials: usize,
    pub outcomes: Vec<TrialOutcome>,
}

impl BatchSummary {
    pub fn all_succeeded(&self) -> bool {
        self.failed.is_empty()
    }
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn create_file(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// Writes `trajectory.csv` and `body.csv` into `dir`.
pub fn write_trajectory(dir: &Path, traj: &Trajectory) -> Result<()> {
    create_dir(dir)?;
    write_trajectory_csv(traj, create_file(&dir.join(TRAJECTORY_FILE))?)?;
    write_body_csv(traj, create_file(&dir.join(BODY_FILE))?)
}

/// Analysis settings used for every trial of `config`.
pub fn analysis_options(config: &ExperimentConfig) -> AnalysisOptions {
    AnalysisOptions::with_period(fictive_cycle_time(&config.control))
}

/// Simulates and analyzes trial `i` without touching the disk.
pub fn simulate_trial(config: &ExperimentConfig, i: usize) -> Result<(Trajectory, TrialReport)> {
    let sim = Simulator::new(
        config.robot.clone(),
        config.terrain.build()?,
        config.control.clone(),
        config.sim.clone(),
    )?;
    let traj = run_trial(&sim, config.init, config.trial_seed(i), config.duration)?;
    let report = analyze_trial(&traj, &analysis_options(config))?;
    Ok((traj, report))
}

fn run_one(config: &ExperimentConfig, i: usize) -> TrialOutcome {
    let dir = config.out_dir.join(trial_dir_name(i));
    let seed = config.trial_seed(i);
    let result = simulate_trial(config, i).and_then(|(traj, report)| {
        write_trajectory(&dir, &traj)?;
        Ok(report)
    });
    let outcome = match result {
        Ok(report) => TrialOutcome {
            index: i,
            seed,
            report: Some(report),
            error: None,
        },
        Err(e) => {
            log::error!("trial {i} (seed {seed}) failed: {e}");
            TrialOutcome {
                index: i,
                seed,
                report: None,
                error: Some(e.to_string()),
            }
        }
    };
    if let Err(e) = create_dir(&dir).and_then(|_| write_json(&dir.join(ANALYSIS_FILE), &outcome)) {
        log::error!("trial {i}: {e}");
    }
    log::debug!("trial {i} done");
    outcome
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    })
}

fn mean(v: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

/// Aggregates trial outcomes.
pub fn summarize(config: &ExperimentConfig, outcomes: Vec<TrialOutcome>) -> BatchSummary {
    let reports: Vec<&TrialReport> = outcomes.iter().filter_map(|o| o.report.as_ref()).collect();
    let n = outcomes.len().max(1) as f64;
    let conv: Vec<_> = reports
        .iter()
        .filter_map(|r| r.sync.as_ref())
        .map(|s| s.convergence)
        .collect();
    let postures: Vec<_> = reports.iter().filter_map(|r| r.posture.as_ref()).collect();
    BatchSummary {
        n_segments: config.robot.n_segments,
        terrain: config.terrain.name().to_string(),
        n_trials: outcomes.len(),
        failed: outcomes
            .iter()
            .filter(|o| o.error.is_some())
            .map(|o| o.index)
            .collect(),
        convergence_rate: conv.iter().filter(|c| c.converged).count() as f64 / n,
        stays_converged_rate: conv.iter().filter(|c| c.stays_converged).count() as f64 / n,
        median_periods_to_converge: median(
            conv.iter().filter_map(|c| c.periods_to_converge).collect(),
        ),
        mean_abs_pitch: mean(postures.iter().map(|p| p.pitch.abs_mean)),
        mean_abs_roll: mean(postures.iter().map(|p| p.roll.abs_mean)),
        mean_height: mean(postures.iter().map(|p| p.height.mean)),
        mean_speed: mean(postures.iter().map(|p| p.mean_speed)),
        forward_trials: reports
            .iter()
            .filter(|r| r.net_forward_displacement.is_some_and(|d| d > 0.0))
            .count(),
        outcomes,
    }
}

/// Runs every trial of `config` in parallel, writing per-trial artifacts
/// under `out_dir/trial_NNN/` and then `config.json` and `summary.json` in
/// `out_dir`. Trial failures are recorded in the summary; only setup and
/// aggregate-writing errors are returned.
pub fn run_batch(config: &ExperimentConfig) -> Result<BatchSummary> {
    config.validate()?;
    create_dir(&config.out_dir)?;
    log::info!(
        "batch: {} trials, {} segments, {} terrain -> {}",
        config.n_trials,
        config.robot.n_segments,
        config.terrain.name(),
        config.out_dir.display()
    );
    let outcomes: Vec<TrialOutcome> = (0..config.n_trials)
        .into_par_iter()
        .map(|i| run_one(config, i))
        .collect();
    let summary = summarize(config, outcomes);
    write_json(&config.out_dir.join(CONFIG_FILE), config)?;
    write_json(&config.out_dir.join(SUMMARY_FILE), &summary)?;
    log::info!(
        "batch done: converged {:.0}%, {} failed",
        100.0 * summary.convergence_rate,
        summary.failed.len()
    );
    Ok(summary)
}

/// The experiment grid: 3- and 8-segment robots on floating, flat, rough,
/// hill and stairs terrain. Each cell writes to `base.out_dir/<n>seg_<terrain>`.
pub fn experiment_grid(base: &ExperimentConfig) -> Vec<ExperimentConfig> {
    let terrains = [
        TerrainSpec::Floating,
        TerrainSpec::Flat,
        TerrainSpec::rough(base.base_seed),
        TerrainSpec::hill(),
        TerrainSpec::stairs(),
    ];
    [3, 8]
        .into_iter()
        .flat_map(|n| {
            terrains.iter().map(move |t| {
                let mut c = base.clone();
                c.robot.n_segments = n;
                c.terrain = t.clone();
                c.out_dir = base.out_dir.join(format!("{n}seg_{}", t.name()));
                c
            })
        })
        .collect()
}

/// Runs batches one after another; each batch is parallel inside.
pub fn run_grid(configs: &[ExperimentConfig]) -> Result<Vec<BatchSummary>> {
    configs.iter().map(run_batch).collect()
}

/// Directory of trial `i` inside the batch directory `out_dir`.
pub fn trial_path(out_dir: &Path, i: usize) -> PathBuf {
    out_dir.join(trial_dir_name(i))
}
