use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::batch::{analysis_options, trial_path, BODY_FILE, CONFIG_FILE, TRAJECTORY_FILE};
use super::config::ExperimentConfig;
use super::tables::{assemble_trajectory, read_body_csv, read_trajectory_csv};
use crate::analysis::phase_trace;
use crate::error::{Error, Result};

/// Subdirectory of a batch directory holding the exported tables.
pub const PLOT_DIR: &str = "plot_data";

#[derive(Serialize)]
struct PhaseRow {
    trial: usize,
    t: f64,
    cycles: f64,
    delta: f64,
    phase_error: f64,
}

#[derive(Serialize)]
struct PostureRow {
    trial: usize,
    t: f64,
    height: Option<f64>,
    pitch: f64,
    roll: f64,
}

#[derive(Serialize)]
struct FootRow {
    trial: usize,
    seg: usize,
    foot: &'static str,
    t: f64,
    x: f64,
    z: f64,
}

struct Table {
    path: PathBuf,
    writer: csv::Writer<BufWriter<File>>,
}

impl Table {
    fn create(dir: &Path, name: &str, columns: &[&str]) -> Result<Self> {
        let path = dir.join(format!("{name}.csv"));
        let mut file = BufWriter::new(File::create(&path).map_err(|e| Error::io(&path, e))?);
        writeln!(file, "# polyped {name} v1").map_err(|e| Error::io(&path, e))?;
        let mut writer = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(file);
        writer.write_record(columns)?;
        Ok(Self { writer, path })
    }

    fn finish(mut self) -> Result<PathBuf> {
        self.writer.flush().map_err(|e| Error::io(&self.path, e))?;
        Ok(self.path)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExportReport {
    pub dir: PathBuf,
    /// `phase_error.csv`, `posture.csv` and `feet.csv`, in that order.
    pub files: Vec<PathBuf>,
    pub trials: usize,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

/// Turns a batch directory into three long-format tables under
/// `batch_dir/plot_data/`:
///
/// * `phase_error.csv`: trial, t, cycles, delta, phase_error
/// * `posture.csv`: trial, t, height, pitch, roll (floating trials omitted)
/// * `feet.csv`: trial, seg, foot, t, x, z
///
/// Each file starts with a `# polyped <name> v1` line. Fails with
/// [`Error::MissingArtifacts`] naming every trial whose tables are absent.
pub fn export_plot_data(batch_dir: impl AsRef<Path>) -> Result<ExportReport> {
    let batch_dir = batch_dir.as_ref();
    let config_path = batch_dir.join(CONFIG_FILE);
    if !config_path.is_file() {
        return Err(Error::MissingArtifacts(vec![CONFIG_FILE.to_string()]));
    }
    let config: ExperimentConfig = serde_json::from_reader(open(&config_path)?)?;
    let missing: Vec<String> = (0..config.n_trials)
        .filter(|&i| {
            let dir = trial_path(batch_dir, i);
            !(dir.join(TRAJECTORY_FILE).is_file() && dir.join(BODY_FILE).is_file())
        })
        .map(super::batch::trial_dir_name)
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingArtifacts(missing));
    }

    let out = batch_dir.join(PLOT_DIR);
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let mut phase = Table::create(
        &out,
        "phase_error",
        &["trial", "t", "cycles", "delta", "phase_error"],
    )?;
    let mut posture = Table::create(&out, "posture", &["trial", "t", "height", "pitch", "roll"])?;
    let mut feet = Table::create(&out, "feet", &["trial", "seg", "foot", "t", "x", "z"])?;
    let options = analysis_options(&config);

    for trial in 0..config.n_trials {
        let dir = trial_path(batch_dir, trial);
        let rows = read_trajectory_csv(open(&dir.join(TRAJECTORY_FILE))?)?;
        let body = read_body_csv(open(&dir.join(BODY_FILE))?)?;
        let traj = assemble_trajectory(config.robot.clone(), config.sim.dt, &rows, &body)?;

        if traj.n_segments() >= 2 {
            let trace = phase_trace(&traj, options.target)?;
            let t0 = traj.records[0].t;
            for ((&t, &delta), &phase_error) in trace.t.iter().zip(&trace.delta).zip(&trace.error) {
                phase.writer.serialize(PhaseRow {
                    trial,
                    t,
                    cycles: (t - t0) / options.period,
                    delta,
                    phase_error,
                })?;
            }
        }
        if !traj.floating {
            for b in &body {
                posture.writer.serialize(PostureRow {
                    trial,
                    t: b.t,
                    height: b.height,
                    pitch: b.pitch,
                    roll: b.roll,
                })?;
            }
        }
        for r in &rows {
            for (foot, x, z) in [("L", r.foot_l_x, r.foot_l_z), ("R", r.foot_r_x, r.foot_r_z)] {
                feet.writer.serialize(FootRow {
                    trial,
                    seg: r.seg,
                    foot,
                    t: r.t,
                    x,
                    z,
                })?;
            }
        }
    }

    Ok(ExportReport {
        files: vec![phase.finish()?, posture.finish()?, feet.finish()?],
        dir: out,
        trials: config.n_trials,
    })
}
