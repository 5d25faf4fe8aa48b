//! Configuration files, batch experiments and their on-disk artifacts.
//!
//! A batch directory looks like
//!
//! ```text
//! out_dir/
//!   config.json
//!   summary.json
//!   trial_000/trajectory.csv
//!   trial_000/body.csv
//!   trial_000/analysis.json
//!   ...
//!   plot_data/            (after export)
//! ```

mod batch;
pub mod config;
mod export;
mod tables;

pub use batch::{
    analysis_options, experiment_grid, run_batch, run_grid, simulate_trial, summarize,
    trial_dir_name, trial_path, write_trajectory, BatchSummary, TrialOutcome, ANALYSIS_FILE,
    BODY_FILE, CONFIG_FILE, SUMMARY_FILE, TRAJECTORY_FILE,
};
pub use config::{parse_config, parse_config_str, terrain_by_name, ExperimentConfig, Overrides};
pub use export::{export_plot_data, ExportReport, PLOT_DIR};
pub use tables::{
    assemble_trajectory, read_body_csv, read_trajectory_csv, write_body_csv, write_trajectory_csv,
    BodyRow, TrajectoryRow, BODY_COLUMNS, BODY_HEADER, TRAJECTORY_COLUMNS, TRAJECTORY_HEADER,
};
