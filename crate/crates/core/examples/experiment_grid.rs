//! A small batch on disk: trials, summary, and plot tables.
//!
//! Writes under the directory given as the first argument, or a fresh
//! temporary directory.

use polyped::io::{experiment_grid, export_plot_data, run_batch, ExperimentConfig};

fn main() -> polyped::Result<()> {
    let out = match std::env::args().nth(1) {
        Some(dir) => dir.into(),
        None => std::env::temp_dir().join(format!("polyped_grid_{}", std::process::id())),
    };
    let base = ExperimentConfig {
        n_trials: 2,
        duration: 6.0,
        out_dir: out.clone(),
        ..ExperimentConfig::default()
    };

    let grid = experiment_grid(&base);
    println!("full grid has {} cells; running the first two", grid.len());
    for config in grid.iter().take(2) {
        let summary = run_batch(config)?;
        let speed = summary
            .mean_speed
            .map_or("-".to_string(), |v| format!("{v:.3} m/s"));
        println!(
            "{} segments on {}: {}/{} converged, mean speed {speed}",
            summary.n_segments,
            summary.terrain,
            (summary.convergence_rate * summary.n_trials as f64).round(),
            summary.n_trials,
        );
        let report = export_plot_data(&config.out_dir)?;
        for f in &report.files {
            println!("  {}", f.display());
        }
    }
    println!("output in {}", out.display());
    Ok(())
}
