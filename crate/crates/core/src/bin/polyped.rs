use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use polyped::io::{
    experiment_grid, export_plot_data, parse_config, run_batch, terrain_by_name, BatchSummary,
    ExperimentConfig, Overrides,
};

const LOG_ENV: &str = "POLYPED_LOG_LEVEL";

#[derive(Parser)]
#[command(version, about = "Segment-wise FSM gait experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run all trials of one configuration.
    Run(Settings),
    /// Run the 3/8-segment × five-terrain grid.
    Batch(Settings),
    /// Write long-format plot tables for a batch directory.
    Export {
        /// Batch directory (defaults to the configured output directory).
        dir: Option<PathBuf>,
        #[command(flatten)]
        settings: Settings,
    },
    /// Check a configuration and print it with defaults filled in.
    Validate(Settings),
}

#[derive(Args)]
struct Settings {
    /// JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Base seed; trial i uses seed + i.
    #[arg(long)]
    seed: Option<u64>,
    /// Simulated seconds per trial.
    #[arg(long)]
    duration: Option<f64>,
    /// Number of segments (two legs each).
    #[arg(long)]
    segments: Option<usize>,
    /// floating, flat, rough, hill or stairs.
    #[arg(long)]
    terrain: Option<String>,
    /// Number of trials.
    #[arg(long)]
    trials: Option<usize>,
    /// Shorthand for `--terrain floating`.
    #[arg(long)]
    floating: bool,
}

impl Settings {
    fn resolve(&self) -> polyped::Result<ExperimentConfig> {
        let file = match &self.config {
            Some(path) => parse_config(path)?,
            None => ExperimentConfig::default(),
        };
        Overrides {
            out_dir: self.out.clone(),
            seed: self.seed,
            duration: self.duration,
            segments: self.segments,
            terrain: self.terrain.as_deref().map(terrain_by_name).transpose()?,
            trials: self.trials,
            floating: self.floating,
        }
        .apply(file)
    }
}

fn init_logging() -> Result<(), String> {
    let level = std::env::var(LOG_ENV).unwrap_or_else(|_| "warn".to_string());
    let filter = match level.to_ascii_lowercase().as_str() {
        "error" => log::LevelFilter::Error,
        "warn" => log::LevelFilter::Warn,
        "info" => log::LevelFilter::Info,
        "debug" => log::LevelFilter::Debug,
        _ => {
            return Err(format!(
                "{LOG_ENV} must be one of error, warn, info, debug (got `{level}`)"
            ))
        }
    };
    env_logger::Builder::new().filter_level(filter).init();
    Ok(())
}

fn print_summary(s: &BatchSummary) {
    let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.3}"));
    println!(
        "{:>2} seg {:<8} trials {:>3}  converged {:>5.1}%  stays {:>5.1}%  median periods {:>6}  |pitch| {:>6}  |roll| {:>6}  speed {:>6}  failed {}",
        s.n_segments,
        s.terrain,
        s.n_trials,
        100.0 * s.convergence_rate,
        100.0 * s.stays_converged_rate,
        fmt(s.median_periods_to_converge),
        fmt(s.mean_abs_pitch),
        fmt(s.mean_abs_roll),
        fmt(s.mean_speed),
        s.failed.len()
    );
}

fn run(cli: Cli) -> polyped::Result<bool> {
    match cli.command {
        Command::Run(settings) => {
            let summary = run_batch(&settings.resolve()?)?;
            print_summary(&summary);
            Ok(summary.all_succeeded())
        }
        Command::Batch(settings) => {
            let mut ok = true;
            for config in experiment_grid(&settings.resolve()?) {
                let summary = run_batch(&config)?;
                print_summary(&summary);
                ok &= summary.all_succeeded();
            }
            Ok(ok)
        }
        Command::Export { dir, settings } => {
            let dir = match dir {
                Some(d) => d,
                None => settings.resolve()?.out_dir,
            };
            let report = export_plot_data(&dir)?;
            for f in &report.files {
                println!("{}", f.display());
            }
            Ok(true)
        }
        Command::Validate(settings) => {
            println!("{}", settings.resolve()?.to_json()?);
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_logging() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: some trials failed; see analysis.json in their directories");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
