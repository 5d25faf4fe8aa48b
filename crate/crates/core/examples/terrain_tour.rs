//! One short trial on each ground type with posture statistics.

use polyped::analysis::{analyze_trial, AnalysisOptions};
use polyped::fsm::ControlParams;
use polyped::kinematics::RobotModel;
use polyped::sim::{fictive_cycle_time, run_trial, InitMode, SimConfig, Simulator};
use polyped::terrain::TerrainSpec;

fn main() -> polyped::Result<()> {
    let params = ControlParams::default();
    let options = AnalysisOptions::with_period(fictive_cycle_time(&params));
    let specs = [
        TerrainSpec::Floating,
        TerrainSpec::Flat,
        TerrainSpec::rough(1),
        TerrainSpec::hill(),
        TerrainSpec::stairs(),
    ];
    for spec in specs {
        let sim = Simulator::new(
            RobotModel::with_segments(3),
            spec.build()?,
            params.clone(),
            SimConfig::default(),
        )?;
        let traj = run_trial(&sim, InitMode::Randomized, 2, 10.0)?;
        let report = analyze_trial(&traj, &options)?;
        let err = report.sync.map_or(f64::NAN, |s| s.final_error);
        match report.posture {
            Some(p) => println!(
                "{:<8} phase error {err:.3}  height {:.3} m  |pitch| {:.3}  |roll| {:.3}  forward {:.3} m",
                spec.name(),
                p.height.mean,
                p.pitch.abs_mean,
                p.roll.abs_mean,
                report.net_forward_displacement.unwrap_or(0.0)
            ),
            None => println!("{:<8} phase error {err:.3}  (no posture without ground)", spec.name()),
        }
    }
    Ok(())
}
