//! Body height per cycle with and without the touchdown offset. Without it
//! each tripod exchange lets the body sink until it rests on its belly.

use polyped::fsm::{apply_touchdown_offset, ControlParams};
use polyped::kinematics::RobotModel;
use polyped::sim::{fictive_cycle_time, run_trial, InitMode, SimConfig, Simulator};
use polyped::terrain::Terrain;

fn main() -> polyped::Result<()> {
    let defaults = ControlParams::default();
    println!(
        "contact at -0.3 rad commands {:.2} rad",
        apply_touchdown_offset(-0.3, &defaults)
    );

    let period = fictive_cycle_time(&defaults);
    for delta_phi in [0.0, 0.6] {
        let params = ControlParams {
            delta_phi,
            ..defaults.clone()
        };
        let sim = Simulator::new(
            RobotModel::with_segments(3),
            Terrain::Flat,
            params,
            SimConfig::default(),
        )?;
        let traj = run_trial(&sim, InitMode::Synchronized, 0, 8.0 * period)?;
        let heights: Vec<String> = (0..8)
            .map(|k| {
                let h: Vec<f64> = traj
                    .records
                    .iter()
                    .filter(|r| r.t >= k as f64 * period && r.t < (k + 1) as f64 * period)
                    .filter_map(|r| r.body.height)
                    .collect();
                format!("{:.4}", h.iter().sum::<f64>() / h.len() as f64)
            })
            .collect();
        println!("Δφ = {delta_phi}: {}", heights.join(" "));
    }
    Ok(())
}
