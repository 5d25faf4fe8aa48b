//! Three segments with no ground and no gravity: the controllers cycle on
//! their own timing alone.

use polyped::analysis::{even_odd_phase_difference, segment_phases};
use polyped::fsm::ControlParams;
use polyped::kinematics::RobotModel;
use polyped::sim::{fictive_cycle_time, run_trial, InitMode, SimConfig, Simulator};
use polyped::terrain::Terrain;

fn main() -> polyped::Result<()> {
    let params = ControlParams::default();
    let sim = Simulator::new(
        RobotModel::with_segments(3),
        Terrain::Floating,
        params.clone(),
        SimConfig::default(),
    )?;
    let traj = run_trial(&sim, InitMode::Randomized, 0, 30.0)?;

    let analytic = fictive_cycle_time(&params);
    for k in 0..traj.n_segments() {
        let onsets = traj.stroke_a_onsets(k);
        let late = &onsets[onsets.len() / 2..];
        let period = (late[late.len() - 1] - late[0]) / (late.len() - 1) as f64;
        println!("segment {k}: {} cycles, period {period:.4} s", onsets.len());
    }
    println!("analytic cycle time {analytic:.4} s");

    let phases = segment_phases(&traj)?;
    let delta = even_odd_phase_difference(&phases.theta)?;
    println!(
        "final even/odd difference {:+.3} rad",
        delta[delta.len() - 1]
    );
    Ok(())
}
