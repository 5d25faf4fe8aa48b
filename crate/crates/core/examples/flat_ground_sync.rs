//! Randomized start on flat ground, then the even/odd phase error each
//! cycle until the gait settles into alternating tripods.
//!
//! `cargo run --example flat_ground_sync -- 8 5` runs eight segments from
//! seed 5.

use polyped::analysis::{analyze_trial, phase_trace, AnalysisOptions};
use polyped::fsm::ControlParams;
use polyped::kinematics::RobotModel;
use polyped::sim::{fictive_cycle_time, run_trial, InitMode, SimConfig, Simulator};
use polyped::terrain::Terrain;

fn main() -> polyped::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let n = args.get(1).and_then(|a| a.parse().ok()).unwrap_or(3);
    let seed = args.get(2).and_then(|a| a.parse().ok()).unwrap_or(0);
    let params = ControlParams::default();
    let period = fictive_cycle_time(&params);
    let sim = Simulator::new(
        RobotModel::with_segments(n),
        Terrain::Flat,
        params,
        SimConfig::default(),
    )?;
    let traj = run_trial(&sim, InitMode::Randomized, seed, 20.0)?;

    let trace = phase_trace(&traj, std::f64::consts::PI)?;
    let mut next = 0.0;
    for (t, e) in trace.t.iter().zip(&trace.error) {
        if *t >= next {
            println!("t {t:6.2} s  phase error {e:.3} rad");
            next += period;
        }
    }

    let report = analyze_trial(&traj, &AnalysisOptions::with_period(period))?;
    if let Some(sync) = report.sync {
        match sync.convergence.periods_to_converge {
            Some(p) => println!("converged after {p:.2} periods"),
            None => println!("did not converge"),
        }
    }
    if let Some(d) = report.net_forward_displacement {
        println!("walked {d:.3} m");
    }
    Ok(())
}
