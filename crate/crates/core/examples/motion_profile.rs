//! Trapezoidal and triangular servo moves at the MX-64 speed limit.

use polyped::actuation::{plan_profile, sample_profile, MotorLimits};
use polyped::fsm::ControlParams;

fn main() {
    let limits = MotorLimits::yaw(&ControlParams::default());
    for (from, to) in [(-0.6, 0.6), (0.0, 0.2)] {
        let (profile, _) = plan_profile(from, to, &limits, 0.0);
        println!(
            "{from:+.1} -> {to:+.1} rad: {:.3} s, {}",
            profile.duration(),
            if profile.is_triangular() {
                "triangular"
            } else {
                "trapezoidal"
            }
        );
        let steps = 10;
        for i in 0..=steps {
            let t = profile.duration() * i as f64 / steps as f64;
            let (pos, vel) = sample_profile(&profile, t);
            println!("  t {t:.3}  pos {pos:+.4}  vel {vel:+.3}");
        }
    }
}
