//! Idealized servos: every joint follows a rest-to-rest trapezoidal velocity
//! profile and the commanded position is taken as the achieved position.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsm::{ControlParams, HARDWARE_LIMIT, MX64_HOLDING_TORQUE, MX64_NO_LOAD_SPEED};

/// Setpoints closer than this to the active target do not trigger a replan.
pub const REPLAN_EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotorLimits {
    pub v_max: f64,
    pub accel: f64,
    /// Logged only; never enforced.
    pub torque_hold: f64,
    pub angle_min: f64,
    pub angle_max: f64,
}

impl Default for MotorLimits {
    fn default() -> Self {
        Self {
            v_max: MX64_NO_LOAD_SPEED,
            accel: 50.0,
            torque_hold: MX64_HOLDING_TORQUE,
            angle_min: -HARDWARE_LIMIT,
            angle_max: HARDWARE_LIMIT,
        }
    }
}

impl MotorLimits {
    pub fn yaw(params: &ControlParams) -> Self {
        Self {
            v_max: params.yaw_speed_max,
            accel: params.profile_accel,
            ..Self::default()
        }
    }

    pub fn leg(params: &ControlParams) -> Self {
        Self {
            v_max: params.leg_speed_max,
            accel: params.profile_accel,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.v_max > 0.0 && self.v_max.is_finite()) {
            return Err(Error::config("v_max", "must be > 0"));
        }
        if !(self.accel > 0.0 && self.accel.is_finite()) {
            return Err(Error::config("accel", "must be > 0"));
        }
        if !(self.angle_min < self.angle_max) {
            return Err(Error::config("angle_min", "must be < angle_max"));
        }
        Ok(())
    }
}

/// Rest-to-rest move with constant acceleration, optional cruise at `v_max`,
/// and constant deceleration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotionProfile {
    pub start_pos: f64,
    pub start_time: f64,
    pub target: f64,
    pub t_acc: f64,
    pub t_cruise: f64,
    pub t_dec: f64,
    /// Signed cruise (or triangular apex) velocity.
    pub peak_vel: f64,
}

impl MotionProfile {
    pub fn at_rest(pos: f64, t: f64) -> Self {
        Self {
            start_pos: pos,
            start_time: t,
            target: pos,
            t_acc: 0.0,
            t_cruise: 0.0,
            t_dec: 0.0,
            peak_vel: 0.0,
        }
    }

    pub fn duration(&self) -> f64 {
        self.t_acc + self.t_cruise + self.t_dec
    }

    pub fn end_time(&self) -> f64 {
        self.start_time + self.duration()
    }

    /// Whether the move never reaches `v_max` (no cruise segment).
    pub fn is_triangular(&self) -> bool {
        self.t_cruise == 0.0
    }
}

/// Plans a move from rest at `current` to rest at `target`, starting at `t0`.
///
/// Returns the profile and whether the target had to be clamped into the
/// joint range.
pub fn plan_profile(
    current: f64,
    target: f64,
    limits: &MotorLimits,
    t0: f64,
) -> (MotionProfile, bool) {
    let clamped = target.clamp(limits.angle_min, limits.angle_max);
    let was_clamped = clamped != target;
    if was_clamped {
        log::debug!("servo target {target} clamped to {clamped}");
    }
    let distance = (clamped - current).abs();
    if distance == 0.0 {
        return (MotionProfile::at_rest(current, t0), was_clamped);
    }
    let sign = (clamped - current).signum();
    let a = limits.accel;
    let v = limits.v_max;
    let (t_acc, t_cruise, peak) = if distance > v * v / a {
        let t_acc = v / a;
        (t_acc, (distance - v * v / a) / v, v)
    } else {
        let t_acc = (distance / a).sqrt();
        (t_acc, 0.0, a * t_acc)
    };
    let profile = MotionProfile {
        start_pos: current,
        start_time: t0,
        target: clamped,
        t_acc,
        t_cruise,
        t_dec: t_acc,
        peak_vel: sign * peak,
    };
    (profile, was_clamped)
}

/// Position and velocity of a profile at time `t`.
///
/// Before `start_time` the profile is at rest at its start; after the end it
/// is at rest on its target.
pub fn sample_profile(profile: &MotionProfile, t: f64) -> (f64, f64) {
    let tau = t - profile.start_time;
    if tau <= 0.0 {
        return (profile.start_pos, 0.0);
    }
    if t >= profile.end_time() || tau >= profile.duration() {
        return (profile.target, 0.0);
    }
    let vp = profile.peak_vel;
    let acc = if profile.t_acc > 0.0 {
        vp / profile.t_acc
    } else {
        0.0
    };
    if tau < profile.t_acc {
        return (profile.start_pos + 0.5 * acc * tau * tau, acc * tau);
    }
    let after_acc = profile.start_pos + 0.5 * vp * profile.t_acc;
    let tau_c = tau - profile.t_acc;
    if tau_c < profile.t_cruise {
        return (after_acc + vp * tau_c, vp);
    }
    // deceleration: measured backwards from the end so the target is exact
    let remaining = profile.duration() - tau;
    (
        profile.target - 0.5 * acc * remaining * remaining,
        acc * remaining,
    )
}

/// Earliest time at which the profile reaches position `x`, or `None` when
/// `x` is not between its start and target.
pub fn time_to_reach(profile: &MotionProfile, x: f64) -> Option<f64> {
    let sign = (profile.target - profile.start_pos).signum();
    let d = (x - profile.start_pos) * sign;
    let total = (profile.target - profile.start_pos).abs();
    if d <= 0.0 {
        return (d == 0.0).then_some(profile.start_time);
    }
    if d > total {
        return None;
    }
    let vp = profile.peak_vel.abs();
    let acc = vp / profile.t_acc;
    let d_acc = 0.5 * vp * profile.t_acc;
    let tau = if d <= d_acc {
        (2.0 * d / acc).sqrt()
    } else if d <= d_acc + vp * profile.t_cruise {
        profile.t_acc + (d - d_acc) / vp
    } else {
        let remaining = total - d;
        profile.duration() - (2.0 * remaining / acc).sqrt()
    };
    Some(profile.start_time + tau)
}

/// One joint's servo: tracks the latest setpoint through a motion profile.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Servo {
    pub limits: MotorLimits,
    pub profile: MotionProfile,
}

impl Servo {
    pub fn new(limits: MotorLimits, pos: f64, t: f64) -> Self {
        Self {
            limits,
            profile: MotionProfile::at_rest(pos, t),
        }
    }

    pub fn target(&self) -> f64 {
        self.profile.target
    }

    /// Samples the active profile at `t`, replanning first when
    /// `new_setpoint` differs from the current target.
    ///
    /// A replan starts from the sampled position with zero velocity.
    pub fn step(&mut self, new_setpoint: Option<f64>, t: f64) -> (f64, f64) {
        if let Some(sp) = new_setpoint {
            let clamped = sp.clamp(self.limits.angle_min, self.limits.angle_max);
            if (clamped - self.profile.target).abs() > REPLAN_EPS {
                let (pos, _) = sample_profile(&self.profile, t);
                self.profile = plan_profile(pos, sp, &self.limits, t).0;
            }
        }
        sample_profile(&self.profile, t)
    }

    /// Shifts all profile timestamps by `dt`.
    pub fn shift_time(&mut self, dt: f64) {
        self.profile.start_time += dt;
    }
}
