use serde::{Deserialize, Serialize};

use crate::fsm::{LegState, YawState};
use crate::kinematics::{RobotModel, SegmentJoints};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentRecord {
    pub joints: SegmentJoints,
    /// World foot tips, `[left, right]`.
    pub feet: [[f64; 3]; 2],
    pub yaw_state: YawState,
    pub legs: [LegState; 2],
    /// Load-bearing contact, as sensed by the leg machines.
    pub contact: [bool; 2],
    pub slip: [bool; 2],
    pub normal_force: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BodySample {
    pub origin: [f64; 3],
    /// Forward axis of the virtual body frame.
    pub forward: [f64; 3],
    /// Height of the origin above the ground; `None` without ground.
    pub height: Option<f64>,
    pub pitch: f64,
    pub roll: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub t: f64,
    pub segments: Vec<SegmentRecord>,
    pub body: BodySample,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub dt: f64,
    pub floating: bool,
    pub model: RobotModel,
    pub records: Vec<TrajectoryRecord>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn n_segments(&self) -> usize {
        self.model.n_segments
    }

    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t).collect()
    }

    pub fn duration(&self) -> f64 {
        match (self.records.first(), self.records.last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0.0,
        }
    }

    /// Times at which segment `k` enters the stroke toward `+psi_max`.
    pub fn stroke_a_onsets(&self, k: usize) -> Vec<f64> {
        use crate::fsm::{Stroke, StrokePhase};
        let entering = YawState::Stroke(Stroke::A, StrokePhase::WaitRise);
        self.records
            .windows(2)
            .filter(|w| {
                w[0].segments[k].yaw_state != entering && w[1].segments[k].yaw_state == entering
            })
            .map(|w| w[1].t)
            .collect()
    }
}
