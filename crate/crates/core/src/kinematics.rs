//! Segment-chain forward kinematics and the centroid-anchored virtual body
//! frame used to report posture of a body without a rigid torso.
//!
//! Conventions: world z is up. Each segment's spine frame has x pointing
//! toward the head and z up. The yaw joint turns the leg crossbar about the
//! spine z axis (positive counter-clockwise seen from above). Leg roll is a
//! rotation about the crossbar x axis; positive roll lifts the foot, `0` is a
//! horizontal leg and `-π/2` points straight down.

use nalgebra::{Isometry3, Matrix3, SymmetricEigen, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsm::Side;

pub type Pose = Isometry3<f64>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobotModel {
    pub n_segments: usize,
    /// Spine distance between neighbouring segment centres.
    pub segment_length: f64,
    /// Lateral distance from the yaw axis to each roll axis.
    pub hip_lateral_offset: f64,
    pub leg_length: f64,
    pub segment_mass: f64,
    /// Height of the segment underside below the segment centre.
    pub belly_clearance: f64,
}

impl Default for RobotModel {
    fn default() -> Self {
        Self {
            n_segments: 3,
            segment_length: 0.2,
            hip_lateral_offset: 0.08,
            leg_length: 0.1,
            segment_mass: 0.5,
            belly_clearance: 0.03,
        }
    }
}

impl RobotModel {
    pub fn with_segments(n_segments: usize) -> Self {
        Self {
            n_segments,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_segments < 1 {
            return Err(Error::config("n_segments", "must be ≥ 1"));
        }
        for (name, v) in [
            ("segment_length", self.segment_length),
            ("hip_lateral_offset", self.hip_lateral_offset),
            ("leg_length", self.leg_length),
            ("segment_mass", self.segment_mass),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(name, "must be > 0"));
            }
        }
        if !(self.belly_clearance >= 0.0) {
            return Err(Error::config("belly_clearance", "must be ≥ 0"));
        }
        Ok(())
    }

    pub fn total_mass(&self) -> f64 {
        self.segment_mass * self.n_segments as f64
    }

    /// Hip height above the feet when standing unloaded at `roll`.
    pub fn standing_height(&self, roll: f64) -> f64 {
        -self.leg_length * roll.sin()
    }
}

/// Actuated angles of one segment.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SegmentJoints {
    pub yaw: f64,
    pub left: f64,
    pub right: f64,
}

impl SegmentJoints {
    pub fn roll(&self, side: Side) -> f64 {
        match side {
            Side::Left => self.left,
            Side::Right => self.right,
        }
    }
}

fn lateral_sign(side: Side) -> f64 {
    match side {
        Side::Left => 1.0,
        Side::Right => -1.0,
    }
}

/// Foot tip in the segment's spine frame.
pub fn foot_offset(model: &RobotModel, side: Side, yaw: f64, roll: f64) -> Vector3<f64> {
    let s = lateral_sign(side);
    let reach = model.hip_lateral_offset + model.leg_length * roll.cos();
    let crossbar = Vector3::new(0.0, s * reach, model.leg_length * roll.sin());
    UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw) * crossbar
}

/// Hip (roll axis) point in the segment's spine frame.
pub fn hip_offset(model: &RobotModel, side: Side, yaw: f64) -> Vector3<f64> {
    let v = Vector3::new(0.0, lateral_sign(side) * model.hip_lateral_offset, 0.0);
    UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw) * v
}

/// World positions of every foot, `[left, right]` per segment.
pub fn foot_positions(
    model: &RobotModel,
    segment_poses: &[Pose],
    joints: &[SegmentJoints],
) -> Vec<[Vector3<f64>; 2]> {
    segment_poses
        .iter()
        .zip(joints)
        .map(|(pose, j)| {
            [Side::Left, Side::Right].map(|side| {
                pose * nalgebra::Point3::from(foot_offset(model, side, j.yaw, j.roll(side)))
            })
        })
        .map(|[l, r]| [l.coords, r.coords])
        .collect()
}

/// Hinge between segment `i` and `i + 1`: its world point and pitch axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hinge {
    pub point: Vector3<f64>,
    pub axis: Vector3<f64>,
}

/// Segment poses down the spine from the head pose and the backbone pitch
/// angles. Each hinge sits halfway between its two segment centres and
/// bends about the upstream segment's y axis.
pub fn chain_poses(model: &RobotModel, head: &Pose, pitches: &[f64]) -> (Vec<Pose>, Vec<Hinge>) {
    let half = 0.5 * model.segment_length;
    let mut poses = Vec::with_capacity(pitches.len() + 1);
    let mut hinges = Vec::with_capacity(pitches.len());
    poses.push(*head);
    for &pitch in pitches {
        let prev = *poses.last().unwrap();
        let point = prev * nalgebra::Point3::new(-half, 0.0, 0.0);
        let axis = prev.rotation * Vector3::y();
        let rotation = prev.rotation * UnitQuaternion::from_axis_angle(&Vector3::y_axis(), pitch);
        let centre = point.coords + rotation * Vector3::new(-half, 0.0, 0.0);
        hinges.push(Hinge {
            point: point.coords,
            axis,
        });
        poses.push(Isometry3::from_parts(Translation3::from(centre), rotation));
    }
    (poses, hinges)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BodyFrame {
    pub origin: Vector3<f64>,
    pub x: Vector3<f64>,
    pub y: Vector3<f64>,
    pub z: Vector3<f64>,
}

/// Relative eigenvalue gap below which the forward axis is ambiguous.
const EIGEN_TIE: f64 = 1e-9;

/// Builds the virtual body frame.
///
/// Origin at the centroid of `positions`; forward axis is the principal
/// direction of their scatter, signed toward `positions[0]` (the head);
/// vertical axis is the mean of `z_axes` with the forward component removed;
/// lateral completes a right-handed frame. When the two largest eigenvalues
/// tie, `previous_x` (if any) picks the forward axis within that plane.
pub fn virtual_body_frame(
    positions: &[Vector3<f64>],
    z_axes: &[Vector3<f64>],
    previous_x: Option<Vector3<f64>>,
) -> Result<BodyFrame> {
    if positions.len() < 2 {
        return Err(Error::Degenerate("body frame needs at least two segments"));
    }
    if positions.len() != z_axes.len() {
        return Err(Error::Mismatch {
            what: "segment z axes",
            expected: positions.len(),
            got: z_axes.len(),
        });
    }
    let n = positions.len() as f64;
    let origin = positions.iter().sum::<Vector3<f64>>() / n;
    let mut cov = Matrix3::zeros();
    for s in positions {
        let d = s - origin;
        cov += d * d.transpose();
    }
    if cov.trace() < 1e-24 {
        return Err(Error::Degenerate("all segment positions coincide"));
    }
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let (l1, l2) = (eig.eigenvalues[order[0]], eig.eigenvalues[order[1]]);
    let v1: Vector3<f64> = eig.eigenvectors.column(order[0]).into();
    let v2: Vector3<f64> = eig.eigenvectors.column(order[1]).into();
    let mut x = v1;
    if let Some(prev) = previous_x {
        if l1 - l2 <= EIGEN_TIE * l1 {
            let proj = v1 * prev.dot(&v1) + v2 * prev.dot(&v2);
            if proj.norm() > 1e-12 {
                x = proj.normalize();
            }
        }
    }
    let spine = positions[0] - positions[positions.len() - 1];
    if x.dot(&spine) < 0.0 {
        x = -x;
    }
    let zbar = z_axes.iter().sum::<Vector3<f64>>() / n;
    let v = zbar - x * zbar.dot(&x);
    if v.norm() < 1e-6 {
        return Err(Error::Degenerate(
            "mean segment z axis is parallel to the forward axis",
        ));
    }
    let z = v.normalize();
    let y = z.cross(&x);
    Ok(BodyFrame { origin, x, y, z })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Posture {
    /// Origin height above the terrain directly below it, if there is terrain.
    pub height: Option<f64>,
    pub world_z: f64,
    /// Elevation of the forward axis above horizontal (nose up positive).
    pub pitch: f64,
    /// Right-handed rotation about the forward axis away from level.
    pub roll: f64,
}

pub fn posture_metrics(frame: &BodyFrame, ground_below_origin: Option<f64>) -> Posture {
    let pitch = frame.x.z.clamp(-1.0, 1.0).asin();
    let roll = frame.y.z.atan2(frame.z.z);
    Posture {
        height: ground_below_origin.map(|g| frame.origin.z - g),
        world_z: frame.origin.z,
        pitch,
        roll,
    }
}
