//! Static equilibrium of the passive coordinates by damped Gauss-Newton.
//!
//! Passive coordinates are the head pose (6 DOF) and one pitch hinge per
//! backbone joint. Rotation increments are applied on the left,
//! `R <- exp(δω) R`, about the head centre.

use nalgebra::{DMatrix, DVector, RowDVector, UnitQuaternion, Vector2, Vector3};

use crate::error::{Error, Result};
use crate::fsm::Side;
use crate::kinematics::{chain_poses, foot_offset, Hinge, Pose, RobotModel, SegmentJoints};

#[derive(Clone, Debug, PartialEq)]
pub struct Passive {
    pub head: Pose,
    pub pitches: Vec<f64>,
}

impl Passive {
    pub fn dim(&self) -> usize {
        6 + self.pitches.len()
    }

    pub(crate) fn retract(&self, delta: &DVector<f64>) -> Passive {
        let dp = Vector3::new(delta[0], delta[1], delta[2]);
        let dw = Vector3::new(delta[3], delta[4], delta[5]);
        let mut head = self.head;
        head.translation.vector += dp;
        head.rotation = UnitQuaternion::from_scaled_axis(dw) * head.rotation;
        let pitches = self
            .pitches
            .iter()
            .enumerate()
            .map(|(j, p)| p + delta[6 + j])
            .collect();
        Passive { head, pitches }
    }
}

/// A point of the robot that can touch the ground.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum Site {
    Foot(usize, Side),
    /// Corner of a segment's body box, in segment coordinates.
    Body(usize, Vector3<f64>),
}

impl Site {
    pub fn segment(self) -> usize {
        match self {
            Site::Foot(i, _) | Site::Body(i, _) => i,
        }
    }
}

/// Contact springs of one site for the current solve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct ContactSpring {
    pub site: Site,
    /// Ground height frozen for this tick.
    pub ground: Option<f64>,
    /// Tangential spring attachment, when the site sticks.
    pub anchor: Option<Vector2<f64>>,
    pub k_normal: f64,
}

pub(crate) struct Problem<'a> {
    pub model: &'a RobotModel,
    pub joints: &'a [SegmentJoints],
    pub gravity: f64,
    pub k_tangential: f64,
    pub k_pitch: f64,
    pub contacts: Vec<ContactSpring>,
}

pub(crate) struct Eval {
    pub energy: f64,
    pub grad: DVector<f64>,
    pub hess: DMatrix<f64>,
    /// World position of every contact site.
    pub points: Vec<Vector3<f64>>,
}

fn point_jacobian(
    p: &Vector3<f64>,
    seg: usize,
    origin: &Vector3<f64>,
    hinges: &[Hinge],
    dim: usize,
) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(3, dim);
    j[(0, 0)] = 1.0;
    j[(1, 1)] = 1.0;
    j[(2, 2)] = 1.0;
    let r = p - origin;
    // δω × r
    j[(0, 4)] = r.z;
    j[(0, 5)] = -r.y;
    j[(1, 3)] = -r.z;
    j[(1, 5)] = r.x;
    j[(2, 3)] = r.y;
    j[(2, 4)] = -r.x;
    for (k, h) in hinges.iter().enumerate().take(seg) {
        let c = h.axis.cross(&(p - h.point));
        j[(0, 6 + k)] = c.x;
        j[(1, 6 + k)] = c.y;
        j[(2, 6 + k)] = c.z;
    }
    j
}

/// Adds `force * row` to the gradient and `k * rowᵀ row` to the Hessian.
fn add_row(
    grad: &mut DVector<f64>,
    hess: &mut DMatrix<f64>,
    row: RowDVector<f64>,
    force: f64,
    k: f64,
) {
    let col = row.transpose();
    grad.axpy(force, &col, 1.0);
    if k > 0.0 {
        hess.ger(k, &col, &col, 1.0);
    }
}

impl Problem<'_> {
    pub fn site_world(&self, poses: &[Pose], site: Site) -> Vector3<f64> {
        let (pose, local) = match site {
            Site::Foot(i, side) => {
                let j = &self.joints[i];
                (
                    &poses[i],
                    foot_offset(self.model, side, j.yaw, j.roll(side)),
                )
            }
            Site::Body(i, corner) => (&poses[i], corner),
        };
        pose.translation.vector + pose.rotation * local
    }

    pub fn evaluate(&self, q: &Passive) -> Eval {
        let dim = q.dim();
        let (poses, hinges) = chain_poses(self.model, &q.head, &q.pitches);
        let origin = q.head.translation.vector;
        let mut energy = 0.0;
        let mut grad = DVector::zeros(dim);
        let mut hess = DMatrix::zeros(dim, dim);
        if self.gravity > 0.0 {
            let m = self.model.segment_mass;
            for (i, pose) in poses.iter().enumerate() {
                let c = pose.translation.vector;
                energy += m * self.gravity * c.z;
                let jc = point_jacobian(&c, i, &origin, &hinges, dim);
                add_row(
                    &mut grad,
                    &mut hess,
                    jc.row(2).into_owned(),
                    m * self.gravity,
                    0.0,
                );
            }
        }

        let mut points = Vec::with_capacity(self.contacts.len());
        for spring in &self.contacts {
            let p = self.site_world(&poses, spring.site);
            points.push(p);
            let Some(ground) = spring.ground else {
                continue;
            };
            let depth = ground - p.z;
            if depth <= 0.0 && spring.anchor.is_none() {
                continue;
            }
            let jp = point_jacobian(&p, spring.site.segment(), &origin, &hinges, dim);
            if depth > 0.0 {
                let k_n = spring.k_normal;
                energy += 0.5 * k_n * depth * depth;
                add_row(
                    &mut grad,
                    &mut hess,
                    jp.row(2).into_owned(),
                    -k_n * depth,
                    k_n,
                );
            }
            if let Some(anchor) = spring.anchor {
                let d = p.xy() - anchor;
                let jxy = jp.rows(0, 2).into_owned();
                energy += 0.5 * self.k_tangential * d.norm_squared();
                grad += jxy.transpose() * (self.k_tangential * d);
                hess += self.k_tangential * jxy.transpose() * &jxy;
            }
        }

        for (j, theta) in q.pitches.iter().enumerate() {
            energy += 0.5 * self.k_pitch * theta * theta;
            grad[6 + j] += self.k_pitch * theta;
            hess[(6 + j, 6 + j)] += self.k_pitch;
        }

        Eval {
            energy,
            grad,
            hess,
            points,
        }
    }

    /// Minimizes the energy from `start` until the largest gradient component
    /// is at most `tol`.
    pub fn minimize(
        &self,
        start: &Passive,
        tol: f64,
        max_iters: usize,
    ) -> Result<(Passive, Eval, usize)> {
        let mut q = start.clone();
        let mut cur = self.evaluate(&q);
        let mut lambda = 1e-4;
        for iter in 0..max_iters {
            let gnorm = cur.grad.amax();
            if gnorm <= tol {
                return Ok((q, cur, iter));
            }
            let dim = q.dim();
            let scale = (0..dim).map(|i| cur.hess[(i, i)]).fold(1e-9, f64::max);
            let mut accepted = false;
            while lambda < 1e14 {
                let mut a = cur.hess.clone();
                for i in 0..dim {
                    a[(i, i)] += lambda * cur.hess[(i, i)].max(1e-6 * scale);
                }
                let Some(chol) = a.cholesky() else {
                    lambda *= 10.0;
                    continue;
                };
                let step = chol.solve(&(-&cur.grad));
                let trial_q = q.retract(&step);
                let trial = self.evaluate(&trial_q);
                let slack = 1e-14 * (1.0 + cur.energy.abs());
                let better = trial.energy < cur.energy
                    || (trial.energy <= cur.energy + slack && trial.grad.amax() < gnorm);
                if better {
                    q = trial_q;
                    cur = trial;
                    lambda = (lambda / 4.0).max(1e-12);
                    accepted = true;
                    break;
                }
                lambda *= 4.0;
            }
            if !accepted {
                return Err(Error::SolverFailure {
                    iterations: iter,
                    residual: gnorm,
                });
            }
        }
        let residual = cur.grad.amax();
        if residual <= tol {
            Ok((q, cur, max_iters))
        } else {
            Err(Error::SolverFailure {
                iterations: max_iters,
                residual,
            })
        }
    }
}
