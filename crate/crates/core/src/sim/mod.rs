//! Time-stepped quasi-static simulation.
//!
//! Joints follow their servo profiles exactly. Each tick the passive
//! coordinates (head pose and backbone pitch hinges) settle into the static
//! equilibrium of gravity, backbone springs and compliant foot contacts, with
//! Coulomb slip resolved by dragging tangential anchors.

mod solver;
mod trajectory;

use nalgebra::{Isometry3, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use solver::Passive;
pub use trajectory::{BodySample, SegmentRecord, Trajectory, TrajectoryRecord};

use crate::actuation::{plan_profile, time_to_reach, MotorLimits, Servo};
use crate::error::{Error, Result};
use crate::fsm::{
    step_controller, ControlParams, SegmentController, SensorSnapshot, Side, Stroke, Upstream,
    YawState,
};
use crate::kinematics::{
    chain_poses, posture_metrics, virtual_body_frame, BodyFrame, Pose, RobotModel, SegmentJoints,
};
use crate::terrain::Terrain;
use solver::{ContactSpring, Problem, Site};

/// Standard gravity.
pub const GRAVITY: f64 = 9.81;
/// Initial head x; the tail trails toward -x.
pub const START_X: f64 = -0.1;
/// Contact penetration bound at equilibrium.
pub const MAX_PENETRATION: f64 = 0.002;

const BODY_CORNERS: usize = 8;

/// Corners of a segment's body box in segment coordinates: one segment
/// long, as wide as the hips, reaching `belly_clearance` above and below the
/// centre.
pub fn body_corners(model: &RobotModel) -> [Vector3<f64>; BODY_CORNERS] {
    let (hx, hy, hz) = (
        0.5 * model.segment_length,
        model.hip_lateral_offset,
        model.belly_clearance,
    );
    let mut out = [Vector3::zeros(); BODY_CORNERS];
    for (k, c) in out.iter_mut().enumerate() {
        let sign = |bit: usize| if k & bit == 0 { -1.0 } else { 1.0 };
        *c = Vector3::new(sign(1) * hx, sign(2) * hy, sign(4) * hz);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub dt: f64,
    /// Ignored (taken as 0) on floating terrain.
    pub gravity: f64,
    pub friction_mu: f64,
    /// Effective vertical foot stiffness; calibrated from the model when
    /// absent.
    pub foot_spring_k: Option<f64>,
    pub foot_tangential_k: f64,
    /// Stiffness of the ground itself, in series with the leg spring, and of
    /// body contacts.
    pub contact_stiffness: f64,
    pub backbone_pitch_stiffness: f64,
    /// Largest admissible energy-gradient component at equilibrium.
    pub solver_tol: f64,
    pub max_iters: usize,
    /// Solve-and-slip rounds per tick before the friction state is accepted
    /// as is.
    pub coulomb_iters: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.005,
            gravity: GRAVITY,
            friction_mu: 0.6,
            foot_spring_k: None,
            foot_tangential_k: 2000.0,
            contact_stiffness: 2.0e4,
            backbone_pitch_stiffness: 20.0,
            solver_tol: 1e-5,
            max_iters: 500,
            coulomb_iters: 20,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::config("sim.dt", "must be > 0"));
        }
        if !(self.gravity >= 0.0 && self.gravity.is_finite()) {
            return Err(Error::config("sim.gravity", "must be ≥ 0"));
        }
        if !(self.friction_mu >= 0.0 && self.friction_mu.is_finite()) {
            return Err(Error::config("sim.friction_mu", "must be ≥ 0"));
        }
        for (name, v) in [
            ("sim.foot_tangential_k", self.foot_tangential_k),
            ("sim.contact_stiffness", self.contact_stiffness),
            (
                "sim.backbone_pitch_stiffness",
                self.backbone_pitch_stiffness,
            ),
            ("sim.solver_tol", self.solver_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(name, "must be > 0"));
            }
        }
        if let Some(k) = self.foot_spring_k {
            if !(k > 0.0 && k.is_finite()) {
                return Err(Error::config("sim.foot_spring_k", "must be > 0"));
            }
            if k >= self.contact_stiffness {
                return Err(Error::config(
                    "sim.foot_spring_k",
                    "must be < contact_stiffness",
                ));
            }
        }
        if self.max_iters == 0 || self.coulomb_iters == 0 {
            return Err(Error::config("sim.max_iters", "must be ≥ 1"));
        }
        Ok(())
    }
}

/// Vertical foot stiffness that makes a three-legged stance at 45° roll sink
/// by a tenth of its unloaded height: `k = (M g / 3) / (0.1 h₀)`.
pub fn calibrate_leg_stiffness(model: &RobotModel, gravity: f64) -> Result<f64> {
    let mass = model.total_mass();
    if !(mass > 0.0) {
        return Err(Error::config(
            "robot.segment_mass",
            "calibration needs a positive mass",
        ));
    }
    if !(gravity > 0.0) {
        return Err(Error::config(
            "sim.gravity",
            "calibration needs gravity > 0",
        ));
    }
    let h0 = model.standing_height(-std::f64::consts::FRAC_PI_4);
    Ok(mass * gravity / 3.0 / (0.1 * h0))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ContactState {
    pub in_contact: bool,
    /// Tangential attachment point; present only while in contact.
    pub anchor: Option<[f64; 2]>,
    pub normal_force: f64,
    pub slipped_this_step: bool,
    /// Normal force above 1% of the per-leg weight share.
    pub load_bearing: bool,
}

/// Servos of one segment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentServos {
    pub yaw: Servo,
    pub left: Servo,
    pub right: Servo,
}

impl SegmentServos {
    pub fn new(params: &ControlParams, yaw: f64, roll: f64, t: f64) -> Self {
        Self {
            yaw: Servo::new(MotorLimits::yaw(params), yaw, t),
            left: Servo::new(MotorLimits::leg(params), roll, t),
            right: Servo::new(MotorLimits::leg(params), roll, t),
        }
    }

    fn sample(&mut self, t: f64) -> SegmentJoints {
        SegmentJoints {
            yaw: self.yaw.step(None, t).0,
            left: self.left.step(None, t).0,
            right: self.right.step(None, t).0,
        }
    }

    fn command(&mut self, yaw: f64, left: f64, right: f64, t: f64) {
        self.yaw.step(Some(yaw), t);
        self.left.step(Some(left), t);
        self.right.step(Some(right), t);
    }

    fn shift_time(&mut self, dt: f64) {
        self.yaw.shift_time(dt);
        self.left.shift_time(dt);
        self.right.shift_time(dt);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimState {
    pub tick: u64,
    pub t: f64,
    pub passive: Passive,
    pub joints: Vec<SegmentJoints>,
    pub servos: Vec<SegmentServos>,
    pub contacts: Vec<[ContactState; 2]>,
    /// Friction anchors of the body-box corners, eight per segment.
    pub body_anchors: Vec<Option<[f64; 2]>>,
    pub controllers: Vec<SegmentController>,
    /// Forward axis of the previous body frame, for eigenvector ties.
    pub last_forward: Option<[f64; 3]>,
}

/// Per-foot output of [`detect_contacts`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FootContact {
    pub in_contact: bool,
    pub load_bearing: bool,
}

/// Diagnostics of one quasi-static solve.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    pub coulomb_rounds: usize,
    pub residual: f64,
    pub energy: f64,
}

/// Everything about a trial that stays fixed while it runs.
#[derive(Clone, Debug)]
pub struct Simulator {
    pub model: RobotModel,
    pub terrain: Terrain,
    pub params: ControlParams,
    pub config: SimConfig,
    gravity: f64,
    k_foot: f64,
}

impl Simulator {
    pub fn new(
        model: RobotModel,
        terrain: Terrain,
        params: ControlParams,
        config: SimConfig,
    ) -> Result<Self> {
        model.validate()?;
        params.validate()?;
        config.validate()?;
        let gravity = if terrain.is_floating() {
            0.0
        } else {
            config.gravity
        };
        let k_foot = match config.foot_spring_k {
            Some(k) => k,
            None if gravity > 0.0 => calibrate_leg_stiffness(&model, gravity)?,
            None => calibrate_leg_stiffness(&model, GRAVITY)?,
        };
        if k_foot >= config.contact_stiffness {
            return Err(Error::config(
                "sim.contact_stiffness",
                format!("must exceed the foot stiffness {k_foot:.1} N/m"),
            ));
        }
        Ok(Self {
            model,
            terrain,
            params,
            config,
            gravity,
            k_foot,
        })
    }

    pub fn gravity(&self) -> f64 {
        self.gravity
    }

    /// Effective vertical stiffness of one foot (leg and ground in series).
    pub fn foot_stiffness(&self) -> f64 {
        self.k_foot
    }

    /// Stiffness of the leg alone, so that in series with the ground it gives
    /// [`Simulator::foot_stiffness`].
    pub fn leg_stiffness(&self) -> f64 {
        1.0 / (1.0 / self.k_foot - 1.0 / self.config.contact_stiffness)
    }

    /// Ground penetration carried by a contact at normal force `n`.
    pub fn penetration(&self, n: f64) -> f64 {
        n / self.config.contact_stiffness
    }

    /// Normal force above which a foot counts as load-bearing.
    pub fn load_threshold(&self) -> f64 {
        0.01 * self.model.total_mass() * self.gravity / (2.0 * self.model.n_segments as f64)
    }

    fn problem<'a>(&'a self, joints: &'a [SegmentJoints]) -> Problem<'a> {
        Problem {
            model: &self.model,
            joints,
            gravity: self.gravity,
            k_tangential: self.config.foot_tangential_k,
            k_pitch: self.config.backbone_pitch_stiffness,
            contacts: Vec::new(),
        }
    }

    /// Contact sites: every foot (`2 * segment + side`, left first), then the
    /// body corners of each segment.
    fn sites(&self) -> Vec<(Site, f64)> {
        let n = self.model.n_segments;
        let mut out = Vec::with_capacity((2 + BODY_CORNERS) * n);
        for i in 0..n {
            out.push((Site::Foot(i, Side::Left), self.k_foot));
            out.push((Site::Foot(i, Side::Right), self.k_foot));
        }
        let corners = body_corners(&self.model);
        for i in 0..n {
            out.extend(
                corners
                    .iter()
                    .map(|&c| (Site::Body(i, c), self.config.contact_stiffness)),
            );
        }
        out
    }

    /// Segment poses for the state's passive coordinates.
    pub fn segment_poses(&self, state: &SimState) -> Vec<Pose> {
        chain_poses(&self.model, &state.passive.head, &state.passive.pitches).0
    }

    pub fn foot_positions(&self, state: &SimState) -> Vec<[Vector3<f64>; 2]> {
        crate::kinematics::foot_positions(&self.model, &self.segment_poses(state), &state.joints)
    }
}

/// Resolves the passive coordinates for the current actuated angles and
/// updates every contact.
pub fn solve_quasistatic(sim: &Simulator, state: &mut SimState) -> Result<SolveReport> {
    if sim.terrain.is_floating() {
        for c in state.contacts.iter_mut().flatten() {
            *c = ContactState::default();
        }
        state.body_anchors.fill(None);
        return Ok(SolveReport::default());
    }
    let mut problem = sim.problem(&state.joints);
    let poses = sim.segment_poses(state);
    let n_feet = 2 * sim.model.n_segments;
    problem.contacts = sim
        .sites()
        .into_iter()
        .enumerate()
        .map(|(idx, (site, k_normal))| {
            let p = problem.site_world(&poses, site);
            let ground = sim.terrain.height_at(p.x, p.y);
            let previous = if idx < n_feet {
                state.contacts[idx / 2][idx % 2].anchor
            } else {
                state.body_anchors[idx - n_feet]
            };
            let anchor = match (previous, ground) {
                (Some(a), _) => Some(Vector2::new(a[0], a[1])),
                (None, Some(g)) if p.z <= g => Some(p.xy()),
                _ => None,
            };
            ContactSpring {
                site,
                ground,
                anchor,
                k_normal,
            }
        })
        .collect();

    let mut slipped = vec![false; problem.contacts.len()];
    let mut q = state.passive.clone();
    let mut report = SolveReport::default();
    // anchors already outside the friction cone slip before the first solve
    let mut points = problem.evaluate(&q).points;
    return_map(sim, &mut problem.contacts, &points, &mut slipped);
    loop {
        let (next, eval, iters) =
            problem.minimize(&q, sim.config.solver_tol, sim.config.max_iters)?;
        q = next;
        report.iterations += iters;
        report.coulomb_rounds += 1;
        report.residual = eval.grad.amax();
        report.energy = eval.energy;
        points = eval.points;
        if !return_map(sim, &mut problem.contacts, &points, &mut slipped) {
            break;
        }
        if report.coulomb_rounds >= sim.config.coulomb_iters {
            log::debug!(
                "t={:.3}: friction not settled after {} rounds",
                state.t,
                report.coulomb_rounds
            );
            break;
        }
    }

    let threshold = sim.load_threshold();
    for (idx, spring) in problem.contacts.iter().enumerate().skip(n_feet) {
        state.body_anchors[idx - n_feet] = spring.anchor.map(|a| [a.x, a.y]);
    }
    for (f, (spring, p)) in problem
        .contacts
        .iter()
        .zip(&points)
        .take(n_feet)
        .enumerate()
    {
        let c = &mut state.contacts[f / 2][f % 2];
        let Some(ground) = spring.ground else {
            *c = ContactState::default();
            continue;
        };
        let (flags, n) = classify_contact(p.z, ground, sim.k_foot, threshold);
        if !flags.in_contact {
            *c = ContactState::default();
            continue;
        }
        let anchor = spring.anchor.unwrap_or(p.xy());
        *c = ContactState {
            in_contact: true,
            anchor: Some([anchor.x, anchor.y]),
            normal_force: n,
            slipped_this_step: slipped[f],
            load_bearing: flags.load_bearing,
        };
        let depth = sim.penetration(n);
        if depth > MAX_PENETRATION {
            log::warn!("t={:.3}: foot {f} penetrates {:.4} m", state.t, depth);
        }
    }
    state.passive = q;
    log::debug!(
        "t={:.3}: solve {} iters, {} rounds, residual {:.2e}",
        state.t,
        report.iterations,
        report.coulomb_rounds,
        report.residual
    );
    Ok(report)
}

/// Releases anchors of sites that left the ground and drags the others back
/// onto their friction cone. Returns whether anything changed.
fn return_map(
    sim: &Simulator,
    contacts: &mut [ContactSpring],
    points: &[Vector3<f64>],
    slipped: &mut [bool],
) -> bool {
    let mu = sim.config.friction_mu;
    let k_t = sim.config.foot_tangential_k;
    let mut changed = false;
    for ((spring, p), slip) in contacts.iter_mut().zip(points).zip(slipped) {
        let Some(anchor) = spring.anchor else {
            continue;
        };
        let depth = spring.ground.map_or(f64::NEG_INFINITY, |g| g - p.z);
        if depth < 0.0 {
            spring.anchor = None;
            changed = true;
            continue;
        }
        let d = p.xy() - anchor;
        let limit = mu * spring.k_normal * depth / k_t;
        if d.norm() > limit + sim.config.solver_tol / k_t {
            spring.anchor = Some(p.xy() - d * (limit / d.norm()));
            *slip = true;
            changed = true;
        }
    }
    changed
}

/// Contact flags of every foot, `[left, right]` per segment.
pub fn detect_contacts(state: &SimState) -> Vec<[FootContact; 2]> {
    state
        .contacts
        .iter()
        .map(|pair| {
            pair.map(|c| FootContact {
                in_contact: c.in_contact,
                load_bearing: c.load_bearing,
            })
        })
        .collect()
}

fn snapshots(state: &SimState) -> Vec<SensorSnapshot> {
    state
        .joints
        .iter()
        .zip(&state.contacts)
        .map(|(j, c)| SensorSnapshot {
            psi: j.yaw,
            phi_left: j.left,
            phi_right: j.right,
            contact_left: c[0].load_bearing,
            contact_right: c[1].load_bearing,
            upstream: Upstream::FreeRunning,
            t: state.t,
        })
        .collect()
}

/// Advances one tick and returns the record for the new time.
///
/// The controller reacts to what was sensed at the current time, the
/// servos are replanned, time advances, and the new joint angles are
/// sampled, settled and sensed.
pub fn step_sim(sim: &Simulator, state: &mut SimState) -> Result<TrajectoryRecord> {
    let (controllers, setpoints) =
        step_controller(&state.controllers, &snapshots(state), &sim.params)?;
    for (servos, sp) in state.servos.iter_mut().zip(&setpoints) {
        servos.command(sp.yaw, sp.left, sp.right, state.t);
    }
    state.controllers = controllers;
    state.tick += 1;
    state.t = state.tick as f64 * sim.config.dt;
    let t = state.t;
    state.joints = state.servos.iter_mut().map(|s| s.sample(t)).collect();
    solve_quasistatic(sim, state)?;
    Ok(record(sim, state))
}

fn body_frame(state: &SimState, poses: &[Pose]) -> BodyFrame {
    let positions: Vec<Vector3<f64>> = poses.iter().map(|p| p.translation.vector).collect();
    let z_axes: Vec<Vector3<f64>> = poses.iter().map(|p| p.rotation * Vector3::z()).collect();
    let previous = state.last_forward.map(Vector3::from);
    virtual_body_frame(&positions, &z_axes, previous).unwrap_or_else(|_| {
        // a single segment (or a degenerate spread) uses the head frame
        let head = poses[0];
        BodyFrame {
            origin: positions.iter().sum::<Vector3<f64>>() / positions.len() as f64,
            x: head.rotation * Vector3::x(),
            y: head.rotation * Vector3::y(),
            z: head.rotation * Vector3::z(),
        }
    })
}

/// Snapshot of the state as a trajectory record.
pub fn record(sim: &Simulator, state: &mut SimState) -> TrajectoryRecord {
    let poses = sim.segment_poses(state);
    let feet = crate::kinematics::foot_positions(&sim.model, &poses, &state.joints);
    let frame = body_frame(state, &poses);
    let ground = sim.terrain.height_at(frame.origin.x, frame.origin.y);
    let posture = posture_metrics(&frame, ground);
    state.last_forward = Some(frame.x.into());
    let segments = (0..sim.model.n_segments)
        .map(|i| {
            let c = &state.contacts[i];
            let ctl = &state.controllers[i];
            SegmentRecord {
                joints: state.joints[i],
                feet: feet[i].map(|p| p.into()),
                yaw_state: ctl.yaw,
                legs: [ctl.left.state, ctl.right.state],
                contact: [c[0].load_bearing, c[1].load_bearing],
                slip: [c[0].slipped_this_step, c[1].slipped_this_step],
                normal_force: [c[0].normal_force, c[1].normal_force],
            }
        })
        .collect();
    TrajectoryRecord {
        t: state.t,
        segments,
        body: BodySample {
            origin: frame.origin.into(),
            forward: frame.x.into(),
            height: posture.height,
            pitch: posture.pitch,
            roll: posture.roll,
        },
    }
}

/// Controller and servo state at one tick of a free-running cycle.
#[derive(Clone, Copy, Debug)]
struct CycleSample {
    t: f64,
    controller: SegmentController,
    servos: SegmentServos,
}

/// One full cycle of a single segment running without ground, starting at
/// the release from `SYNC_A`.
fn nominal_cycle(params: &ControlParams, dt: f64) -> Result<Vec<CycleSample>> {
    let mut ctl = SegmentController::new(0, params, params.phi_down);
    let mut servos = SegmentServos::new(params, -params.psi_max, params.phi_down, 0.0);
    let mut samples = Vec::new();
    let mut left_sync = false;
    for tick in 0..1_000_000u64 {
        let t = tick as f64 * dt;
        let joints = servos.sample(t);
        if ctl.yaw == YawState::Sync(Stroke::A) && left_sync {
            return Ok(samples);
        }
        left_sync |= ctl.yaw != YawState::Sync(Stroke::A);
        samples.push(CycleSample {
            t,
            controller: ctl,
            servos,
        });
        let snap = SensorSnapshot {
            psi: joints.yaw,
            phi_left: joints.left,
            phi_right: joints.right,
            contact_left: false,
            contact_right: false,
            upstream: Upstream::FreeRunning,
            t,
        };
        let (next, sp) = step_controller(&[ctl], &[snap], params)?;
        ctl = next[0];
        servos.command(sp[0].yaw, sp[0].left, sp[0].right, t);
    }
    Err(Error::Degenerate(
        "controller never completes a cycle without ground",
    ))
}

fn shift_controller(ctl: &mut SegmentController, dt: f64) {
    ctl.yaw_entered_at += dt;
    ctl.left.entered_at += dt;
    ctl.right.entered_at += dt;
}

/// How segments start a trial.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    /// Every segment at a uniformly random point of its cycle.
    #[default]
    Randomized,
    /// Every segment idle in `SYNC_A` with both legs down.
    Synchronized,
}

/// Builds the initial state at `t = 0`: controllers and servos placed on
/// their cycle, the body set down so its lowest foot touches the ground, and
/// the first equilibrium solved.
pub fn initial_state(sim: &Simulator, init: InitMode, seed: u64) -> Result<SimState> {
    let n = sim.model.n_segments;
    let cycle = nominal_cycle(&sim.params, sim.config.dt)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut controllers = Vec::with_capacity(n);
    let mut servos = Vec::with_capacity(n);
    for i in 0..n {
        let k = match init {
            InitMode::Randomized => rng.random_range(0..cycle.len()),
            InitMode::Synchronized => 0,
        };
        let sample = cycle[k];
        let mut ctl = sample.controller;
        ctl.index = i;
        shift_controller(&mut ctl, -sample.t);
        let mut s = sample.servos;
        s.shift_time(-sample.t);
        controllers.push(ctl);
        servos.push(s);
    }
    let joints: Vec<SegmentJoints> = servos.iter_mut().map(|s| s.sample(0.0)).collect();
    let mut state = SimState {
        tick: 0,
        t: 0.0,
        passive: Passive {
            head: Isometry3::translation(START_X, 0.0, 0.0),
            pitches: vec![0.0; n - 1],
        },
        joints,
        servos,
        contacts: vec![[ContactState::default(); 2]; n],
        body_anchors: vec![None; BODY_CORNERS * n],
        controllers,
        last_forward: None,
    };
    settle(sim, &mut state)?;
    Ok(state)
}

/// A state at `t = 0` with the given joint angles held by idle controllers
/// and the head at [`START_X`], not yet set on the ground.
pub fn state_with_joints(sim: &Simulator, joints: Vec<SegmentJoints>) -> Result<SimState> {
    let n = sim.model.n_segments;
    if joints.len() != n {
        return Err(Error::Mismatch {
            what: "joint sets per segment",
            expected: n,
            got: joints.len(),
        });
    }
    let servos = joints
        .iter()
        .map(|j| SegmentServos {
            yaw: Servo::new(MotorLimits::yaw(&sim.params), j.yaw, 0.0),
            left: Servo::new(MotorLimits::leg(&sim.params), j.left, 0.0),
            right: Servo::new(MotorLimits::leg(&sim.params), j.right, 0.0),
        })
        .collect();
    let controllers = (0..n)
        .map(|i| {
            let mut c = SegmentController::new(i, &sim.params, joints[i].left);
            c.right.setpoint = joints[i].right;
            c.yaw_setpoint = joints[i].yaw;
            c
        })
        .collect();
    Ok(SimState {
        tick: 0,
        t: 0.0,
        passive: Passive {
            head: Isometry3::translation(START_X, 0.0, 0.0),
            pitches: vec![0.0; n - 1],
        },
        joints,
        servos,
        contacts: vec![[ContactState::default(); 2]; n],
        body_anchors: vec![None; BODY_CORNERS * n],
        controllers,
        last_forward: None,
    })
}

/// Sets the body down so its lowest foot or body corner just touches the
/// ground below it, then solves the first equilibrium. Does nothing without
/// ground.
pub fn settle(sim: &Simulator, state: &mut SimState) -> Result<SolveReport> {
    if sim.terrain.is_floating() {
        return Ok(SolveReport::default());
    }
    let poses = sim.segment_poses(state);
    let mut lift = f64::NEG_INFINITY;
    for p in sim.foot_positions(state).iter().flatten() {
        lift = lift.max(sim.terrain.height_at(p.x, p.y).unwrap_or(0.0) - p.z);
    }
    let corners = body_corners(&sim.model);
    for pose in &poses {
        for c in &corners {
            let b = pose * nalgebra::Point3::from(*c);
            lift = lift.max(sim.terrain.height_at(b.x, b.y).unwrap_or(0.0) - b.z);
        }
    }
    state.passive.head.translation.vector.z += lift;
    solve_quasistatic(sim, state)
}

/// Classifies one foot after a solve: contact when the tip is at or below
/// the ground, with the normal force of the compressed foot spring.
pub fn classify_contact(
    tip_z: f64,
    ground: f64,
    k_foot: f64,
    load_threshold: f64,
) -> (FootContact, f64) {
    if tip_z > ground {
        return (FootContact::default(), 0.0);
    }
    let n = k_foot * (ground - tip_z);
    (
        FootContact {
            in_contact: true,
            load_bearing: n > load_threshold,
        },
        n,
    )
}

/// Runs one trial for `duration` seconds. The returned trajectory holds the
/// initial record plus one record per tick.
pub fn run_trial(sim: &Simulator, init: InitMode, seed: u64, duration: f64) -> Result<Trajectory> {
    if !(duration >= 0.0 && duration.is_finite()) {
        return Err(Error::config("duration", "must be ≥ 0"));
    }
    let mut state = initial_state(sim, init, seed)?;
    let ticks = (duration / sim.config.dt).round() as u64;
    let mut records = Vec::with_capacity(ticks as usize + 1);
    records.push(record(sim, &mut state));
    for _ in 0..ticks {
        records.push(step_sim(sim, &mut state)?);
    }
    Ok(Trajectory {
        dt: sim.config.dt,
        floating: sim.terrain.is_floating(),
        model: sim.model.clone(),
        records,
    })
}

/// Continuous-time period of the free-running (ground-free) cycle: per
/// stroke, the head's `SYNC` dwell, the rise dwell, the swing to
/// `psi_thres`, and the fall dwell.
pub fn fictive_cycle_time(params: &ControlParams) -> f64 {
    let leg = MotorLimits::leg(params);
    let yaw = MotorLimits::yaw(params);
    let (rise, _) = plan_profile(params.phi_down, params.phi_up, &leg, 0.0);
    let (swing, _) = plan_profile(-params.psi_max, params.psi_max, &yaw, 0.0);
    let (fall, _) = plan_profile(params.phi_up, params.phi_down, &leg, 0.0);
    let wait_rise = time_to_reach(&rise, params.phi_up_thres)
        .unwrap_or(rise.duration())
        .max(params.t_rise);
    let swing = time_to_reach(&swing, params.psi_thres).unwrap_or(swing.duration());
    let wait_fall = fall.duration().max(params.t_fall);
    2.0 * (params.head_dwell + wait_rise + swing + wait_fall)
}
