//! Hierarchical yaw/leg state machines and the head-to-tail coupling chain.
//!
//! Each segment runs one yaw machine with four top-level states
//! (`SYNC_A`, `STROKE_A`, `SYNC_B`, `STROKE_B`). The two `STROKE` states are
//! composite, walking through `WAIT_RISE -> SWING -> WAIT_FALL`. The yaw
//! machine drives two leg machines (`STAND`, `RISE`, `READY`, `FALL`) through
//! [`LegEvent`]s. A segment leaves `SYNC` only when its upstream neighbour is
//! stroking, which produces the traveling wave along the body.
//!
//! All transition functions are pure: they take the previous state plus a
//! sensor snapshot and return the next state.

use std::f64::consts::FRAC_PI_2;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mechanical range of every joint.
pub const HARDWARE_LIMIT: f64 = FRAC_PI_2;

/// Dynamixel MX-64 no-load speed, 78 RPM.
pub const MX64_NO_LOAD_SPEED: f64 = 78.0 * 2.0 * std::f64::consts::PI / 60.0;

/// Dynamixel MX-64 holding torque in N·m.
pub const MX64_HOLDING_TORQUE: f64 = 7.3;

/// Which leg lifts while the yaw strokes toward `+psi_max`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SwingSide {
    #[default]
    RightOnPositive,
    LeftOnPositive,
}

/// What an upstream stroke must look like for a `SYNC` state to release.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SyncRule {
    /// `SYNC_A` releases when the predecessor enters `STROKE_B` and vice
    /// versa, so neighbours stroke in opposite directions (alternating
    /// tripod). An entry counts if it happened no earlier than `sync_window`
    /// before this segment reached `SYNC`; a later arrival waits for the
    /// next entry.
    OppositeEntry,
    /// Level-triggered variant: `SYNC_A` releases whenever the predecessor
    /// is anywhere in `STROKE_B`, and vice versa.
    #[default]
    OppositeStroke,
    /// `SYNC_x` releases while the predecessor is in either stroke.
    AnyStroke,
    /// `SYNC_x` releases on the predecessor's next entry into either stroke,
    /// with the same latch window as [`SyncRule::OppositeEntry`].
    AnyEntry,
}

/// Controller tuning surface.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlParams {
    pub psi_max: f64,
    /// `SWING -> WAIT_FALL` yaw threshold.
    pub psi_thres: f64,
    /// Lifted roll target.
    pub phi_up: f64,
    /// `RISE -> READY` roll threshold.
    pub phi_up_thres: f64,
    /// Lowest roll commanded during `FALL`.
    pub phi_down: f64,
    /// Touchdown offset added below the contact angle.
    pub delta_phi: f64,
    /// Minimum dwell in `WAIT_RISE`.
    pub t_rise: f64,
    /// Minimum dwell in `WAIT_FALL`.
    pub t_fall: f64,
    pub yaw_speed_max: f64,
    pub leg_speed_max: f64,
    pub profile_accel: f64,
    pub swing_side: SwingSide,
    pub sync_rule: SyncRule,
    /// Latch window of [`SyncRule::OppositeEntry`], in seconds.
    pub sync_window: f64,
    /// Time the head segment spends in each `SYNC` state, in seconds.
    pub head_dwell: f64,
}

impl Default for ControlParams {
    fn default() -> Self {
        Self {
            psi_max: 0.6,
            psi_thres: 0.55,
            phi_up: -0.1,
            phi_up_thres: -0.15,
            phi_down: -1.0,
            delta_phi: 0.6,
            t_rise: 0.1,
            t_fall: 0.1,
            yaw_speed_max: MX64_NO_LOAD_SPEED,
            leg_speed_max: MX64_NO_LOAD_SPEED,
            profile_accel: 50.0,
            swing_side: SwingSide::default(),
            sync_rule: SyncRule::default(),
            sync_window: 0.025,
            head_dwell: 0.0,
        }
    }
}

impl ControlParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("psi_max", self.psi_max),
            ("psi_thres", self.psi_thres),
            ("phi_up", self.phi_up),
            ("phi_up_thres", self.phi_up_thres),
            ("phi_down", self.phi_down),
            ("delta_phi", self.delta_phi),
            ("t_rise", self.t_rise),
            ("t_fall", self.t_fall),
            ("yaw_speed_max", self.yaw_speed_max),
            ("leg_speed_max", self.leg_speed_max),
            ("profile_accel", self.profile_accel),
            ("sync_window", self.sync_window),
            ("head_dwell", self.head_dwell),
        ];
        for (name, v) in all {
            if !v.is_finite() {
                return Err(Error::config(name, "must be finite"));
            }
        }
        if !(self.psi_max > 0.0 && self.psi_max <= HARDWARE_LIMIT) {
            return Err(Error::config("psi_max", "must lie in (0, π/2]"));
        }
        if !(self.psi_thres > -self.psi_max && self.psi_thres < self.psi_max) {
            return Err(Error::config(
                "psi_thres",
                format!(
                    "= {} violates the bound (-ψ_max, ψ_max) = ({}, {})",
                    self.psi_thres, -self.psi_max, self.psi_max
                ),
            ));
        }
        if self.phi_up > 0.0 {
            return Err(Error::config("phi_up", "must be ≤ 0"));
        }
        if !(self.phi_up_thres < self.phi_up) {
            return Err(Error::config("phi_up_thres", "must be < phi_up"));
        }
        if !(self.phi_down < self.phi_up_thres) {
            return Err(Error::config("phi_down", "must be < phi_up_thres"));
        }
        if self.phi_down < -HARDWARE_LIMIT {
            return Err(Error::config("phi_down", "must be ≥ -π/2"));
        }
        if !(self.delta_phi >= 0.0 && self.delta_phi < self.phi_down.abs()) {
            return Err(Error::config("delta_phi", "must lie in [0, |phi_down|)"));
        }
        if self.t_rise < 0.0 {
            return Err(Error::config("t_rise", "must be ≥ 0"));
        }
        if self.t_fall < 0.0 {
            return Err(Error::config("t_fall", "must be ≥ 0"));
        }
        if self.yaw_speed_max <= 0.0 {
            return Err(Error::config("yaw_speed_max", "must be > 0"));
        }
        if self.leg_speed_max <= 0.0 {
            return Err(Error::config("leg_speed_max", "must be > 0"));
        }
        if self.profile_accel <= 0.0 {
            return Err(Error::config("profile_accel", "must be > 0"));
        }
        if self.sync_window < 0.0 {
            return Err(Error::config("sync_window", "must be ≥ 0"));
        }
        if self.head_dwell < 0.0 {
            return Err(Error::config("head_dwell", "must be ≥ 0"));
        }
        Ok(())
    }

    /// Lifted side for a stroke.
    pub fn swing_leg(&self, stroke: Stroke) -> Side {
        match (self.swing_side, stroke) {
            (SwingSide::RightOnPositive, Stroke::A) | (SwingSide::LeftOnPositive, Stroke::B) => {
                Side::Right
            }
            _ => Side::Left,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LegState {
    Stand,
    Rise,
    Ready,
    Fall,
}

impl LegState {
    pub fn name(self) -> &'static str {
        match self {
            LegState::Stand => "STAND",
            LegState::Rise => "RISE",
            LegState::Ready => "READY",
            LegState::Fall => "FALL",
        }
    }

    pub const ALL: [LegState; 4] = [
        LegState::Stand,
        LegState::Rise,
        LegState::Ready,
        LegState::Fall,
    ];

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.name() == name)
    }
}

impl fmt::Display for LegState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Command from a yaw machine to one of its legs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum LegEvent {
    #[default]
    None,
    Lift,
    Drop,
    Abort,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LegFsm {
    pub state: LegState,
    pub entered_at: f64,
    pub setpoint: f64,
}

impl LegFsm {
    pub fn standing(setpoint: f64) -> Self {
        Self {
            state: LegState::Stand,
            entered_at: 0.0,
            setpoint,
        }
    }

    fn enter(self, state: LegState, t: f64, setpoint: f64) -> Self {
        Self {
            state,
            entered_at: t,
            setpoint,
        }
    }
}

/// What a leg machine senses about its own leg.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LegSense {
    pub phi: f64,
    /// Load-bearing ground contact.
    pub contact: bool,
    pub t: f64,
}

/// Commanded roll after touchdown: the contact angle pushed further down by
/// the touchdown offset, kept inside `[-π/2, phi_up]`.
pub fn apply_touchdown_offset(phi_contact: f64, params: &ControlParams) -> f64 {
    (phi_contact - params.delta_phi).clamp(-HARDWARE_LIMIT, params.phi_up)
}

/// One transition of a leg machine. At most one state change per call.
pub fn step_leg_fsm(
    leg: &LegFsm,
    sense: LegSense,
    event: LegEvent,
    params: &ControlParams,
) -> LegFsm {
    let t = sense.t;
    match (leg.state, event) {
        (LegState::Stand, LegEvent::Lift) => leg.enter(LegState::Rise, t, params.phi_up),
        (LegState::Rise | LegState::Ready, LegEvent::Drop | LegEvent::Abort) => {
            leg.enter(LegState::Fall, t, params.phi_down)
        }
        (LegState::Rise, _) if sense.phi >= params.phi_up_thres => {
            leg.enter(LegState::Ready, t, leg.setpoint)
        }
        (LegState::Fall, _) if sense.contact => leg.enter(
            LegState::Stand,
            t,
            apply_touchdown_offset(sense.phi, params),
        ),
        (LegState::Fall, _) if sense.phi <= params.phi_down => {
            leg.enter(LegState::Stand, t, leg.setpoint)
        }
        _ => *leg,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stroke {
    /// Yaw toward `+psi_max`.
    A,
    /// Yaw toward `-psi_max`.
    B,
}

impl Stroke {
    pub fn other(self) -> Stroke {
        match self {
            Stroke::A => Stroke::B,
            Stroke::B => Stroke::A,
        }
    }

    pub fn direction(self) -> f64 {
        match self {
            Stroke::A => 1.0,
            Stroke::B => -1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StrokePhase {
    WaitRise,
    Swing,
    WaitFall,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum YawState {
    Sync(Stroke),
    Stroke(Stroke, StrokePhase),
}

impl YawState {
    pub fn name(self) -> &'static str {
        use StrokePhase::*;
        match self {
            YawState::Sync(Stroke::A) => "SYNC_A",
            YawState::Sync(Stroke::B) => "SYNC_B",
            YawState::Stroke(Stroke::A, WaitRise) => "STROKE_A.WAIT_RISE",
            YawState::Stroke(Stroke::A, Swing) => "STROKE_A.SWING",
            YawState::Stroke(Stroke::A, WaitFall) => "STROKE_A.WAIT_FALL",
            YawState::Stroke(Stroke::B, WaitRise) => "STROKE_B.WAIT_RISE",
            YawState::Stroke(Stroke::B, Swing) => "STROKE_B.SWING",
            YawState::Stroke(Stroke::B, WaitFall) => "STROKE_B.WAIT_FALL",
        }
    }

    pub const ALL: [YawState; 8] = [
        YawState::Sync(Stroke::A),
        YawState::Stroke(Stroke::A, StrokePhase::WaitRise),
        YawState::Stroke(Stroke::A, StrokePhase::Swing),
        YawState::Stroke(Stroke::A, StrokePhase::WaitFall),
        YawState::Sync(Stroke::B),
        YawState::Stroke(Stroke::B, StrokePhase::WaitRise),
        YawState::Stroke(Stroke::B, StrokePhase::Swing),
        YawState::Stroke(Stroke::B, StrokePhase::WaitFall),
    ];

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.name() == name)
    }

    pub fn stroke(self) -> Option<Stroke> {
        match self {
            YawState::Stroke(s, _) => Some(s),
            YawState::Sync(_) => None,
        }
    }

    /// Index in the top-level cycle `SYNC_A, STROKE_A, SYNC_B, STROKE_B`.
    pub fn top_level_index(self) -> usize {
        match self {
            YawState::Sync(Stroke::A) => 0,
            YawState::Stroke(Stroke::A, _) => 1,
            YawState::Sync(Stroke::B) => 2,
            YawState::Stroke(Stroke::B, _) => 3,
        }
    }
}

impl fmt::Display for YawState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Coupling input seen by a segment's `SYNC` states.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Upstream {
    /// Head segment: no predecessor, never blocks.
    FreeRunning,
    Idle,
    /// In a stroke, entered at the given time.
    Stroking(Stroke, f64),
}

impl Upstream {
    pub fn of(seg: &SegmentController) -> Self {
        match seg.yaw.stroke() {
            Some(s) => Upstream::Stroking(s, seg.stroke_entered_at),
            None => Upstream::Idle,
        }
    }

    pub fn in_stroke(self) -> bool {
        !matches!(self, Upstream::Idle)
    }

    /// Whether a segment waiting in `SYNC` since `waiting_since` may start
    /// the stroke `waiting_for`.
    fn releases(
        self,
        waiting_for: Stroke,
        waiting_since: f64,
        t: f64,
        params: &ControlParams,
    ) -> bool {
        match (self, params.sync_rule) {
            (Upstream::FreeRunning, _) => t - waiting_since >= params.head_dwell - 1e-9,
            (Upstream::Idle, _) => false,
            (Upstream::Stroking(..), SyncRule::AnyStroke) => true,
            (Upstream::Stroking(s, _), SyncRule::OppositeStroke) => s == waiting_for.other(),
            (Upstream::Stroking(s, since), SyncRule::OppositeEntry) => {
                s == waiting_for.other() && since >= waiting_since - params.sync_window
            }
            (Upstream::Stroking(_, since), SyncRule::AnyEntry) => {
                since >= waiting_since - params.sync_window
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SensorSnapshot {
    /// Measured yaw.
    pub psi: f64,
    pub phi_left: f64,
    pub phi_right: f64,
    pub contact_left: bool,
    pub contact_right: bool,
    pub upstream: Upstream,
    pub t: f64,
}

impl SensorSnapshot {
    pub fn predecessor_in_stroke(&self) -> bool {
        self.upstream.in_stroke()
    }

    pub fn leg(&self, side: Side) -> LegSense {
        match side {
            Side::Left => LegSense {
                phi: self.phi_left,
                contact: self.contact_left,
                t: self.t,
            },
            Side::Right => LegSense {
                phi: self.phi_right,
                contact: self.contact_right,
                t: self.t,
            },
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LegEvents {
    pub left: LegEvent,
    pub right: LegEvent,
}

impl LegEvents {
    fn set(&mut self, side: Side, event: LegEvent) {
        match side {
            Side::Left => self.left = event,
            Side::Right => self.right = event,
        }
    }

    pub fn get(&self, side: Side) -> LegEvent {
        match side {
            Side::Left => self.left,
            Side::Right => self.right,
        }
    }
}

/// One segment's controller: a yaw machine and its two leg machines.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentController {
    pub index: usize,
    pub yaw: YawState,
    /// Entry time of the current yaw state (sub-state inside a stroke).
    pub yaw_entered_at: f64,
    /// Entry time of the most recent composite stroke.
    pub stroke_entered_at: f64,
    pub yaw_setpoint: f64,
    pub left: LegFsm,
    pub right: LegFsm,
}

impl SegmentController {
    /// Controller idling in `SYNC_A` with both legs standing at `stance_roll`
    /// and the yaw parked at `-psi_max`, ready to stroke toward `+psi_max`.
    pub fn new(index: usize, params: &ControlParams, stance_roll: f64) -> Self {
        Self {
            index,
            yaw: YawState::Sync(Stroke::A),
            yaw_entered_at: 0.0,
            stroke_entered_at: f64::NEG_INFINITY,
            yaw_setpoint: -params.psi_max,
            left: LegFsm::standing(stance_roll),
            right: LegFsm::standing(stance_roll),
        }
    }

    pub fn leg(&self, side: Side) -> &LegFsm {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }

    pub fn leg_mut(&mut self, side: Side) -> &mut LegFsm {
        match side {
            Side::Left => &mut self.left,
            Side::Right => &mut self.right,
        }
    }

    /// Leaves the current stroke immediately, moving to the next `SYNC`.
    /// Legs still rising receive [`LegEvent::Abort`].
    pub fn exit_stroke(&self, t: f64) -> (SegmentController, LegEvents) {
        let mut next = *self;
        let mut events = LegEvents::default();
        if let YawState::Stroke(s, _) = self.yaw {
            next.yaw = YawState::Sync(s.other());
            next.yaw_entered_at = t;
            abort_rising(self, &mut events);
        }
        (next, events)
    }

    /// Both legs in `STAND`, or one leg cycling and the other standing.
    pub fn legs_alternate(&self) -> bool {
        self.left.state == LegState::Stand || self.right.state == LegState::Stand
    }
}

fn abort_rising(seg: &SegmentController, events: &mut LegEvents) {
    for side in [Side::Left, Side::Right] {
        if seg.leg(side).state == LegState::Rise {
            events.set(side, LegEvent::Abort);
        }
    }
}

/// One transition of a segment's yaw machine.
///
/// Returns the updated controller (legs untouched), the yaw setpoint and the
/// events to feed into the two leg machines on the same tick.
pub fn step_yaw_fsm(
    seg: &SegmentController,
    snapshot: &SensorSnapshot,
    params: &ControlParams,
) -> (SegmentController, f64, LegEvents) {
    let t = snapshot.t;
    let mut next = *seg;
    let mut events = LegEvents::default();
    let elapsed = t - seg.yaw_entered_at;

    match seg.yaw {
        YawState::Sync(stroke) => {
            if snapshot
                .upstream
                .releases(stroke, seg.yaw_entered_at, t, params)
            {
                next.yaw = YawState::Stroke(stroke, StrokePhase::WaitRise);
                next.yaw_entered_at = t;
                next.stroke_entered_at = t;
                events.set(params.swing_leg(stroke), LegEvent::Lift);
            }
        }
        YawState::Stroke(stroke, StrokePhase::WaitRise) => {
            let side = params.swing_leg(stroke);
            match seg.leg(side).state {
                LegState::Ready if elapsed >= params.t_rise => {
                    next.yaw = YawState::Stroke(stroke, StrokePhase::Swing);
                    next.yaw_entered_at = t;
                    next.yaw_setpoint = stroke.direction() * params.psi_max;
                }
                // a lift issued while the leg was still falling is lost
                LegState::Stand => events.set(side, LegEvent::Lift),
                _ => {}
            }
        }
        YawState::Stroke(stroke, StrokePhase::Swing) => {
            if stroke.direction() * snapshot.psi >= params.psi_thres {
                next.yaw = YawState::Stroke(stroke, StrokePhase::WaitFall);
                next.yaw_entered_at = t;
                events.set(params.swing_leg(stroke), LegEvent::Drop);
            }
        }
        YawState::Stroke(stroke, StrokePhase::WaitFall) => {
            let side = params.swing_leg(stroke);
            match seg.leg(side).state {
                LegState::Stand if elapsed >= params.t_fall => {
                    next.yaw = YawState::Sync(stroke.other());
                    next.yaw_entered_at = t;
                    abort_rising(seg, &mut events);
                }
                LegState::Rise | LegState::Ready => events.set(side, LegEvent::Drop),
                _ => {}
            }
        }
    }
    (next, next.yaw_setpoint, events)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JointSetpoints {
    pub yaw: f64,
    pub left: f64,
    pub right: f64,
}

/// Advances every segment by one tick.
///
/// Coupling inputs are read from the pre-step chain, so the result does not
/// depend on the order segments are visited in. The `upstream` field of the
/// incoming snapshots is ignored and recomputed from `chain`.
pub fn step_controller(
    chain: &[SegmentController],
    snapshots: &[SensorSnapshot],
    params: &ControlParams,
) -> Result<(Vec<SegmentController>, Vec<JointSetpoints>)> {
    if chain.len() != snapshots.len() {
        return Err(Error::Mismatch {
            what: "sensor snapshots per segment",
            expected: chain.len(),
            got: snapshots.len(),
        });
    }
    let mut next_chain = Vec::with_capacity(chain.len());
    let mut setpoints = Vec::with_capacity(chain.len());
    for (i, (seg, snap)) in chain.iter().zip(snapshots).enumerate() {
        let upstream = if i == 0 {
            Upstream::FreeRunning
        } else {
            Upstream::of(&chain[i - 1])
        };
        let snap = SensorSnapshot { upstream, ..*snap };
        let (mut next, yaw, events) = step_yaw_fsm(seg, &snap, params);
        next.left = step_leg_fsm(&seg.left, snap.leg(Side::Left), events.left, params);
        next.right = step_leg_fsm(&seg.right, snap.leg(Side::Right), events.right, params);
        setpoints.push(JointSetpoints {
            yaw,
            left: next.left.setpoint,
            right: next.right.setpoint,
        });
        next_chain.push(next);
    }
    Ok((next_chain, setpoints))
}
