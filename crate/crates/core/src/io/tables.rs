use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsm::{LegState, YawState};
use crate::kinematics::{RobotModel, SegmentJoints};
use crate::sim::{BodySample, SegmentRecord, Trajectory, TrajectoryRecord};

pub const TRAJECTORY_HEADER: &str = "# polyped trajectory v1";
pub const BODY_HEADER: &str = "# polyped body v1";

pub const TRAJECTORY_COLUMNS: [&str; 18] = [
    "t",
    "seg",
    "yaw",
    "roll_L",
    "roll_R",
    "footL_x",
    "footL_y",
    "footL_z",
    "footR_x",
    "footR_y",
    "footR_z",
    "yaw_state",
    "legL_state",
    "legR_state",
    "contact_L",
    "contact_R",
    "slip_L",
    "slip_R",
];
pub const BODY_COLUMNS: [&str; 7] = ["t", "OG_x", "OG_y", "OG_z", "height", "pitch", "roll"];

/// One row of `trajectory.csv`: a segment at one tick.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub seg: usize,
    pub yaw: f64,
    #[serde(rename = "roll_L")]
    pub roll_l: f64,
    #[serde(rename = "roll_R")]
    pub roll_r: f64,
    #[serde(rename = "footL_x")]
    pub foot_l_x: f64,
    #[serde(rename = "footL_y")]
    pub foot_l_y: f64,
    #[serde(rename = "footL_z")]
    pub foot_l_z: f64,
    #[serde(rename = "footR_x")]
    pub foot_r_x: f64,
    #[serde(rename = "footR_y")]
    pub foot_r_y: f64,
    #[serde(rename = "footR_z")]
    pub foot_r_z: f64,
    pub yaw_state: String,
    #[serde(rename = "legL_state")]
    pub leg_l_state: String,
    #[serde(rename = "legR_state")]
    pub leg_r_state: String,
    #[serde(rename = "contact_L")]
    pub contact_l: u8,
    #[serde(rename = "contact_R")]
    pub contact_r: u8,
    #[serde(rename = "slip_L")]
    pub slip_l: u8,
    #[serde(rename = "slip_R")]
    pub slip_r: u8,
}

/// One row of `body.csv`. `height` is empty without ground.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BodyRow {
    pub t: f64,
    #[serde(rename = "OG_x")]
    pub og_x: f64,
    #[serde(rename = "OG_y")]
    pub og_y: f64,
    #[serde(rename = "OG_z")]
    pub og_z: f64,
    pub height: Option<f64>,
    pub pitch: f64,
    pub roll: f64,
}

impl TrajectoryRow {
    fn new(t: f64, seg: usize, s: &SegmentRecord) -> Self {
        let [l, r] = s.feet;
        Self {
            t,
            seg,
            yaw: s.joints.yaw,
            roll_l: s.joints.left,
            roll_r: s.joints.right,
            foot_l_x: l[0],
            foot_l_y: l[1],
            foot_l_z: l[2],
            foot_r_x: r[0],
            foot_r_y: r[1],
            foot_r_z: r[2],
            yaw_state: s.yaw_state.name().to_string(),
            leg_l_state: s.legs[0].name().to_string(),
            leg_r_state: s.legs[1].name().to_string(),
            contact_l: s.contact[0].into(),
            contact_r: s.contact[1].into(),
            slip_l: s.slip[0].into(),
            slip_r: s.slip[1].into(),
        }
    }

    /// The segment record this row describes. Normal forces are not stored
    /// and read back as zero.
    pub fn to_record(&self) -> Result<SegmentRecord> {
        let leg = |name: &str| {
            LegState::from_name(name)
                .ok_or_else(|| Error::Format(format!("unknown leg state `{name}`")))
        };
        Ok(SegmentRecord {
            joints: SegmentJoints {
                yaw: self.yaw,
                left: self.roll_l,
                right: self.roll_r,
            },
            feet: [
                [self.foot_l_x, self.foot_l_y, self.foot_l_z],
                [self.foot_r_x, self.foot_r_y, self.foot_r_z],
            ],
            yaw_state: YawState::from_name(&self.yaw_state)
                .ok_or_else(|| Error::Format(format!("unknown yaw state `{}`", self.yaw_state)))?,
            legs: [leg(&self.leg_l_state)?, leg(&self.leg_r_state)?],
            contact: [self.contact_l != 0, self.contact_r != 0],
            slip: [self.slip_l != 0, self.slip_r != 0],
            normal_force: [0.0; 2],
        })
    }
}

impl BodyRow {
    fn new(t: f64, b: &BodySample) -> Self {
        Self {
            t,
            og_x: b.origin[0],
            og_y: b.origin[1],
            og_z: b.origin[2],
            height: b.height,
            pitch: b.pitch,
            roll: b.roll,
        }
    }
}

fn write_table<W: Write, R: Serialize>(
    mut out: W,
    header: &str,
    rows: impl Iterator<Item = R>,
) -> Result<()> {
    writeln!(out, "{header}").map_err(|e| Error::io("<writer>", e))?;
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io("<writer>", e))?;
    Ok(())
}

fn read_table<R: BufRead, T: for<'de> Deserialize<'de>>(
    mut input: R,
    header: &str,
    columns: &[&str],
) -> Result<Vec<T>> {
    let mut first = String::new();
    input
        .read_line(&mut first)
        .map_err(|e| Error::io("<reader>", e))?;
    if first.trim_end() != header {
        return Err(Error::Format(format!(
            "expected `{header}`, found `{}`",
            first.trim_end()
        )));
    }
    let mut r = csv::Reader::from_reader(input);
    let found: Vec<&str> = r.headers()?.iter().collect();
    if found != columns {
        return Err(Error::Format(format!(
            "expected columns {columns:?}, found {found:?}"
        )));
    }
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// Writes one row per segment per tick, segments in chain order.
pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, out: W) -> Result<()> {
    let rows = traj.records.iter().flat_map(|r| {
        r.segments
            .iter()
            .enumerate()
            .map(|(k, s)| TrajectoryRow::new(r.t, k, s))
    });
    write_table(out, TRAJECTORY_HEADER, rows)
}

pub fn write_body_csv<W: Write>(traj: &Trajectory, out: W) -> Result<()> {
    write_table(
        out,
        BODY_HEADER,
        traj.records.iter().map(|r| BodyRow::new(r.t, &r.body)),
    )
}

pub fn read_trajectory_csv<R: BufRead>(input: R) -> Result<Vec<TrajectoryRow>> {
    read_table(input, TRAJECTORY_HEADER, &TRAJECTORY_COLUMNS)
}

pub fn read_body_csv<R: BufRead>(input: R) -> Result<Vec<BodyRow>> {
    read_table(input, BODY_HEADER, &BODY_COLUMNS)
}

/// Rebuilds a trajectory from its two tables. The body forward axis and the
/// normal forces are not stored; they read back as zero.
pub fn assemble_trajectory(
    model: RobotModel,
    dt: f64,
    rows: &[TrajectoryRow],
    body: &[BodyRow],
) -> Result<Trajectory> {
    let n = model.n_segments;
    if n == 0 || rows.len() != n * body.len() {
        return Err(Error::Mismatch {
            what: "trajectory rows",
            expected: n * body.len(),
            got: rows.len(),
        });
    }
    let records = body
        .iter()
        .zip(rows.chunks(n))
        .map(|(b, chunk)| {
            if chunk
                .iter()
                .enumerate()
                .any(|(k, r)| r.seg != k || r.t != b.t)
            {
                return Err(Error::Format(format!(
                    "trajectory and body rows disagree at t = {}",
                    b.t
                )));
            }
            Ok(TrajectoryRecord {
                t: b.t,
                segments: chunk
                    .iter()
                    .map(TrajectoryRow::to_record)
                    .collect::<Result<_>>()?,
                body: BodySample {
                    origin: [b.og_x, b.og_y, b.og_z],
                    forward: [0.0; 3],
                    height: b.height,
                    pitch: b.pitch,
                    roll: b.roll,
                },
            })
        })
        .collect::<Result<_>>()?;
    Ok(Trajectory {
        dt,
        floating: body.iter().all(|b| b.height.is_none()),
        model,
        records,
    })
}
