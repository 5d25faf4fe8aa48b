//! Per-segment phase from a 7-dimensional kinematic signal.
//!
//! The signal is projected onto its two leading principal components, the
//! plane angle is unwrapped, and a Fourier series in that angle (order 5)
//! absorbs the part of the angle that does not advance linearly in time.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::fsm::Side;
use crate::kinematics::foot_offset;
use crate::sim::Trajectory;

pub const PHASE_CHANNELS: [&str; 7] = [
    "x_left_foot",
    "z_left_foot",
    "x_right_foot",
    "z_right_foot",
    "yaw",
    "roll_left",
    "roll_right",
];

/// Fourier order of the uniformizing correction.
pub const CORRECTION_ORDER: usize = 5;

/// Smallest slope allowed for the corrected phase as a function of the raw
/// angle; larger corrections are shrunk to keep the map monotone.
const MIN_SLOPE: f64 = 0.05;

/// Multi-channel time series, one row per sample.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseSignal {
    pub t: Vec<f64>,
    /// Names of the kept channels, in column order.
    pub channels: Vec<&'static str>,
    /// Channels dropped for having no variance.
    pub dropped: Vec<&'static str>,
    pub data: DMatrix<f64>,
}

impl PhaseSignal {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

/// Raw channels of segment `k` for every record after the first. Foot
/// coordinates are in the segment frame.
pub fn raw_phase_channels(traj: &Trajectory, k: usize) -> Result<(Vec<f64>, DMatrix<f64>)> {
    if traj.records.len() < 2 {
        return Err(Error::Degenerate("trajectory needs at least two records"));
    }
    if k >= traj.n_segments() {
        return Err(Error::Mismatch {
            what: "segment index",
            expected: traj.n_segments(),
            got: k,
        });
    }
    let records = &traj.records[1..];
    let mut data = DMatrix::zeros(records.len(), PHASE_CHANNELS.len());
    for (i, r) in records.iter().enumerate() {
        let j = r.segments[k].joints;
        let left = foot_offset(&traj.model, Side::Left, j.yaw, j.left);
        let right = foot_offset(&traj.model, Side::Right, j.yaw, j.right);
        let row = [left.x, left.z, right.x, right.z, j.yaw, j.left, j.right];
        for (c, v) in row.into_iter().enumerate() {
            data[(i, c)] = v;
        }
    }
    Ok((records.iter().map(|r| r.t).collect(), data))
}

/// Per-channel mean and standard deviation, with the indices of channels
/// whose spread is large enough to keep.
fn channel_stats(data: &DMatrix<f64>) -> (DVector<f64>, DVector<f64>, Vec<usize>) {
    let n = data.nrows().max(1) as f64;
    let mean = DVector::from_iterator(data.ncols(), data.column_iter().map(|c| c.sum() / n));
    let std = DVector::from_iterator(
        data.ncols(),
        data.column_iter()
            .zip(mean.iter())
            .map(|(c, m)| (c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt()),
    );
    let keep = (0..data.ncols())
        .filter(|&c| std[c] > 1e-9 * (1.0 + mean[c].abs()))
        .collect();
    (mean, std, keep)
}

fn normalize(
    data: &DMatrix<f64>,
    mean: &DVector<f64>,
    std: &DVector<f64>,
    keep: &[usize],
) -> DMatrix<f64> {
    DMatrix::from_fn(data.nrows(), keep.len(), |i, j| {
        let c = keep[j];
        (data[(i, c)] - mean[c]) / std[c]
    })
}

fn warn_dropped(names: &[&'static str], keep: &[usize]) -> Vec<&'static str> {
    let dropped: Vec<&'static str> = (0..names.len())
        .filter(|c| !keep.contains(c))
        .map(|c| names[c])
        .collect();
    if !dropped.is_empty() {
        log::warn!("dropping constant phase channels: {}", dropped.join(", "));
    }
    dropped
}

/// Mean-centred, variance-normalized 7-channel signal of segment `k`.
pub fn build_phase_signal(traj: &Trajectory, k: usize) -> Result<PhaseSignal> {
    let (t, raw) = raw_phase_channels(traj, k)?;
    let (mean, std, keep) = channel_stats(&raw);
    let dropped = warn_dropped(&PHASE_CHANNELS, &keep);
    Ok(PhaseSignal {
        t,
        channels: keep.iter().map(|&c| PHASE_CHANNELS[c]).collect(),
        dropped,
        data: normalize(&raw, &mean, &std, &keep),
    })
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = a - TAU * ((a + PI) / TAU).floor();
    if w <= -PI {
        w + TAU
    } else {
        w
    }
}

/// Unwraps a sequence of angles so consecutive values differ by less than π.
pub fn unwrap(angles: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(angles.len());
    let mut offset = 0.0;
    let mut prev: Option<f64> = None;
    for &a in angles {
        if let Some(p) = prev {
            let d = a - p;
            if d > PI {
                offset -= TAU;
            } else if d < -PI {
                offset += TAU;
            }
        }
        out.push(a + offset);
        prev = Some(a);
    }
    out
}

/// A phase map fitted to one or more series sharing a limit cycle.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseModel {
    mean: DVector<f64>,
    std: DVector<f64>,
    keep: Vec<usize>,
    axes: [DVector<f64>; 2],
    /// `(cos, sin)` coefficients of orders `1..=CORRECTION_ORDER`.
    correction: Vec<(f64, f64)>,
}

impl PhaseModel {
    /// Fits the map to series given as `(t, samples)` with one row per
    /// sample. Each series must complete at least two cycles.
    pub fn fit(series: &[(&[f64], &DMatrix<f64>)]) -> Result<Self> {
        let Some((_, first)) = series.first() else {
            return Err(Error::Phase("no series to fit".into()));
        };
        let dim = first.ncols();
        for (t, x) in series {
            if x.ncols() != dim {
                return Err(Error::Mismatch {
                    what: "signal channels",
                    expected: dim,
                    got: x.ncols(),
                });
            }
            if t.len() != x.nrows() {
                return Err(Error::Mismatch {
                    what: "signal samples",
                    expected: t.len(),
                    got: x.nrows(),
                });
            }
        }
        let pooled = DMatrix::from_rows(
            &series
                .iter()
                .flat_map(|(_, x)| x.row_iter().map(|r| r.into_owned()))
                .collect::<Vec<_>>(),
        );
        let (mean, std, keep) = channel_stats(&pooled);
        if keep.len() < 2 {
            return Err(Error::Phase(format!("only {} channel(s) vary", keep.len())));
        }
        let z = normalize(&pooled, &mean, &std, &keep);
        let cov = z.transpose() * &z / z.nrows() as f64;
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let axis = |i: usize| {
            let v = eig.eigenvectors.column(order[i]).into_owned();
            // deterministic sign: largest component positive
            let big = v.iamax();
            if v[big] < 0.0 {
                -v
            } else {
                v
            }
        };
        let mut model = PhaseModel {
            mean,
            std,
            keep,
            axes: [axis(0), axis(1)],
            correction: vec![(0.0, 0.0); CORRECTION_ORDER],
        };

        let angles: Vec<Vec<f64>> = series
            .iter()
            .map(|(_, x)| unwrap(&model.raw_angles(x)))
            .collect();
        let advance: f64 = angles
            .iter()
            .map(|a| a.last().copied().unwrap_or(0.0) - a.first().copied().unwrap_or(0.0))
            .sum();
        if advance < 0.0 {
            model.axes[1] = -model.axes[1].clone();
        }
        let angles: Vec<Vec<f64>> = series
            .iter()
            .map(|(_, x)| unwrap(&model.raw_angles(x)))
            .collect();
        for a in &angles {
            let cycles =
                (a.last().copied().unwrap_or(0.0) - a.first().copied().unwrap_or(0.0)) / TAU;
            if cycles < 2.0 {
                return Err(Error::Phase(format!(
                    "only {cycles:.2} cycles detected, need 2"
                )));
            }
        }
        model.correction = fit_correction(series, &angles)?;
        Ok(model)
    }

    /// Same plane, with the correction refitted to one series alone.
    pub fn refit_correction(&self, t: &[f64], x: &DMatrix<f64>) -> Result<Self> {
        if t.len() != x.nrows() {
            return Err(Error::Mismatch {
                what: "signal samples",
                expected: t.len(),
                got: x.nrows(),
            });
        }
        let angles = vec![unwrap(&self.raw_angles(x))];
        Ok(PhaseModel {
            correction: fit_correction(&[(t, x)], &angles)?,
            ..self.clone()
        })
    }

    /// Plane angle of each sample, before correction.
    fn raw_angles(&self, x: &DMatrix<f64>) -> Vec<f64> {
        let z = normalize(x, &self.mean, &self.std, &self.keep);
        (0..z.nrows())
            .map(|i| {
                let row = z.row(i);
                let u = row.dot(&self.axes[0].transpose());
                let v = row.dot(&self.axes[1].transpose());
                v.atan2(u)
            })
            .collect()
    }

    /// Corrected phase for a raw plane angle; advances by exactly 2π when the
    /// angle does.
    pub fn correct(&self, a: f64) -> f64 {
        a + self
            .correction
            .iter()
            .enumerate()
            .map(|(k, (c, s))| {
                let ka = (k + 1) as f64 * a;
                c * ka.cos() + s * ka.sin()
            })
            .sum::<f64>()
    }

    /// Unwrapped phase of every sample of `x`.
    pub fn phase(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        let expected = self.mean.len();
        if x.ncols() != expected {
            return Err(Error::Mismatch {
                what: "signal channels",
                expected,
                got: x.ncols(),
            });
        }
        let wrapped: Vec<f64> = self
            .raw_angles(x)
            .into_iter()
            .map(|a| self.correct(a))
            .collect();
        Ok(unwrap(&wrapped))
    }
}

/// Least-squares Fourier correction: `a(t) + Σ c_k cos ka + s_k sin ka`
/// fitted to `ω_j t + φ_j` with a free rate and offset per series.
fn fit_correction(
    series: &[(&[f64], &DMatrix<f64>)],
    angles: &[Vec<f64>],
) -> Result<Vec<(f64, f64)>> {
    let m = 2 * CORRECTION_ORDER;
    let cols = m + 2 * series.len();
    let mut ata = DMatrix::<f64>::zeros(cols, cols);
    let mut atb = DVector::<f64>::zeros(cols);
    let mut row = DVector::<f64>::zeros(cols);
    for (j, ((t, _), a)) in series.iter().zip(angles).enumerate() {
        let t0 = t.first().copied().unwrap_or(0.0);
        for (&ti, &ai) in t.iter().zip(a) {
            row.fill(0.0);
            for k in 0..CORRECTION_ORDER {
                let ka = (k + 1) as f64 * ai;
                row[2 * k] = ka.cos();
                row[2 * k + 1] = ka.sin();
            }
            row[m + 2 * j] = -(ti - t0);
            row[m + 2 * j + 1] = -1.0;
            ata.ger(1.0, &row, &row, 1.0);
            atb.axpy(-ai, &row, 1.0);
        }
    }
    let solution = ata
        .clone()
        .cholesky()
        .map(|c| c.solve(&atb))
        .or_else(|| ata.svd(true, true).solve(&atb, 1e-12).ok())
        .ok_or_else(|| Error::Phase("correction fit is singular".into()))?;
    let mut coeffs: Vec<(f64, f64)> = (0..CORRECTION_ORDER)
        .map(|k| (solution[2 * k], solution[2 * k + 1]))
        .collect();

    // keep the corrected phase monotone in the raw angle
    let steepest_drop = (0..720)
        .map(|i| {
            let a = i as f64 * TAU / 720.0;
            coeffs
                .iter()
                .enumerate()
                .map(|(k, (c, s))| {
                    let kk = (k + 1) as f64;
                    kk * (s * (kk * a).cos() - c * (kk * a).sin())
                })
                .sum::<f64>()
        })
        .fold(0.0, f64::min);
    if 1.0 + steepest_drop < MIN_SLOPE {
        let shrink = (1.0 - MIN_SLOPE) / -steepest_drop;
        log::debug!("phase correction shrunk by {shrink:.3} to stay monotone");
        for (c, s) in coeffs.iter_mut() {
            *c *= shrink;
            *s *= shrink;
        }
    }
    Ok(coeffs)
}

/// Phase of a single normalized signal.
pub fn estimate_phase(signal: &PhaseSignal) -> Result<Vec<f64>> {
    let model = PhaseModel::fit(&[(&signal.t, &signal.data)])?;
    model.phase(&signal.data)
}

/// Unwrapped phases of every segment. The projection plane is fitted to all
/// segments together so the phases share an origin; the uniformizing
/// correction is fitted per segment.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseSeries {
    pub t: Vec<f64>,
    /// `theta[k][i]`: phase of segment `k` at `t[i]`.
    pub theta: Vec<Vec<f64>>,
    /// Fraction of samples whose phase steps backward by more than 0.05 rad.
    pub residual: f64,
}

pub fn segment_phases(traj: &Trajectory) -> Result<PhaseSeries> {
    let raw: Vec<(Vec<f64>, DMatrix<f64>)> = (0..traj.n_segments())
        .map(|k| raw_phase_channels(traj, k))
        .collect::<Result<_>>()?;
    let inputs: Vec<(&[f64], &DMatrix<f64>)> = raw.iter().map(|(t, x)| (t.as_slice(), x)).collect();
    let model = PhaseModel::fit(&inputs)?;
    let dropped: Vec<usize> = (0..PHASE_CHANNELS.len())
        .filter(|c| !model.keep.contains(c))
        .collect();
    if !dropped.is_empty() {
        let names: Vec<&str> = dropped.iter().map(|&c| PHASE_CHANNELS[c]).collect();
        log::warn!("dropping constant phase channels: {}", names.join(", "));
    }
    let theta: Vec<Vec<f64>> = raw
        .iter()
        .map(|(t, x)| model.refit_correction(t, x)?.phase(x))
        .collect::<Result<_>>()?;
    let steps: usize = theta.iter().map(|th| th.len().saturating_sub(1)).sum();
    let backward: usize = theta
        .iter()
        .map(|th| th.windows(2).filter(|w| w[1] - w[0] < -0.05).count())
        .sum();
    Ok(PhaseSeries {
        t: raw[0].0.clone(),
        theta,
        residual: backward as f64 / steps.max(1) as f64,
    })
}
