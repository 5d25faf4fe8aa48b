//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, UnitQuaternion, Vector3};
use rand::Rng;

/// Rest-to-rest trapezoid velocity written as `min(a t, v_max, a (T - t))`,
/// with `T` from the distance.
pub fn oracle_velocity(distance: f64, v_max: f64, accel: f64, tau: f64) -> f64 {
    let total = if distance > v_max * v_max / accel {
        distance / v_max + v_max / accel
    } else {
        2.0 * (distance / accel).sqrt()
    };
    if tau <= 0.0 || tau >= total {
        return 0.0;
    }
    (accel * tau).min(v_max).min(accel * (total - tau))
}

/// Duration of the oracle move.
pub fn oracle_duration(distance: f64, v_max: f64, accel: f64) -> f64 {
    if distance > v_max * v_max / accel {
        distance / v_max + v_max / accel
    } else {
        2.0 * (distance / accel).sqrt()
    }
}

/// Position of the oracle move at each multiple of `dt`, by trapezoidal
/// integration of [`oracle_velocity`]. Returns `(tau, position)` pairs.
pub fn oracle_positions(
    start: f64,
    target: f64,
    v_max: f64,
    accel: f64,
    dt: f64,
) -> Vec<(f64, f64)> {
    let distance = (target - start).abs();
    let sign = (target - start).signum();
    let total = oracle_duration(distance, v_max, accel);
    let steps = (total / dt).ceil() as usize + 1;
    let mut out = Vec::with_capacity(steps + 1);
    let mut x = start;
    let mut v_prev = 0.0;
    out.push((0.0, x));
    for i in 1..=steps {
        let tau = i as f64 * dt;
        let v = oracle_velocity(distance, v_max, accel, tau);
        x += sign * 0.5 * (v + v_prev) * dt;
        v_prev = v;
        out.push((tau, x));
    }
    out
}

/// Brute-force even/odd difference: separate circular means by `atan2`,
/// subtracted and wrapped into `(-π, π]`.
pub fn brute_even_odd(phases: &[f64]) -> f64 {
    let mean = |pick: usize| {
        let (mut s, mut c) = (0.0, 0.0);
        for (i, th) in phases.iter().enumerate() {
            if i % 2 == pick {
                s += th.sin();
                c += th.cos();
            }
        }
        s.atan2(c)
    };
    let mut d = mean(0) - mean(1);
    while d > PI {
        d -= TAU;
    }
    while d <= -PI {
        d += TAU;
    }
    d
}

/// Circular distance between two angles.
pub fn circ_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

/// Samples of a planar limit cycle embedded in 5 channels. The point moves
/// along the curve at angle `alpha(ωt)`; the true phase is `ωt`.
pub fn synthetic_cycle(
    omega: f64,
    n: usize,
    dt: f64,
    shape: impl Fn(f64) -> (f64, f64),
    alpha: impl Fn(f64) -> f64,
) -> (Vec<f64>, DMatrix<f64>, Vec<f64>) {
    let t: Vec<f64> = (0..n).map(|i| i as f64 * dt).collect();
    let truth: Vec<f64> = t.iter().map(|ti| omega * ti).collect();
    let mix = [[1.0, 0.0], [0.0, 1.0], [0.6, 0.8], [-0.3, 0.5], [0.2, -0.9]];
    let x = DMatrix::from_fn(n, mix.len(), |i, c| {
        let (u, v) = shape(alpha(truth[i]));
        mix[c][0] * u + mix[c][1] * v + 0.1 * c as f64
    });
    (t, x, truth)
}

/// RMS of the estimate against the truth after removing the best constant
/// offset on the circle.
pub fn phase_rms(estimate: &[f64], truth: &[f64]) -> f64 {
    let (s, c) = estimate
        .iter()
        .zip(truth)
        .fold((0.0, 0.0), |(s, c), (e, t)| {
            (s + (e - t).sin(), c + (e - t).cos())
        });
    let offset = s.atan2(c);
    let sq: f64 = estimate
        .iter()
        .zip(truth)
        .map(|(e, t)| circ_dist(e - t, offset).powi(2))
        .sum();
    (sq / estimate.len() as f64).sqrt()
}

/// A random elongated chain of segment positions with near-vertical z axes.
pub fn random_chain<R: Rng>(rng: &mut R) -> (Vec<Vector3<f64>>, Vec<Vector3<f64>>) {
    let n = rng.random_range(3..12);
    let heading = rng.random_range(-PI..PI);
    let climb: f64 = rng.random_range(-0.4..0.4);
    let dir = Vector3::new(
        heading.cos() * climb.cos(),
        heading.sin() * climb.cos(),
        climb.sin(),
    );
    let base = Vector3::new(
        rng.random_range(-5.0..5.0),
        rng.random_range(-5.0..5.0),
        rng.random_range(0.0..1.0),
    );
    let positions = (0..n)
        .map(|k| {
            let jitter = Vector3::new(
                rng.random_range(-0.03..0.03),
                rng.random_range(-0.03..0.03),
                rng.random_range(-0.03..0.03),
            );
            base - dir * (0.2 * k as f64) + jitter
        })
        .collect();
    let z_axes = (0..n)
        .map(|_| {
            let tilt = UnitQuaternion::from_euler_angles(
                rng.random_range(-0.3..0.3),
                rng.random_range(-0.3..0.3),
                rng.random_range(-PI..PI),
            );
            tilt * Vector3::z()
        })
        .collect();
    (positions, z_axes)
}

pub fn random_rotation<R: Rng>(rng: &mut R) -> UnitQuaternion<f64> {
    let axis = Vector3::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    );
    let axis = if axis.norm() < 1e-3 {
        Vector3::z()
    } else {
        axis
    };
    UnitQuaternion::from_scaled_axis(axis.normalize() * rng.random_range(-PI..PI))
}

/// Staircase level by enumerating treads: `(start, end]` going up,
/// `[start, end)` coming down.
pub fn stairs_oracle(x: f64, n_up: u32, n_down: u32, length: f64, height: f64) -> f64 {
    let top = n_up as f64 * length;
    for k in 1..=n_up {
        let (a, b) = ((k - 1) as f64 * length, k as f64 * length);
        if x > a && x <= b {
            return k as f64 * height;
        }
    }
    for j in 1..=n_down {
        let (a, b) = (top + (j - 1) as f64 * length, top + j as f64 * length);
        if x >= a && x < b {
            return (n_up as f64 - j as f64 + 1.0) * height;
        }
    }
    if x >= top + n_down as f64 * length {
        return (n_up as f64 - n_down as f64) * height;
    }
    0.0
}

/// Hill height as three quadratic pieces with curvature `tan(max_slope) / (2 e)`.
pub fn hill_oracle(x: f64, max_slope: f64, e: f64) -> f64 {
    let s = max_slope.tan();
    let a = s / (2.0 * e);
    match x {
        x if x <= 0.0 || x >= 4.0 * e => 0.0,
        x if x <= e => a * x * x,
        x if x <= 3.0 * e => {
            let u = x - e;
            a * e * e + s * u - a * u * u
        }
        x => {
            let u = 4.0 * e - x;
            a * u * u
        }
    }
}
