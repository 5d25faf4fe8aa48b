//! Phase of a synthetic limit cycle that lingers near one point, as a leg
//! does while standing, compared with the known phase.

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use polyped::analysis::PhaseModel;

fn main() -> polyped::Result<()> {
    let omega = TAU / 1.5;
    let dt = 0.005;
    let t: Vec<f64> = (0..1800).map(|i| i as f64 * dt).collect();
    // the point slows down near p = 0
    let warp = |p: f64| p - 0.6 * p.sin();
    let x = DMatrix::from_fn(t.len(), 3, |i, c| {
        let a = warp(omega * t[i]);
        match c {
            0 => 3.0 * a.cos(),
            1 => a.sin(),
            _ => 0.5 * a.cos() + 0.2 * a.sin(),
        }
    });

    let model = PhaseModel::fit(&[(&t, &x)])?;
    let phase = model.phase(&x)?;
    let offset = phase[0];
    let rms = (t
        .iter()
        .zip(&phase)
        .map(|(ti, p)| (p - offset - omega * ti).powi(2))
        .sum::<f64>()
        / t.len() as f64)
        .sqrt();
    let raw_rms = (t
        .iter()
        .map(|ti| (warp(omega * ti) - omega * ti).powi(2))
        .sum::<f64>()
        / t.len() as f64)
        .sqrt();
    println!("plane angle vs true phase: RMS {raw_rms:.3} rad");
    println!("corrected phase vs true phase: RMS {rms:.4} rad");
    Ok(())
}
