//! The virtual body frame of a bent, tilted chain and the posture read off
//! it.

use nalgebra::{UnitQuaternion, Vector3};
use polyped::kinematics::{posture_metrics, virtual_body_frame};

fn main() -> polyped::Result<()> {
    let positions: Vec<Vector3<f64>> = (0..5)
        .map(|k| {
            let x = -0.2 * k as f64;
            Vector3::new(x, 0.02 * (k as f64 * 1.3).sin(), 0.1 - 0.1 * x)
        })
        .collect();
    let tilt = UnitQuaternion::from_euler_angles(0.1, 0.0, 0.0);
    let z_axes = vec![tilt * Vector3::z(); positions.len()];

    let frame = virtual_body_frame(&positions, &z_axes, None)?;
    println!("origin  {:.3?}", frame.origin.as_slice());
    println!("forward {:.3?}", frame.x.as_slice());
    println!("lateral {:.3?}", frame.y.as_slice());
    println!("up      {:.3?}", frame.z.as_slice());

    let posture = posture_metrics(&frame, Some(0.0));
    println!("{posture:.3?}");
    Ok(())
}
