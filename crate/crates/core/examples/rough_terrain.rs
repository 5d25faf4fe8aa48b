//! A Gaussian random field and its measured roughness.
//!
//! Pass a path to also write the grid as CSV.

use polyped::terrain::generate_rough;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (z_std, length) = (0.03, 0.2);
    let field = generate_rough(11, z_std, length, [-2.0, 8.0, -2.0, 2.0], 0.02)?;

    let n = field.heights.len() as f64;
    let mean = field.heights.iter().sum::<f64>() / n;
    let std = (field
        .heights
        .iter()
        .map(|h| (h - mean).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    println!(
        "{} x {} grid, std {std:.4} m (target {z_std})",
        field.nx, field.ny
    );

    let lag = (length / field.resolution).round() as usize;
    let (mut num, mut count) = (0.0, 0);
    for iy in 0..field.ny {
        for ix in 0..field.nx - lag {
            num += (field.at_index(ix, iy) - mean) * (field.at_index(ix + lag, iy) - mean);
            count += 1;
        }
    }
    let rho = num / count as f64 / (std * std);
    println!(
        "autocorrelation at {length} m: {rho:.3} (kernel {:.3})",
        (-0.5f64).exp()
    );
    println!("height at (1.0, 0.5): {:.4} m", field.height(1.0, 0.5));

    if let Some(path) = std::env::args().nth(1) {
        let file = std::fs::File::create(&path)?;
        field.write_csv(std::io::BufWriter::new(file))?;
        println!("wrote {path}");
    }
    Ok(())
}
