//! Experiment environments as 2.5-D heightfields.
//!
//! Terrain varies along world x only, except `Rough`, which is a sampled
//! Gaussian random field with bilinear interpolation.

use std::io::{BufRead, Write};

use nalgebra::Vector2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn default_seed() -> u64 {
    7
}
fn default_z_scale() -> f64 {
    0.3
}
fn default_z_multiplier() -> f64 {
    0.1
}
fn default_length_scale() -> f64 {
    0.2
}
fn default_rough_extent() -> [f64; 4] {
    [-3.0, 9.0, -4.0, 4.0]
}
fn default_resolution() -> f64 {
    0.05
}
fn default_max_slope() -> f64 {
    13.3f64.to_radians()
}
fn default_hill_extent() -> f64 {
    1.0
}
fn default_steps() -> u32 {
    10
}
fn default_step_length() -> f64 {
    0.2
}
fn default_step_height() -> f64 {
    0.04
}

/// Declarative description of an environment.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TerrainSpec {
    /// No ground and no gravity.
    Floating,
    #[default]
    Flat,
    Rough {
        #[serde(default = "default_seed")]
        seed: u64,
        /// Raw z-scale; the field's standard deviation is
        /// `z_scale * z_multiplier` metres.
        #[serde(default = "default_z_scale")]
        z_scale: f64,
        #[serde(default = "default_z_multiplier")]
        z_multiplier: f64,
        /// Correlation length of the squared-exponential kernel.
        #[serde(default = "default_length_scale")]
        length_scale: f64,
        /// `[x_min, x_max, y_min, y_max]`; queries outside are clamped.
        #[serde(default = "default_rough_extent")]
        extent: [f64; 4],
        #[serde(default = "default_resolution")]
        resolution: f64,
    },
    /// Smooth bump of quadratic pieces; slope climbs from 0 to `max_slope`
    /// over `extent` metres, swings to `-max_slope`, and returns to 0.
    Hill {
        #[serde(default = "default_max_slope")]
        max_slope: f64,
        #[serde(default = "default_hill_extent")]
        extent: f64,
    },
    /// Straight staircase starting at x = 0.
    Stairs {
        #[serde(default = "default_steps")]
        n_up: u32,
        #[serde(default = "default_steps")]
        n_down: u32,
        #[serde(default = "default_step_length")]
        step_length: f64,
        #[serde(default = "default_step_height")]
        step_height: f64,
    },
}

impl TerrainSpec {
    pub fn rough(seed: u64) -> Self {
        TerrainSpec::Rough {
            seed,
            z_scale: default_z_scale(),
            z_multiplier: default_z_multiplier(),
            length_scale: default_length_scale(),
            extent: default_rough_extent(),
            resolution: default_resolution(),
        }
    }

    pub fn hill() -> Self {
        TerrainSpec::Hill {
            max_slope: default_max_slope(),
            extent: default_hill_extent(),
        }
    }

    pub fn stairs() -> Self {
        TerrainSpec::Stairs {
            n_up: default_steps(),
            n_down: default_steps(),
            step_length: default_step_length(),
            step_height: default_step_height(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TerrainSpec::Floating => "floating",
            TerrainSpec::Flat => "flat",
            TerrainSpec::Rough { .. } => "rough",
            TerrainSpec::Hill { .. } => "hill",
            TerrainSpec::Stairs { .. } => "stairs",
        }
    }

    pub fn is_floating(&self) -> bool {
        matches!(self, TerrainSpec::Floating)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            TerrainSpec::Floating | TerrainSpec::Flat => Ok(()),
            TerrainSpec::Rough {
                z_scale,
                z_multiplier,
                length_scale,
                extent,
                resolution,
                ..
            } => validate_rough(z_scale * z_multiplier, length_scale, extent, resolution),
            TerrainSpec::Hill { max_slope, extent } => {
                if !(max_slope > 0.0 && max_slope < std::f64::consts::FRAC_PI_2) {
                    return Err(Error::config("terrain.max_slope", "must lie in (0, π/2)"));
                }
                if !(extent > 0.0 && extent.is_finite()) {
                    return Err(Error::config("terrain.extent", "must be > 0"));
                }
                Ok(())
            }
            TerrainSpec::Stairs {
                step_length,
                step_height,
                ..
            } => {
                if !(step_length > 0.0 && step_length.is_finite()) {
                    return Err(Error::config("terrain.step_length", "must be > 0"));
                }
                if !(step_height > 0.0 && step_height.is_finite()) {
                    return Err(Error::config("terrain.step_height", "must be > 0"));
                }
                Ok(())
            }
        }
    }

    /// Validates and materializes the terrain (sampling the rough field).
    pub fn build(&self) -> Result<Terrain> {
        self.validate()?;
        Ok(match *self {
            TerrainSpec::Floating => Terrain::Floating,
            TerrainSpec::Flat => Terrain::Flat,
            TerrainSpec::Rough {
                seed,
                z_scale,
                z_multiplier,
                length_scale,
                extent,
                resolution,
            } => Terrain::Rough(generate_rough(
                seed,
                z_scale * z_multiplier,
                length_scale,
                extent,
                resolution,
            )?),
            TerrainSpec::Hill { max_slope, extent } => Terrain::Hill(Hill::new(max_slope, extent)),
            TerrainSpec::Stairs {
                n_up,
                n_down,
                step_length,
                step_height,
            } => Terrain::Stairs(Stairs {
                n_up,
                n_down,
                step_length,
                step_height,
            }),
        })
    }
}

fn validate_rough(z_std: f64, length_scale: f64, extent: [f64; 4], resolution: f64) -> Result<()> {
    if !(z_std >= 0.0 && z_std.is_finite()) {
        return Err(Error::config("terrain.z_scale", "must be ≥ 0"));
    }
    if !(length_scale > 0.0 && length_scale.is_finite()) {
        return Err(Error::config("terrain.length_scale", "must be > 0"));
    }
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(Error::config("terrain.resolution", "must be > 0"));
    }
    if resolution > length_scale / 4.0 {
        return Err(Error::config(
            "terrain.resolution",
            "must be ≤ length_scale / 4 to resolve the field",
        ));
    }
    if !(extent[1] > extent[0] && extent[3] > extent[2]) {
        return Err(Error::config(
            "terrain.extent",
            "must be [x_min, x_max, y_min, y_max] with min < max",
        ));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hill {
    pub slope: f64,
    pub extent: f64,
    curvature: f64,
}

impl Hill {
    pub fn new(max_slope: f64, extent: f64) -> Self {
        let slope = max_slope.tan();
        Self {
            slope,
            extent,
            curvature: slope / (2.0 * extent),
        }
    }

    pub fn height(&self, x: f64) -> f64 {
        let (e, a, s) = (self.extent, self.curvature, self.slope);
        if x <= 0.0 || x >= 4.0 * e {
            0.0
        } else if x <= e {
            a * x * x
        } else if x <= 3.0 * e {
            let u = x - e;
            a * e * e + s * u - a * u * u
        } else {
            let u = 4.0 * e - x;
            a * u * u
        }
    }

    pub fn slope_at(&self, x: f64) -> f64 {
        let (e, a, s) = (self.extent, self.curvature, self.slope);
        if x <= 0.0 || x >= 4.0 * e {
            0.0
        } else if x <= e {
            2.0 * a * x
        } else if x <= 3.0 * e {
            s - 2.0 * a * (x - e)
        } else {
            -2.0 * a * (4.0 * e - x)
        }
    }

    pub fn peak(&self) -> f64 {
        self.slope * self.extent
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stairs {
    pub n_up: u32,
    pub n_down: u32,
    pub step_length: f64,
    pub step_height: f64,
}

impl Stairs {
    pub fn height(&self, x: f64) -> f64 {
        let top_x = self.n_up as f64 * self.step_length;
        let end_x = top_x + self.n_down as f64 * self.step_length;
        let steps = if x <= 0.0 {
            0.0
        } else if x <= top_x {
            (x / self.step_length).ceil()
        } else if x < end_x {
            self.n_up as f64 - self.n_down as f64 + ((end_x - x) / self.step_length).ceil()
        } else {
            self.n_up as f64 - self.n_down as f64
        };
        steps * self.step_height
    }

    pub fn ascent(&self) -> f64 {
        self.n_up as f64 * self.step_height
    }
}

/// A regular grid of heights with bilinear interpolation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Heightfield {
    pub origin: [f64; 2],
    pub resolution: f64,
    pub nx: usize,
    pub ny: usize,
    /// Row-major, `heights[iy * nx + ix]`.
    pub heights: Vec<f64>,
    pub seed: u64,
    pub z_std: f64,
    pub length_scale: f64,
}

impl Heightfield {
    pub fn at_index(&self, ix: usize, iy: usize) -> f64 {
        self.heights[iy * self.nx + ix]
    }

    pub fn height(&self, x: f64, y: f64) -> f64 {
        let fx = ((x - self.origin[0]) / self.resolution).clamp(0.0, (self.nx - 1) as f64);
        let fy = ((y - self.origin[1]) / self.resolution).clamp(0.0, (self.ny - 1) as f64);
        let ix = (fx.floor() as usize).min(self.nx.saturating_sub(2));
        let iy = (fy.floor() as usize).min(self.ny.saturating_sub(2));
        let (tx, ty) = (fx - ix as f64, fy - iy as f64);
        let ix1 = (ix + 1).min(self.nx - 1);
        let iy1 = (iy + 1).min(self.ny - 1);
        let h00 = self.at_index(ix, iy);
        let h10 = self.at_index(ix1, iy);
        let h01 = self.at_index(ix, iy1);
        let h11 = self.at_index(ix1, iy1);
        (1.0 - ty) * ((1.0 - tx) * h00 + tx * h10) + ty * ((1.0 - tx) * h01 + tx * h11)
    }

    /// Writes the portable grid format: a version comment, a header row
    /// `origin_x,origin_y,resolution,nx,ny`, then one row of `nx` heights per
    /// grid row.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(
            out,
            "# polyped heightfield v1 seed={} z_std={} length_scale={}",
            self.seed, self.z_std, self.length_scale
        )?;
        writeln!(out, "origin_x,origin_y,resolution,nx,ny")?;
        writeln!(
            out,
            "{},{},{},{},{}",
            self.origin[0], self.origin[1], self.resolution, self.nx, self.ny
        )?;
        for row in self.heights.chunks(self.nx) {
            let line: Vec<String> = row.iter().map(|h| h.to_string()).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let bad = |why: &str| Error::config("heightfield", why.to_string());
        let mut lines = input.lines();
        let mut next = || -> Result<String> {
            lines
                .next()
                .ok_or_else(|| bad("truncated file"))?
                .map_err(|e| Error::io("heightfield", e))
        };
        let comment = next()?;
        let meta = |key: &str| -> Option<String> {
            comment
                .split_whitespace()
                .find_map(|kv| kv.strip_prefix(key).map(str::to_string))
        };
        let seed = meta("seed=").and_then(|s| s.parse().ok()).unwrap_or(0);
        let z_std = meta("z_std=")
            .and_then(|s| s.parse().ok())
            .unwrap_or(f64::NAN);
        let length_scale = meta("length_scale=")
            .and_then(|s| s.parse().ok())
            .unwrap_or(f64::NAN);
        let _header = next()?;
        let dims = next()?;
        let f: Vec<&str> = dims.split(',').collect();
        if f.len() != 5 {
            return Err(bad("dims row needs 5 fields"));
        }
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad("bad number"));
        let int = |s: &str| s.trim().parse::<usize>().map_err(|_| bad("bad integer"));
        let (ox, oy, res, nx, ny) = (num(f[0])?, num(f[1])?, num(f[2])?, int(f[3])?, int(f[4])?);
        let mut heights = Vec::with_capacity(nx * ny);
        for _ in 0..ny {
            let row = next()?;
            for v in row.split(',') {
                heights.push(num(v)?);
            }
        }
        if heights.len() != nx * ny {
            return Err(bad("row lengths do not match nx"));
        }
        Ok(Self {
            origin: [ox, oy],
            resolution: res,
            nx,
            ny,
            heights,
            seed,
            z_std,
            length_scale,
        })
    }
}

fn fft2(data: &mut [Complex<f64>], nx: usize, ny: usize, planner: &mut FftPlanner<f64>) {
    let row = planner.plan_fft_forward(nx);
    for chunk in data.chunks_mut(nx) {
        row.process(chunk);
    }
    let col = planner.plan_fft_forward(ny);
    let mut buf = vec![Complex::new(0.0, 0.0); ny];
    for ix in 0..nx {
        for iy in 0..ny {
            buf[iy] = data[iy * nx + ix];
        }
        col.process(&mut buf);
        for iy in 0..ny {
            data[iy * nx + ix] = buf[iy];
        }
    }
}

/// Samples a zero-mean stationary Gaussian random field with a
/// squared-exponential kernel by circulant embedding.
///
/// The field is synthesized on a periodic grid padded by four correlation
/// lengths on each axis, then cropped to `extent`, so opposite edges are
/// uncorrelated. The result depends only on the arguments.
pub fn generate_rough(
    seed: u64,
    z_std: f64,
    length_scale: f64,
    extent: [f64; 4],
    resolution: f64,
) -> Result<Heightfield> {
    validate_rough(z_std, length_scale, extent, resolution)?;
    let nx = ((extent[1] - extent[0]) / resolution).ceil() as usize + 1;
    let ny = ((extent[3] - extent[2]) / resolution).ceil() as usize + 1;
    let mut field = Heightfield {
        origin: [extent[0], extent[2]],
        resolution,
        nx,
        ny,
        heights: vec![0.0; nx * ny],
        seed,
        z_std,
        length_scale,
    };
    if z_std == 0.0 {
        return Ok(field);
    }
    let pad = (4.0 * length_scale / resolution).ceil() as usize;
    let (px, py) = (nx + pad, ny + pad);
    let total = (px * py) as f64;
    let mut planner = FftPlanner::new();

    let wrap = |i: usize, n: usize| i.min(n - i) as f64 * resolution;
    let inv = 1.0 / (2.0 * length_scale * length_scale);
    let mut spectrum: Vec<Complex<f64>> = (0..px * py)
        .map(|k| {
            let (ix, iy) = (k % px, k / px);
            let (dx, dy) = (wrap(ix, px), wrap(iy, py));
            Complex::new(z_std * z_std * (-(dx * dx + dy * dy) * inv).exp(), 0.0)
        })
        .collect();
    fft2(&mut spectrum, px, py, &mut planner);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noise: Vec<Complex<f64>> = spectrum
        .iter()
        .map(|lambda| {
            let amp = (lambda.re.max(0.0) / total).sqrt();
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex::new(amp * re, amp * im)
        })
        .collect();
    fft2(&mut noise, px, py, &mut planner);

    for iy in 0..ny {
        for ix in 0..nx {
            field.heights[iy * nx + ix] = noise[iy * px + ix].re;
        }
    }
    Ok(field)
}

/// Materialized environment, queried by the simulator.
#[derive(Clone, Debug)]
pub enum Terrain {
    Floating,
    Flat,
    Rough(Heightfield),
    Hill(Hill),
    Stairs(Stairs),
}

impl Terrain {
    /// Ground height under `(x, y)`; `None` when there is no ground.
    pub fn height_at(&self, x: f64, y: f64) -> Option<f64> {
        match self {
            Terrain::Floating => None,
            Terrain::Flat => Some(0.0),
            Terrain::Rough(field) => Some(field.height(x, y)),
            Terrain::Hill(h) => Some(h.height(x)),
            Terrain::Stairs(s) => Some(s.height(x)),
        }
    }

    pub fn height_at_point(&self, p: Vector2<f64>) -> Option<f64> {
        self.height_at(p.x, p.y)
    }

    pub fn is_floating(&self) -> bool {
        matches!(self, Terrain::Floating)
    }
}
