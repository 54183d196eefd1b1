//! Reproducible families of initial data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WaveError};
use crate::grid::{sobolev_norm, CauchyData, Grid3, ScalarField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DataFamily {
    /// `u = amplitude exp(-|x|^2 / (2 sigma^2))`, zero velocity.
    Gaussian { sigma: f64, amplitude: f64 },
    /// Random band-limited fields times a compact polynomial cutoff.
    RandomBump { radius: f64, power: u32, k_max: f64, modes: usize },
    /// Cutoff in the velocity slot only.
    VelocityBump { radius: f64, power: u32 },
    /// Cutoff in the position slot only.
    PositionBump { radius: f64, power: u32 },
}

impl Default for DataFamily {
    fn default() -> Self {
        DataFamily::RandomBump { radius: 2.0, power: 8, k_max: 1.5, modes: 6 }
    }
}

/// `(1 - r^2/R^2)^p` inside the ball of radius `R`, exactly zero outside.
pub fn bump(radius: f64, power: u32) -> impl Fn([f64; 3]) -> f64 {
    move |x| {
        let s = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / (radius * radius);
        if s < 1.0 {
            (1.0 - s).powi(power as i32)
        } else {
            0.0
        }
    }
}

/// Data energy norm `‖f‖_{L²} + ‖g‖_{Ḣ¹}`.
pub fn data_norm(data: &CauchyData) -> f64 {
    data.ut.l2_norm() + sobolev_norm(&data.u, 1.0).value
}

#[derive(Debug, Clone, Copy)]
struct Wave {
    k: [f64; 3],
    phase: f64,
    amp: f64,
}

fn random_waves(rng: &mut ChaCha8Rng, k_max: f64, modes: usize) -> Vec<Wave> {
    (0..modes)
        .map(|_| {
            let z: f64 = rng.random_range(-1.0..1.0);
            let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let mag: f64 = k_max * rng.random_range(0.0f64..1.0).cbrt();
            let rho = (1.0 - z * z).sqrt();
            Wave {
                k: [mag * rho * phi.cos(), mag * rho * phi.sin(), mag * z],
                phase: rng.random_range(0.0..std::f64::consts::TAU),
                amp: rng.random_range(-1.0..1.0),
            }
        })
        .collect()
}

fn eval_waves(waves: &[Wave], x: [f64; 3]) -> f64 {
    waves
        .iter()
        .map(|w| w.amp * (w.k[0] * x[0] + w.k[1] * x[1] + w.k[2] * x[2] + w.phase).cos())
        .sum()
}

/// One member of a family; `index` selects an independent stream per seed.
pub fn member(grid: Grid3, family: DataFamily, seed: u64, index: usize) -> Result<CauchyData> {
    match family {
        DataFamily::Gaussian { sigma, amplitude } => {
            if !(sigma > 0.0) {
                return Err(WaveError::config("gaussian width must be positive"));
            }
            let u = ScalarField::from_fn(grid, |x| {
                amplitude * (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / (2.0 * sigma * sigma)).exp()
            });
            let r = sigma * (2.0 * 40.0f64).sqrt();
            let data = CauchyData::new(u, ScalarField::zeros(grid))?;
            Ok(data.with_support(r))
        }
        DataFamily::RandomBump { radius, power, k_max, modes } => {
            check_radius(&grid, radius)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ index as u64);
            let wg = random_waves(&mut rng, k_max, modes.max(1));
            let wf = random_waves(&mut rng, k_max, modes.max(1));
            let cut = bump(radius, power);
            let u = ScalarField::from_fn(grid, |x| eval_waves(&wg, x) * cut(x));
            let ut = ScalarField::from_fn(grid, |x| eval_waves(&wf, x) * cut(x));
            Ok(CauchyData::new(u, ut)?.with_support(radius))
        }
        DataFamily::VelocityBump { radius, power } => {
            check_radius(&grid, radius)?;
            let ut = ScalarField::from_fn(grid, bump(radius, power));
            Ok(CauchyData::new(ScalarField::zeros(grid), ut)?.with_support(radius))
        }
        DataFamily::PositionBump { radius, power } => {
            check_radius(&grid, radius)?;
            let u = ScalarField::from_fn(grid, bump(radius, power));
            Ok(CauchyData::new(u, ScalarField::zeros(grid))?.with_support(radius))
        }
    }
}

fn check_radius(grid: &Grid3, radius: f64) -> Result<()> {
    if !(radius > 0.0 && radius < grid.half_length()) {
        return Err(WaveError::config(format!(
            "support radius {radius} must lie in (0, L/2 = {})",
            grid.half_length()
        )));
    }
    Ok(())
}

/// `n` members for a seed.
pub fn ensemble(grid: Grid3, family: DataFamily, n: usize, seed: u64) -> Result<Vec<CauchyData>> {
    if n == 0 {
        return Err(WaveError::config("ensemble size must be at least 1"));
    }
    (0..n).map(|i| member(grid, family, seed, i)).collect()
}
