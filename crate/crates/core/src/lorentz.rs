//! Lorentz boosts along `x1`: coordinates, resampled histories and energies
//! on slanted slices `t = v x1`.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Result, WaveError};
use crate::fft;
use crate::grid::{Grid3, ScalarField};
use crate::history::{History, PlaneSample, SpaceTimeField};
use crate::norms::{EstimateReport, RatioSample};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoostParams {
    pub mu: f64,
    pub gamma: f64,
}

impl BoostParams {
    pub fn new(mu: f64) -> Result<Self> {
        if !(mu.abs() < 1.0) {
            return Err(WaveError::domain(format!("boost speed must satisfy |mu| < 1, got {mu}")));
        }
        Ok(BoostParams { mu, gamma: 1.0 / (1.0 - mu * mu).sqrt() })
    }

    pub fn identity() -> Self {
        BoostParams { mu: 0.0, gamma: 1.0 }
    }

    /// `(x', t')` of a lab point.
    pub fn forward(&self, x: [f64; 3], t: f64) -> ([f64; 3], f64) {
        let (g, m) = (self.gamma, self.mu);
        ([g * (x[0] - m * t), x[1], x[2]], g * (t - m * x[0]))
    }

    /// Lab `(x, t)` of a boosted point.
    pub fn inverse(&self, xp: [f64; 3], tp: f64) -> ([f64; 3], f64) {
        let (g, m) = (self.gamma, self.mu);
        ([g * (xp[0] + m * tp), xp[1], xp[2]], g * (tp + m * xp[0]))
    }
}

pub fn boost_coords(params: &BoostParams, x: [f64; 3], t: f64) -> ([f64; 3], f64) {
    params.forward(x, t)
}

pub fn inverse_boost_coords(params: &BoostParams, xp: [f64; 3], tp: f64) -> ([f64; 3], f64) {
    params.inverse(xp, tp)
}

/// Boosted times `t_start + n dt` for `n < count`, sampled on the grid planes
/// with `|x1'| <= x1_half_width`; planes outside are set to zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoostWindow {
    pub t_start: f64,
    pub dt: f64,
    pub count: usize,
    pub x1_half_width: f64,
}

impl BoostWindow {
    /// Widest window whose lab preimage stays inside the box without wrapping.
    pub fn widest(grid: &Grid3, params: &BoostParams, t_start: f64, dt: f64, count: usize) -> Self {
        let t_end = t_start + dt * count.saturating_sub(1) as f64;
        let tmax = t_start.abs().max(t_end.abs());
        let width = (grid.half_length() / params.gamma - params.mu.abs() * tmax).max(0.0);
        BoostWindow { t_start, dt, count, x1_half_width: width }
    }

    pub fn time(&self, n: usize) -> f64 {
        self.t_start + n as f64 * self.dt
    }

    /// Lab time interval needed by the window.
    pub fn lab_time_range(&self, params: &BoostParams) -> (f64, f64) {
        let t_end = self.time(self.count.saturating_sub(1));
        let spread = params.mu.abs() * self.x1_half_width;
        (params.gamma * (self.t_start - spread), params.gamma * (t_end + spread))
    }
}

/// Index range of grid planes with `|x1| <= width`.
fn plane_range(grid: &Grid3, width: f64) -> (usize, usize) {
    let tol = 1e-12 * grid.length();
    let lo = (0..grid.n()).find(|&j| grid.coord(j) >= -width - tol).unwrap_or(grid.n());
    let hi = (0..grid.n()).rev().find(|&j| grid.coord(j) <= width + tol).map_or(0, |j| j + 1);
    (lo, hi.max(lo))
}

/// `u_L(x', t') = u(γ(x1' + μt'), x2, x3, γ(t' + μx1'))` with
/// `∂_{t'} u_L = γ(u_t + μ ∂_1 u)`, on the original spatial grid.
pub fn boost_field(history: &dyn History, params: &BoostParams, window: &BoostWindow) -> Result<SpaceTimeField> {
    let grid = history.grid();
    if window.count == 0 || !(window.dt > 0.0) {
        return Err(WaveError::config("boost window needs a positive step and at least one time"));
    }
    let (g, m) = (params.gamma, params.mu);
    let half = grid.half_length();
    let extent = g * (window.x1_half_width + m.abs() * window.t_start.abs().max(window.time(window.count - 1).abs()));
    if extent > half * (1.0 + 1e-12) {
        return Err(WaveError::domain(format!(
            "boosted window reaches lab |x1| = {extent:.4}, beyond the box half-width {half}"
        )));
    }
    let (a, b) = window.lab_time_range(params);
    let (h0, h1) = history.time_range();
    let tol = 1e-9 * (1.0 + a.abs().max(b.abs()));
    if a < h0 - tol || b > h1 + tol {
        return Err(WaveError::domain(format!(
            "boosted window needs lab times [{a:.4}, {b:.4}] but the history covers [{h0}, {h1}]"
        )));
    }
    let (lo, hi) = plane_range(&grid, window.x1_half_width);
    let nn = grid.n() * grid.n();
    let h = grid.spacing();
    let mut out = SpaceTimeField::new(grid, window.t_start, window.dt, true)?;
    for step in 0..window.count {
        let tp = window.time(step);
        let mut u = ScalarField::zeros(grid);
        let mut ut = ScalarField::zeros(grid);
        if hi > lo {
            let x1p = grid.coord(lo);
            let planes = history.plane_sweep(g * (x1p + m * tp), g * h, g * (tp + m * x1p), g * m * h, hi - lo)?;
            for (p, plane) in planes.iter().enumerate() {
                let base = (lo + p) * nn;
                u.data[base..base + nn].copy_from_slice(&plane.u);
                for q in 0..nn {
                    ut.data[base + q] = g * (plane.ut[q] + m * plane.ux1[q]);
                }
            }
        }
        out.push(u, Some(ut))?;
    }
    Ok(out)
}

/// `∫ |∇u|^2 + |u_t|^2` of one plane, per unit `x1` length.
fn plane_energy(grid: &Grid3, plane: &PlaneSample) -> f64 {
    let n = grid.n();
    let nn = n * n;
    let mut hat: Vec<Complex64> = plane.u.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft::forward_2d(&mut hat, n);
    let mut d2 = hat.clone();
    let mut d3 = hat;
    let i = Complex64::new(0.0, 1.0);
    for a in 0..n {
        for b in 0..n {
            let idx = a * n + b;
            d2[idx] *= i * grid.derivative_wavenumber(a);
            d3[idx] *= i * grid.derivative_wavenumber(b);
        }
    }
    // Both derivatives are real, so one transform of d2 + i d3 recovers them.
    let mut combo: Vec<Complex64> = d2.iter().zip(d3.iter()).map(|(x, y)| x + i * y).collect();
    fft::inverse_2d(&mut combo, n);
    let h2 = grid.spacing() * grid.spacing();
    let mut acc = 0.0;
    for q in 0..nn {
        acc += plane.ux1[q].powi(2) + combo[q].re.powi(2) + combo[q].im.powi(2) + plane.ut[q].powi(2);
    }
    acc * h2
}

/// Planes per grid spacing on a slanted slice. Along `t = v x1` a mode of
/// wavenumber `k` oscillates at up to `(1 + |v|) k` in `x1`, so the energy
/// density reaches `2 (1 + |v|)` times the Nyquist wavenumber.
pub const SLANT_OVERSAMPLE: usize = 2;

/// Energy sampled on the slice `t = v x1` over planes with `|x1| <= x1_half_width`.
pub fn slanted_energy(history: &dyn History, v: f64, x1_half_width: Option<f64>) -> Result<f64> {
    if !(v.abs() < 1.0) {
        return Err(WaveError::domain(format!("slice slope must satisfy |v| < 1, got {v}")));
    }
    let grid = history.grid();
    let width = x1_half_width.unwrap_or(grid.half_length());
    let (lo, hi) = plane_range(&grid, width);
    if hi == lo {
        return Ok(0.0);
    }
    let h = grid.spacing();
    let count = SLANT_OVERSAMPLE * (hi - lo);
    let dx = h / SLANT_OVERSAMPLE as f64;
    let x_lo = grid.coord(lo);
    let x_hi = x_lo + (count - 1) as f64 * dx;
    let (t0, t1) = history.time_range();
    let (ta, tb) = if v >= 0.0 { (v * x_lo, v * x_hi) } else { (v * x_hi, v * x_lo) };
    let tol = 1e-9 * (1.0 + ta.abs().max(tb.abs()));
    if ta < t0 - tol || tb > t1 + tol {
        return Err(WaveError::domain(format!(
            "slanted slice needs times [{ta:.4}, {tb:.4}] but the history covers [{t0}, {t1}]"
        )));
    }
    let planes = history.plane_sweep(x_lo, dx, v * x_lo, v * dx, count)?;
    Ok(planes.iter().map(|p| plane_energy(&grid, p)).sum::<f64>() * dx)
}

/// Flat-slice energy at `t` over the same plane window as [`slanted_energy`].
pub fn flat_energy(history: &dyn History, t: f64, x1_half_width: Option<f64>) -> Result<f64> {
    let grid = history.grid();
    let width = x1_half_width.unwrap_or(grid.half_length());
    let (lo, hi) = plane_range(&grid, width);
    if hi == lo {
        return Ok(0.0);
    }
    let count = SLANT_OVERSAMPLE * (hi - lo);
    let dx = grid.spacing() / SLANT_OVERSAMPLE as f64;
    let planes = history.plane_sweep(grid.coord(lo), dx, t, 0.0, count)?;
    Ok(planes.iter().map(|p| plane_energy(&grid, p)).sum::<f64>() * dx)
}

/// One slice slope of an energy-comparability study.
#[derive(Debug, Clone, Serialize)]
pub struct ComparabilityRow {
    pub v: f64,
    /// Smallest `C` with every ratio in `[1/C, C]`.
    pub constant: f64,
    pub report: EstimateReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparabilityReport {
    pub rows: Vec<ComparabilityRow>,
    /// Constants increase with `|v|` across the rows.
    pub increasing_in_v: bool,
}

/// Slanted over flat energies for each history and slope.
pub fn energy_comparability_report(histories: &[&dyn History], v_list: &[f64]) -> Result<ComparabilityReport> {
    let mut rows = Vec::with_capacity(v_list.len());
    let flats: Vec<f64> = histories.iter().map(|h| flat_energy(*h, 0.0, None)).collect::<Result<_>>()?;
    for &v in v_list {
        let mut samples = Vec::with_capacity(histories.len());
        for (h, &flat) in histories.iter().zip(flats.iter()) {
            let slanted = slanted_energy(*h, v, None)?;
            samples.push(RatioSample::new(slanted, flat));
        }
        let report = EstimateReport::new("slanted_energy_comparability", samples).with_parameter("v", v);
        let constant = report.samples.iter().map(|s| s.ratio.max(1.0 / s.ratio)).fold(1.0f64, f64::max);
        rows.push(ComparabilityRow { v, constant, report });
    }
    let mut sorted: Vec<&ComparabilityRow> = rows.iter().collect();
    sorted.sort_by(|a, b| a.v.abs().partial_cmp(&b.v.abs()).unwrap());
    let increasing_in_v = sorted.windows(2).all(|w| w[1].constant >= w[0].constant);
    Ok(ComparabilityReport { rows, increasing_in_v })
}
