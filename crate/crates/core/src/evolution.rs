//! Time integration of `u_tt - Δu + V(x - v(t)) u = 0`.
//!
//! [`evolve`] uses Strang splitting around the exact free step; the kicks act
//! on `u_t` with the potential centred at the step midpoint. [`picard_solve`]
//! is an independent oracle: a windowed fixed-point iteration of the Duhamel
//! formula with the free group applied mode by mode.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WaveError};
use crate::fft;
use crate::free_prop::{simpson_nodes, PropagatorMultipliers};
use crate::grid::{check_causality_budget, partial, shift_field, CauchyData, Grid3, ScalarField};
use crate::history::{FrameRequest, Frames, SpaceTimeField};
use crate::potential::{admissibility_check, PotentialModel, Trajectory, TrajectoryKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    StrangSplit,
    PicardOracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolveConfig {
    pub dt: f64,
    /// Signed end time; negative values evolve backward from `t_start`.
    pub horizon: f64,
    #[serde(default)]
    pub t_start: f64,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default = "default_stride")]
    pub snapshot_stride: usize,
}

fn default_stride() -> usize {
    1
}

impl EvolveConfig {
    pub fn new(dt: f64, horizon: f64) -> Self {
        EvolveConfig { dt, horizon, t_start: 0.0, scheme: Scheme::StrangSplit, snapshot_stride: 1 }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.snapshot_stride = stride;
        self
    }

    pub fn with_start(mut self, t_start: f64) -> Self {
        self.t_start = t_start;
        self
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    /// Number of steps from `t_start` to `horizon`.
    pub fn steps(&self) -> Result<usize> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(WaveError::config(format!("time step must be positive, got {}", self.dt)));
        }
        if self.snapshot_stride == 0 {
            return Err(WaveError::config("snapshot stride must be at least 1"));
        }
        let span = (self.horizon - self.t_start).abs();
        let raw = span / self.dt;
        let n = raw.round();
        if (raw - n).abs() > 1e-9 * raw.max(1.0) {
            return Err(WaveError::config(format!(
                "time span {span} is not a multiple of the step {}",
                self.dt
            )));
        }
        let n = n as usize;
        if n % self.snapshot_stride != 0 {
            return Err(WaveError::config(format!(
                "step count {n} is not a multiple of the snapshot stride {}",
                self.snapshot_stride
            )));
        }
        Ok(n)
    }

    fn signed_dt(&self) -> f64 {
        if self.horizon >= self.t_start {
            self.dt
        } else {
            -self.dt
        }
    }
}

/// Samples `V(x - v(t))`, caching the field when the potential never moves.
pub struct MovingPotential<'a> {
    model: &'a PotentialModel,
    traj: &'a Trajectory,
    grid: Grid3,
    fixed: Option<ScalarField>,
}

impl<'a> MovingPotential<'a> {
    pub fn new(model: &'a PotentialModel, traj: &'a Trajectory, grid: Grid3) -> Self {
        let fixed = if model.is_zero() {
            Some(ScalarField::zeros(grid))
        } else if matches!(traj.kind, TrajectoryKind::Stationary) {
            Some(model.sample(&grid, [0.0; 3]))
        } else {
            None
        };
        MovingPotential { model, traj, grid, fixed }
    }

    pub fn is_zero(&self) -> bool {
        self.model.is_zero()
    }

    pub fn at(&self, t: f64) -> ScalarField {
        match &self.fixed {
            Some(f) => f.clone(),
            None => self.model.sample(&self.grid, self.traj.position(t)),
        }
    }

    /// `max |V|` over the grid samples and the analytic bound.
    pub fn sup_norm(&self) -> f64 {
        self.at(0.0).max_abs().max(self.model.sup_norm)
    }
}

fn kick(data: &mut CauchyData, v: &ScalarField, tau: f64) {
    for ((w, &u), &p) in data.ut.data.iter_mut().zip(data.u.data.iter()).zip(v.data.iter()) {
        *w -= tau * p * u;
    }
}

fn check_run(data: &CauchyData, traj: &Trajectory, start: f64, end: f64) -> Result<()> {
    let (a, b) = if start <= end { (start, end) } else { (end, start) };
    if b > a {
        admissibility_check(traj, (a, b))?;
    }
    if let Some(r) = data.support_radius {
        check_causality_budget(&data.grid(), r, (end - start).abs())?;
    }
    Ok(())
}

/// Strang evolution, calling `observer(step, t, data)` at `t_start` and after
/// every step. Returns the data at the horizon.
pub fn evolve_observed(
    data: &CauchyData,
    model: &PotentialModel,
    traj: &Trajectory,
    cfg: &EvolveConfig,
    observer: &mut dyn FnMut(usize, f64, &CauchyData) -> Result<()>,
) -> Result<CauchyData> {
    let steps = cfg.steps()?;
    check_run(data, traj, cfg.t_start, cfg.horizon)?;
    let grid = data.grid();
    let h = cfg.signed_dt();
    let free = PropagatorMultipliers::new(&grid, h);
    let pot = MovingPotential::new(model, traj, grid);
    let mut state = data.clone();
    state.support_radius = None;
    observer(0, cfg.t_start, &state)?;
    for step in 0..steps {
        let t = cfg.t_start + step as f64 * h;
        if pot.is_zero() {
            free.step(&mut state.u, &mut state.ut);
        } else {
            let v = pot.at(t + 0.5 * h);
            kick(&mut state, &v, 0.5 * h);
            free.step(&mut state.u, &mut state.ut);
            kick(&mut state, &v, 0.5 * h);
        }
        observer(step + 1, cfg.t_start + (step + 1) as f64 * h, &state)?;
    }
    Ok(state)
}

/// Evolves and stores every `snapshot_stride`-th step, in ascending time.
pub fn evolve(data: &CauchyData, model: &PotentialModel, traj: &Trajectory, cfg: &EvolveConfig) -> Result<SpaceTimeField> {
    if cfg.scheme == Scheme::PicardOracle {
        let opts = PicardOptions { dt: cfg.dt, snapshot_stride: cfg.snapshot_stride, ..PicardOptions::default() };
        if cfg.t_start != 0.0 || cfg.horizon < 0.0 {
            return Err(WaveError::config("the fixed-point oracle runs forward from t = 0 only"));
        }
        return Ok(picard_solve(data, model, traj, cfg.horizon, &opts)?.history);
    }
    let stride = cfg.snapshot_stride;
    let mut frames: Vec<CauchyData> = Vec::new();
    evolve_observed(data, model, traj, cfg, &mut |step, _, d| {
        if step % stride == 0 {
            frames.push(d.clone());
        }
        Ok(())
    })?;
    let spacing = cfg.dt * stride as f64;
    let backward = cfg.horizon < cfg.t_start;
    let t0 = if backward { cfg.horizon } else { cfg.t_start };
    let mut out = SpaceTimeField::new(data.grid(), t0, spacing, true)?;
    if backward {
        frames.reverse();
    }
    for f in &frames {
        out.push_data(f)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
pub struct PicardOptions {
    pub dt: f64,
    /// Window length is the largest multiple of `dt` below `window_factor / ‖V‖_∞`.
    pub window_factor: f64,
    pub tol: f64,
    pub max_iterations: usize,
    pub snapshot_stride: usize,
}

impl Default for PicardOptions {
    fn default() -> Self {
        PicardOptions { dt: 1e-3, window_factor: 0.099, tol: 1e-10, max_iterations: 60, snapshot_stride: 1 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PicardWindow {
    pub start: f64,
    pub end: f64,
    pub iterations: usize,
    /// `d_{k+1} / d_k` for successive iterate differences in the window norm.
    pub ratios: Vec<f64>,
    pub final_difference: f64,
}

impl PicardWindow {
    pub fn max_ratio(&self) -> f64 {
        self.ratios.iter().cloned().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct PicardSolution {
    pub history: SpaceTimeField,
    pub windows: Vec<PicardWindow>,
    pub window_length: f64,
    /// `T_window ‖V‖_∞`.
    pub window_size_product: f64,
}

/// `‖h‖_{L²} + ‖∇h‖_{L²} + ‖h_t‖_{L²}` from spectra.
fn window_norm(xi: &[f64], scale: f64, uh: &[Complex64], vh: &[Complex64]) -> f64 {
    let mut a = 0.0;
    let mut b = 0.0;
    let mut c = 0.0;
    for idx in 0..uh.len() {
        let u2 = uh[idx].norm_sqr();
        a += u2;
        b += xi[idx] * xi[idx] * u2;
        c += vh[idx].norm_sqr();
    }
    (a * scale).sqrt() + (b * scale).sqrt() + (c * scale).sqrt()
}

/// Fixed-point iteration of `h = free - ∫ sin((t-s)|D|)/|D| V(x - v(s)) h(s) ds`
/// over consecutive windows with `T_window ‖V‖_∞ < 1/10`.
pub fn picard_solve(
    data: &CauchyData,
    model: &PotentialModel,
    traj: &Trajectory,
    t_total: f64,
    opts: &PicardOptions,
) -> Result<PicardSolution> {
    let cfg = EvolveConfig::new(opts.dt, t_total).with_stride(opts.snapshot_stride);
    let total_steps = cfg.steps()?;
    if t_total <= 0.0 {
        return Err(WaveError::config("the fixed-point oracle needs a positive horizon"));
    }
    check_run(data, traj, 0.0, t_total)?;
    let grid = data.grid();
    let n = grid.n();
    let len = grid.len();
    let xi = grid.xi_abs();
    let scale = grid.cell_volume() / len as f64;
    let pot = MovingPotential::new(model, traj, grid);
    let vmax = pot.sup_norm();
    let window_steps = if vmax == 0.0 {
        total_steps
    } else {
        let m = (opts.window_factor / (vmax * opts.dt) * (1.0 + 1e-12)).floor() as usize;
        if m == 0 {
            return Err(WaveError::config(format!(
                "step {} exceeds the contraction window {} for ‖V‖ = {vmax}",
                opts.dt,
                opts.window_factor / vmax
            )));
        }
        m.min(total_steps)
    };
    let window_length = window_steps as f64 * opts.dt;

    let lag = |l: usize| PropagatorMultipliers::from_xi(&xi, l as f64 * opts.dt);
    let lags: Vec<PropagatorMultipliers> = (0..=window_steps).map(lag).collect();
    let weights: Vec<Vec<f64>> = (0..=window_steps)
        .map(|m| {
            if m == 0 {
                vec![0.0]
            } else {
                simpson_nodes(0.0, m as f64 * opts.dt, opts.dt).into_iter().map(|(_, w)| w).collect()
            }
        })
        .collect();

    let mut out = SpaceTimeField::new(grid, 0.0, opts.dt * opts.snapshot_stride as f64, true)?;
    out.push(data.u.clone(), Some(data.ut.clone()))?;
    let mut windows = Vec::new();
    let (mut ua, mut va) = fft::forward_pair(&data.u.data, &data.ut.data, n);
    let mut done = 0usize;
    while done < total_steps {
        let m = window_steps.min(total_steps - done);
        let a = done as f64 * opts.dt;
        let pots: Vec<ScalarField> = (0..=m).map(|i| pot.at(a + i as f64 * opts.dt)).collect();
        let mut free_u = Vec::with_capacity(m + 1);
        let mut free_v = Vec::with_capacity(m + 1);
        for lagm in lags.iter().take(m + 1) {
            let mut u = ua.clone();
            let mut v = va.clone();
            lagm.apply(&mut u, &mut v);
            free_u.push(u);
            free_v.push(v);
        }
        let mut hu = free_u.clone();
        let mut hv = free_v.clone();
        let mut real: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        for i in 0..=m {
            real.push(fft::inverse_real(&hu[i], n));
        }
        let mut diffs: Vec<f64> = Vec::new();
        let mut ratios = Vec::new();
        let mut iterations = 0;
        loop {
            iterations += 1;
            // Forcing spectra, two real fields per transform.
            let mut forcing: Vec<Vec<Complex64>> = Vec::with_capacity(m + 1);
            let prod = |i: usize| -> Vec<f64> { real[i].iter().zip(pots[i].data.iter()).map(|(u, v)| u * v).collect() };
            let mut i = 0;
            while i <= m {
                if i < m {
                    let (x, y) = fft::forward_pair(&prod(i), &prod(i + 1), n);
                    forcing.push(x);
                    forcing.push(y);
                    i += 2;
                } else {
                    forcing.push(fft::forward_real(&prod(i), n));
                    i += 1;
                }
            }
            let mut new_u = free_u.clone();
            let mut new_v = free_v.clone();
            for j in 1..=m {
                let w = &weights[j];
                let (nu, nv) = (&mut new_u[j], &mut new_v[j]);
                for (i, fi) in forcing.iter().enumerate().take(j + 1) {
                    let lm = &lags[j - i];
                    let wi = w[i];
                    for idx in 0..len {
                        let f = fi[idx] * wi;
                        nu[idx] -= f * lm.sinc_mul[idx];
                        nv[idx] -= f * lm.cos_mul[idx];
                    }
                }
            }
            let mut d = 0.0f64;
            let mut size = 0.0f64;
            for j in 0..=m {
                let du: Vec<Complex64> = new_u[j].iter().zip(hu[j].iter()).map(|(a, b)| a - b).collect();
                let dv: Vec<Complex64> = new_v[j].iter().zip(hv[j].iter()).map(|(a, b)| a - b).collect();
                d = d.max(window_norm(&xi, scale, &du, &dv));
                size = size.max(window_norm(&xi, scale, &new_u[j], &new_v[j]));
            }
            hu = new_u;
            hv = new_v;
            let mut j = 0;
            while j <= m {
                if j < m {
                    let (x, y) = fft::inverse_pair(&hu[j], &hu[j + 1], n);
                    real[j] = x;
                    real[j + 1] = y;
                    j += 2;
                } else {
                    real[j] = fft::inverse_real(&hu[j], n);
                    j += 1;
                }
            }
            if let Some(&prev) = diffs.last() {
                if prev > 0.0 {
                    ratios.push(d / prev);
                }
            }
            diffs.push(d);
            if d <= opts.tol * size.max(1.0) || pot.is_zero() {
                break;
            }
            if ratios.len() >= 2 && ratios[ratios.len() - 2..].iter().all(|&r| r >= 1.0) {
                return Err(WaveError::NoConvergence {
                    message: format!("fixed-point iteration does not contract on the window starting at {a}"),
                    history: diffs,
                });
            }
            if iterations >= opts.max_iterations {
                return Err(WaveError::NoConvergence {
                    message: format!("fixed-point iteration hit {} iterations at window {a}", opts.max_iterations),
                    history: diffs,
                });
            }
        }
        for j in 1..=m {
            if (done + j) % opts.snapshot_stride == 0 {
                let (u, v) = fft::inverse_pair(&hu[j], &hv[j], n);
                out.push(ScalarField::from_vec(grid, u)?, Some(ScalarField::from_vec(grid, v)?))?;
            }
        }
        ua = hu[m].clone();
        va = hv[m].clone();
        windows.push(PicardWindow {
            start: a,
            end: a + m as f64 * opts.dt,
            iterations,
            ratios,
            final_difference: *diffs.last().unwrap_or(&0.0),
        });
        done += m;
    }
    Ok(PicardSolution { history: out, windows, window_length, window_size_product: window_length * vmax })
}

#[derive(Debug, Clone)]
pub struct ComovingField {
    /// Snapshots of `u(x + v(t), t)` and of the shifted `u_t`.
    pub field: SpaceTimeField,
    /// More than `1e-8` of some snapshot's `L²` mass is carried across the periodic boundary.
    pub wrapped: bool,
}

/// Fraction of `∫ u²` at `|x| > L/2 - |d|`, the part a shift by `d` can carry across the boundary.
fn wrapped_fraction(u: &ScalarField, d: [f64; 3]) -> f64 {
    let grid = u.grid;
    let cut = grid.half_length() - (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    let mut total = 0.0;
    let mut outside = 0.0;
    for (idx, v) in u.data.iter().enumerate() {
        let x = grid.point(idx);
        let w = v * v;
        total += w;
        if (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt() > cut {
            outside += w;
        }
    }
    if total > 0.0 {
        outside / total
    } else {
        0.0
    }
}

/// `u^S(x, t) = u(x + v(t), t)` by spectral translation of each snapshot.
pub fn shift_to_comoving(history: &SpaceTimeField, traj: &Trajectory) -> Result<ComovingField> {
    let grid = history.grid();
    let mut out = SpaceTimeField::new(grid, history.t0(), history.dt(), history.has_velocity())?;
    let mut wrapped = false;
    for n in 0..history.len() {
        let t = history.time(n);
        let d = traj.position(t);
        let u = history.snapshot_u(n);
        let ut = history.snapshot_ut(n);
        if !wrapped && d != [0.0; 3] {
            wrapped = wrapped_fraction(u, d) > 1e-8;
        }
        out.push(shift_field(u, d), ut.map(|v| shift_field(v, d)))?;
    }
    Ok(ComovingField { field: out, wrapped })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct EnergySample {
    pub t: f64,
    /// `∫ |∇u|² + |u_t|² + V(x - v(t)) u²`.
    pub energy: f64,
}

/// `E_V(t) = ∫ |∇u|² + |u_t|² + V(x - v(t)) u²` at one time.
pub fn total_energy(data: &CauchyData, potential: &ScalarField) -> f64 {
    2.0 * data.energy_with_potential(potential)
}

/// `E_V` at every frame.
pub fn total_energy_series(frames: &dyn Frames, model: &PotentialModel, traj: &Trajectory) -> Result<Vec<EnergySample>> {
    let grid = frames.grid();
    let pot = MovingPotential::new(model, traj, grid);
    let mut out = Vec::with_capacity(frames.frame_count());
    frames.for_each_frame(FrameRequest { velocity: true, gradient: false }, &mut |f| {
        let ut = f.ut.ok_or_else(|| WaveError::structural("energy needs stored velocities"))?;
        let data = CauchyData::new(f.u.clone(), ut.clone())?;
        out.push(EnergySample { t: f.t, energy: total_energy(&data, &pot.at(f.t)) });
        Ok(())
    })?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct FluxSample {
    pub t: f64,
    /// `dE_V/dt = ∫ ∂_t V(x - v(t)) u²`.
    pub flux: f64,
}

/// Time derivative of `E_V` at every frame from `∂_t V = -v'(t) · ∇V`.
pub fn energy_flux_series(frames: &dyn Frames, model: &PotentialModel, traj: &Trajectory) -> Result<Vec<FluxSample>> {
    let grid = frames.grid();
    let mut out = Vec::with_capacity(frames.frame_count());
    let fixed = model.is_zero() || matches!(traj.kind, TrajectoryKind::Stationary);
    frames.for_each_frame(FrameRequest { velocity: false, gradient: false }, &mut |f| {
        if fixed {
            out.push(FluxSample { t: f.t, flux: 0.0 });
            return Ok(());
        }
        let vel = traj.velocity(f.t);
        let v = model.sample(&grid, traj.position(f.t));
        let mut flux = 0.0;
        for (axis, &w) in vel.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let dv = partial(&v, axis);
            let s: f64 = dv.data.iter().zip(f.u.data.iter()).map(|(d, u)| d * u * u).sum();
            flux -= w * s * grid.cell_volume();
        }
        out.push(FluxSample { t: f.t, flux });
        Ok(())
    })?;
    Ok(out)
}
