//! Bound-state amplitudes, the stability condition, scattering data, free
//! asymptotic data and the decomposition of linear-trajectory solutions.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WaveError};
use crate::evolution::{evolve, evolve_observed, EvolveConfig, MovingPotential};
use crate::fft;
use crate::free_prop::{fit_slope, propagate_free, simpson_nodes};
use crate::grid::{CauchyData, Grid3, ScalarField};
use crate::history::{trig_weights, History, SpaceTimeField};
use crate::lorentz::{boost_field, BoostParams, BoostWindow};
use crate::potential::{lorentz_contracted_potential, PotentialModel, Trajectory};
use crate::spectral_h::{bound_states, BoundState, Hamiltonian};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScatteringOptions {
    pub dt: f64,
    /// Boosted-frame horizon `T'`.
    pub horizon: f64,
    /// Lab steps between stored snapshots when a history is needed.
    pub snapshot_stride: usize,
    /// Target for `max |stability residual|`.
    pub tol: f64,
    pub max_rounds: usize,
    /// Use every supplied bound state instead of the first one only.
    pub multi_state: bool,
    /// Half-width of the boosted slab; `None` picks `min(widest, L/4)`.
    pub boost_half_width: Option<f64>,
    /// Fraction window of the horizon used for the `P_b` decay fit.
    pub decay_window: (f64, f64),
}

impl Default for ScatteringOptions {
    fn default() -> Self {
        ScatteringOptions {
            dt: 1.0 / 64.0,
            horizon: 6.0,
            snapshot_stride: 8,
            tol: 1e-6,
            max_rounds: 6,
            multi_state: false,
            boost_half_width: None,
            decay_window: (0.0, 1.0 / 6.0),
        }
    }
}

impl ScatteringOptions {
    fn active<'s>(&self, states: &'s [BoundState]) -> Result<&'s [BoundState]> {
        if states.is_empty() {
            return Err(WaveError::config("scattering needs at least one bound state"));
        }
        Ok(if self.multi_state { states } else { &states[..1] })
    }
}

/// Bound states of `-Δ + V_μ` with the contracted potential of the
/// trajectory's asymptotic speed.
pub fn boosted_states(model: &PotentialModel, traj: &Trajectory, grid: &Grid3, max_count: usize) -> Result<Vec<BoundState>> {
    let mu = traj.boost_speed()?;
    let contracted = lorentz_contracted_potential(model, mu)?;
    bound_states(&Hamiltonian::from_model(&contracted, grid), max_count)
}

/// Amplitudes `a_i(t') = <u_L(t'), m_i>` on a uniform boosted time grid.
#[derive(Debug, Clone, Serialize)]
pub struct AmplitudeSeries {
    pub times: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub a: Vec<Vec<f64>>,
    pub adot: Vec<Vec<f64>>,
    /// `N_i(t') = -<M u_L, m_i>`, when the potential difference was evaluated.
    pub forcing: Option<Vec<Vec<f64>>>,
    /// `max |<r_L, m_i>|` relative to `max(1, ||u_L||)`.
    pub remainder_overlap: f64,
}

impl AmplitudeSeries {
    fn empty(states: &[BoundState], with_forcing: bool) -> Self {
        let k = states.len();
        AmplitudeSeries {
            times: vec![],
            lambdas: states.iter().map(|s| s.lambda).collect(),
            a: vec![vec![]; k],
            adot: vec![vec![]; k],
            forcing: with_forcing.then(|| vec![vec![]; k]),
            remainder_overlap: 0.0,
        }
    }

    fn record(&mut self, t: f64, u: &ScalarField, ut: &ScalarField, states: &[BoundState], w: Option<&ScalarField>) {
        self.times.push(t);
        let mut rest = u.clone();
        for (i, s) in states.iter().enumerate() {
            let a = u.dot(&s.m);
            self.a[i].push(a);
            self.adot[i].push(ut.dot(&s.m));
            rest.axpy(-a, &s.m);
        }
        let scale = u.l2_norm().max(1.0);
        for s in states {
            self.remainder_overlap = self.remainder_overlap.max(rest.dot(&s.m).abs() / scale);
        }
        if let (Some(f), Some(w)) = (self.forcing.as_mut(), w) {
            let wu = ScalarField { grid: u.grid, data: u.data.iter().zip(&w.data).map(|(a, b)| a * b).collect() };
            for (i, s) in states.iter().enumerate() {
                f[i].push(-wu.dot(&s.m));
            }
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `||P_b u_L(t')||_{L^2}` at sample `n`.
    pub fn pb_norm(&self, n: usize) -> f64 {
        self.a.iter().map(|a| a[n] * a[n]).sum::<f64>().sqrt()
    }

    pub fn pb_series(&self) -> Vec<f64> {
        (0..self.len()).map(|n| self.pb_norm(n)).collect()
    }

    /// Least-squares slope of `ln |a_i|` over `window`.
    pub fn log_slope(&self, state: usize, window: (f64, f64)) -> f64 {
        log_slope(&self.times, &self.a[state], window)
    }

    pub fn pb_log_slope(&self, window: (f64, f64)) -> f64 {
        log_slope(&self.times, &self.pb_series(), window)
    }
}

/// Least-squares slope of `ln |y|` over samples with `t` in `window`.
pub fn log_slope(times: &[f64], values: &[f64], window: (f64, f64)) -> f64 {
    let (x, y): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(values)
        .filter(|(t, v)| **t >= window.0 - 1e-12 && **t <= window.1 + 1e-12 && **v != 0.0)
        .map(|(t, v)| (*t, v.abs().ln()))
        .unzip();
    if x.len() < 2 {
        return f64::NAN;
    }
    fit_slope(&x, &y)
}

/// Amplitudes of a boosted history over `window`.
pub fn extract_amplitudes(
    history: &dyn History,
    boost: &BoostParams,
    window: &BoostWindow,
    states: &[BoundState],
) -> Result<AmplitudeSeries> {
    let boosted = boost_field(history, boost, window)?;
    let mut out = AmplitudeSeries::empty(states, false);
    for n in 0..boosted.len() {
        let d = boosted.snapshot(n)?;
        out.record(window.time(n), &d.u, &d.ut, states, None);
    }
    Ok(out)
}

/// `M(x', t') = V(x - v(t)) - V(x - μt)` at the lab preimage of each boosted node.
pub fn potential_difference(model: &PotentialModel, traj: &Trajectory, boost: &BoostParams, grid: &Grid3, tp: f64) -> ScalarField {
    ScalarField::from_fn(*grid, |xp| {
        let (x, t) = boost.inverse(xp, tp);
        model.eval_moving(traj, x, t) - model.eval([x[0] - boost.mu * t, x[1], x[2]])
    })
}

/// `ä_i = λ_i² a_i - Σ_j a_j <M m_j, m_i> - <M r_L, m_i>` at boosted time `tp`.
pub fn amplitude_ode_rhs(
    tp: f64,
    a: &[f64],
    states: &[BoundState],
    model: &PotentialModel,
    traj: &Trajectory,
    boost: &BoostParams,
    r_l: &ScalarField,
) -> Vec<f64> {
    let grid = r_l.grid;
    let w = potential_difference(model, traj, boost, &grid, tp);
    let times = |f: &ScalarField| ScalarField { grid, data: f.data.iter().zip(&w.data).map(|(x, y)| x * y).collect() };
    let wr = times(r_l);
    let wm: Vec<ScalarField> = states.iter().map(|s| times(&s.m)).collect();
    states
        .iter()
        .enumerate()
        .map(|(i, si)| {
            let c: f64 = a.iter().zip(&wm).map(|(aj, wmj)| aj * wmj.dot(&si.m)).sum();
            si.lambda * si.lambda * a[i] - c - wr.dot(&si.m)
        })
        .collect()
}

/// `a(t) = a0 cosh λt + ȧ0 sinh(λt)/λ + ∫_0^t sinh(λ(t-s))/λ N(s) ds` on the
/// uniform grid `times`, by composite Simpson.
pub fn integrate_amplitude(a0: f64, adot0: f64, lambda: f64, times: &[f64], forcing: &[f64]) -> Vec<f64> {
    let t0 = times.first().copied().unwrap_or(0.0);
    let h = if times.len() > 1 { times[1] - times[0] } else { 1.0 };
    times
        .iter()
        .map(|&t| {
            let tau = t - t0;
            let mut a = a0 * (lambda * tau).cosh() + adot0 * (lambda * tau).sinh() / lambda;
            for (j, (_, w)) in simpson_nodes(0.0, tau, h).into_iter().enumerate() {
                let s = times[j] - t0;
                a += w * (lambda * (tau - s)).sinh() / lambda * forcing[j];
            }
            a
        })
        .collect()
}

/// Lab Cauchy data at time `t` of the boosted mode `e^{±λt'} m(x')`.
pub fn lab_bound_mode(state: &BoundState, sign: f64, boost: &BoostParams, t: f64) -> CauchyData {
    let grid = state.m.grid;
    let n = grid.n();
    let h = grid.spacing();
    let (g, mu, lam) = (boost.gamma, boost.mu, state.lambda * sign);
    let mut u = ScalarField::zeros(grid);
    let mut ut = ScalarField::zeros(grid);
    let plane = n * n;
    for i in 0..n {
        let x1 = grid.coord(i);
        let x1p = g * (x1 - mu * t);
        let tp = g * (t - mu * x1);
        let (w, dw) = trig_weights((x1p - grid.coord(0)) / h, n, h);
        let e = (lam * tp).exp();
        for jk in 0..plane {
            let (mut m, mut dm) = (0.0, 0.0);
            for (src, (wi, dwi)) in w.iter().zip(&dw).enumerate() {
                let v = state.m.data[src * plane + jk];
                m += wi * v;
                dm += dwi * v;
            }
            u.data[i * plane + jk] = e * m;
            ut.data[i * plane + jk] = g * e * (lam * m - mu * dm);
        }
    }
    CauchyData { u, ut, support_radius: None }
}

/// Normalized Riesz coefficients `a_± = (λ<u, m> ± <u_t, m>) / (2λ)`, so that
/// `(u, u_t) = a_+ (m, λm) + a_- (m, -λm)` on the two-dimensional block.
pub fn riesz_coefficients(data: &CauchyData, state: &BoundState) -> (f64, f64) {
    let a = data.u.dot(&state.m);
    let b = data.ut.dot(&state.m);
    let lam = state.lambda;
    ((lam * a + b) / (2.0 * lam), (lam * a - b) / (2.0 * lam))
}

/// Amplitudes and forcing of the evolution of `data` over `[0, T']`.
fn run_amplitudes(
    data: &CauchyData,
    model: &PotentialModel,
    traj: &Trajectory,
    states: &[BoundState],
    opts: &ScatteringOptions,
) -> Result<AmplitudeSeries> {
    let mu = traj.boost_speed()?;
    let grid = data.grid();
    if mu == 0.0 {
        let cfg = EvolveConfig::new(opts.dt, opts.horizon);
        let moving = MovingPotential::new(model, traj, grid);
        let rest = model.sample(&grid, [0.0; 3]);
        let coupled = !traj.is_linear() && !model.is_zero();
        let mut out = AmplitudeSeries::empty(states, true);
        let zero = ScalarField::zeros(grid);
        evolve_observed(data, model, traj, &cfg, &mut |_, t, d| {
            let w = if coupled {
                let mut w = moving.at(t);
                w.axpy(-1.0, &rest);
                w
            } else {
                zero.clone()
            };
            out.record(t, &d.u, &d.ut, states, Some(&w));
            Ok(())
        })?;
        return Ok(out);
    }
    let boost = BoostParams::new(mu)?;
    let dtau = opts.dt * opts.snapshot_stride as f64;
    let count = (opts.horizon / dtau).round() as usize + 1;
    let widest = BoostWindow::widest(&grid, &boost, 0.0, dtau, count);
    let width = opts.boost_half_width.unwrap_or(widest.x1_half_width.min(0.25 * grid.length()));
    if !(width > 0.0) || width > widest.x1_half_width + 1e-12 {
        return Err(WaveError::domain(format!(
            "boosted slab half-width {width} outside (0, {}] for horizon {}",
            widest.x1_half_width, opts.horizon
        )));
    }
    let window = BoostWindow { x1_half_width: width, ..widest };
    let history = two_sided_history(data, model, traj, window.lab_time_range(&boost), opts)?;
    let boosted = boost_field(&history, &boost, &window)?;
    let mut out = AmplitudeSeries::empty(states, true);
    for n in 0..boosted.len() {
        let d = boosted.snapshot(n)?;
        let w = potential_difference(model, traj, &boost, &grid, window.time(n));
        out.record(window.time(n), &d.u, &d.ut, states, Some(&w));
    }
    Ok(out)
}

/// Stored evolution covering `range`, with snapshots at multiples of the
/// snapshot spacing through `t = 0`.
fn two_sided_history(
    data: &CauchyData,
    model: &PotentialModel,
    traj: &Trajectory,
    range: (f64, f64),
    opts: &ScatteringOptions,
) -> Result<SpaceTimeField> {
    let stride = opts.snapshot_stride;
    let dtau = opts.dt * stride as f64;
    let back = (-range.0 / dtau - 1e-9).ceil().max(0.0) as usize;
    let fwd = (range.1 / dtau - 1e-9).ceil().max(0.0) as usize;
    let mut out = SpaceTimeField::new(data.grid(), -(back as f64) * dtau, dtau, true)?;
    if back > 0 {
        let cfg = EvolveConfig::new(opts.dt, -(back as f64) * dtau).with_stride(stride);
        let past = evolve(data, model, traj, &cfg)?;
        for n in 0..past.len() - 1 {
            out.push_data(&past.snapshot(n)?)?;
        }
    }
    if fwd > 0 {
        let cfg = EvolveConfig::new(opts.dt, fwd as f64 * dtau).with_stride(stride);
        let future = evolve(data, model, traj, &cfg)?;
        for n in 0..future.len() {
            out.push_data(&future.snapshot(n)?)?;
        }
    } else {
        out.push_data(data)?;
    }
    Ok(out)
}

/// Stability residual of one bound state.
#[derive(Debug, Clone, Serialize)]
pub struct StabilityResidual {
    pub lambda: f64,
    /// `e^{-λT}(a(T) + ȧ(T)/λ)`, the left side truncated at the horizon.
    pub residual: f64,
    /// `a(0) + ȧ(0)/λ + (1/λ) ∫_0^T e^{-λs} N(s) ds` by quadrature.
    pub integral_form: f64,
    /// `a(0) + ȧ(0)/λ`.
    pub initial_part: f64,
    /// `e^{-λT}`.
    pub tail_factor: f64,
    /// `e^{-λT} |N(T)| / λ²`.
    pub tail_bound: f64,
    /// Set when `e^{-λT} >= 1e-8`.
    pub tail_warning: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub states: Vec<StabilityResidual>,
    pub amplitudes: AmplitudeSeries,
}

impl StabilityReport {
    pub fn max_residual(&self) -> f64 {
        self.states.iter().fold(0.0, |m, s| m.max(s.residual.abs()))
    }

    pub fn residuals(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.residual).collect()
    }
}

fn stability_from(series: AmplitudeSeries) -> StabilityReport {
    let last = series.len() - 1;
    let t_end = series.times[last];
    let h = if series.len() > 1 { series.times[1] - series.times[0] } else { 1.0 };
    let nodes = simpson_nodes(series.times[0], t_end, h);
    let states = (0..series.a.len())
        .map(|i| {
            let lam = series.lambdas[i];
            let (a, ad) = (&series.a[i], &series.adot[i]);
            let forcing = series.forcing.as_ref().map(|f| &f[i]);
            let integral: f64 = match forcing {
                Some(f) if nodes.len() == series.len() => {
                    nodes.iter().zip(f).map(|((s, w), n)| w * (-lam * s).exp() * n).sum::<f64>() / lam
                }
                _ => f64::NAN,
            };
            let tail_factor = (-lam * t_end).exp();
            let n_end = forcing.map_or(f64::NAN, |f| f[last].abs());
            StabilityResidual {
                lambda: lam,
                residual: tail_factor * (a[last] + ad[last] / lam),
                integral_form: a[0] + ad[0] / lam + integral,
                initial_part: a[0] + ad[0] / lam,
                tail_factor,
                tail_bound: tail_factor * n_end / (lam * lam),
                tail_warning: tail_factor >= 1e-8,
            }
        })
        .collect();
    StabilityReport { states, amplitudes: series }
}

/// Evolves `data` and evaluates the stability condition for each active state.
pub fn stability_residual(
    data: &CauchyData,
    model: &PotentialModel,
    traj: &Trajectory,
    states: &[BoundState],
    opts: &ScatteringOptions,
) -> Result<StabilityReport> {
    let active = opts.active(states)?;
    Ok(stability_from(run_amplitudes(data, model, traj, active, opts)?))
}

/// Seed adjusted along the growing modes so the stability residual vanishes.
#[derive(Debug, Clone, Serialize)]
pub struct ScatteringData {
    #[serde(skip)]
    pub data: CauchyData,
    /// Coefficients of the added lab modes `e^{λt'} m(x')` at `t = 0`.
    pub delta: Vec<f64>,
    pub residual_trace: Vec<f64>,
    pub report: StabilityReport,
}

/// Adds growing-mode components to `seed` until `max |residual| < opts.tol`.
///
/// The residual is affine in the added coefficients, so each round solves the
/// linear system built from the response of every growing mode.
pub fn make_scattering_data(
    seed: &CauchyData,
    model: &PotentialModel,
    traj: &Trajectory,
    states: &[BoundState],
    opts: &ScatteringOptions,
) -> Result<ScatteringData> {
    let active = opts.active(states)?;
    let k = active.len();
    let boost = BoostParams::new(traj.boost_speed()?)?;
    let modes: Vec<CauchyData> = active.iter().map(|s| lab_bound_mode(s, 1.0, &boost, 0.0)).collect();
    let mut response = DMatrix::zeros(k, k);
    for (j, mode) in modes.iter().enumerate() {
        let r = stability_residual(mode, model, traj, active, &ScatteringOptions { multi_state: true, ..*opts })?;
        for i in 0..k {
            response[(i, j)] = r.states[i].residual;
        }
    }
    let lu = response.clone().lu();
    let mut delta = DVector::<f64>::zeros(k);
    let mut trace = Vec::new();
    let mut current = seed.clone();
    current.support_radius = None;
    for _ in 0..opts.max_rounds.max(1) {
        let report = stability_residual(&current, model, traj, active, &ScatteringOptions { multi_state: true, ..*opts })?;
        let worst = report.max_residual();
        trace.push(worst);
        if worst < opts.tol {
            return Ok(ScatteringData { data: current, delta: delta.iter().copied().collect(), residual_trace: trace, report });
        }
        let rho = DVector::from_vec(report.residuals());
        let step = lu
            .solve(&rho)
            .ok_or_else(|| WaveError::NoConvergence { message: "singular growing-mode response".into(), history: trace.clone() })?;
        for (j, mode) in modes.iter().enumerate() {
            current.axpy(-step[j], mode);
        }
        delta -= step;
    }
    Err(WaveError::NoConvergence { message: "stability residual above tolerance after the round cap".into(), history: trace })
}

/// Free asymptotic data and the remainder `||U(t) - e^{tJH_F} U_0||`.
#[derive(Debug, Clone, Serialize)]
pub struct FreeDataExtraction {
    #[serde(skip)]
    pub free_data: CauchyData,
    pub times: Vec<f64>,
    /// `||∫_t^T e^{-sJH_F}(0, V u(s)) ds|| + tail` in `H^1 x L^2`.
    pub remainder: Vec<f64>,
    /// `||V u(T)|| / κ` with `κ` the fitted decay rate of `||V u(s)||` over the
    /// final third; infinite when it does not decay.
    pub tail: f64,
    pub initial_energy_norm: f64,
    pub decreasing_final_third: bool,
}

impl FreeDataExtraction {
    pub fn final_fraction(&self) -> f64 {
        let last = self.remainder.last().copied().unwrap_or(0.0);
        if self.initial_energy_norm == 0.0 {
            0.0
        } else {
            last / self.initial_energy_norm
        }
    }
}

fn pair_energy_norm(a: &[Complex64], b: &[Complex64], xi: &[f64], scale: f64) -> f64 {
    let s: f64 = a.iter().zip(b).zip(xi).map(|((x, y), k)| k * k * x.norm_sqr() + y.norm_sqr()).sum();
    (s * scale).sqrt()
}

/// Non-increasing within a relative tolerance over the last third of `series`.
pub fn decreasing_over_final_third(series: &[f64]) -> bool {
    let n = series.len();
    if n < 2 {
        return true;
    }
    let scale = series.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let start = (2 * (n - 1)) / 3;
    series[start..].windows(2).all(|w| w[1] <= w[0] + 1e-9 * scale)
}

/// `U_0 = U(0) - ∫_0^T e^{-sJH_F}(0, V(· - v(s)) u(s)) ds` from a stored lab
/// history starting at `t = 0`, with the remainder series.
pub fn extract_free_data(history: &SpaceTimeField, model: &PotentialModel, traj: &Trajectory) -> Result<FreeDataExtraction> {
    if history.is_empty() || !history.has_velocity() || history.t0().abs() > 1e-12 {
        return Err(WaveError::config("free data extraction needs a history with velocities starting at t = 0"));
    }
    let grid = history.grid();
    let n = grid.n();
    let len = grid.len();
    let xi = grid.xi_abs();
    let scale = grid.cell_volume() / len as f64;
    let count = history.len();
    let times = history.times();
    let pot = MovingPotential::new(model, traj, grid);
    let forcing_hat = |idx: usize| -> (Vec<Complex64>, Vec<Complex64>, f64) {
        let v = pot.at(times[idx]);
        let u = history.snapshot_u(idx);
        let f: Vec<f64> = u.data.iter().zip(&v.data).map(|(a, b)| a * b).collect();
        let norm = (f.iter().map(|x| x * x).sum::<f64>() * grid.cell_volume()).sqrt();
        let fh = fft::forward_real(&f, n);
        let s = times[idx];
        let mut a = vec![Complex64::new(0.0, 0.0); len];
        let mut b = vec![Complex64::new(0.0, 0.0); len];
        for j in 0..len {
            let k = xi[j];
            let (sn, c) = (s * k).sin_cos();
            a[j] = fh[j] * if k == 0.0 { -s } else { -sn / k };
            b[j] = fh[j] * c;
        }
        (a, b, norm)
    };
    let t_end = times[count - 1];
    let weights: Vec<f64> =
        if count > 1 { simpson_nodes(0.0, t_end, history.dt()).into_iter().map(|(_, w)| w).collect() } else { vec![0.0] };
    let mut total_a = vec![Complex64::new(0.0, 0.0); len];
    let mut total_b = vec![Complex64::new(0.0, 0.0); len];
    let mut fnorms = Vec::with_capacity(count);
    if !pot.is_zero() {
        for idx in 0..count {
            let (a, b, norm) = forcing_hat(idx);
            for j in 0..len {
                total_a[j] += a[j] * weights[idx];
                total_b[j] += b[j] * weights[idx];
            }
            fnorms.push(norm);
        }
    } else {
        fnorms = vec![0.0; count];
    }
    let first = history.snapshot(0)?;
    let (da, db) = fft::inverse_pair(&total_a, &total_b, n);
    let mut free_data = first.clone();
    free_data.support_radius = None;
    for j in 0..len {
        free_data.u.data[j] -= da[j];
        free_data.ut.data[j] -= db[j];
    }
    let tail = if pot.is_zero() || fnorms[count - 1] == 0.0 {
        0.0
    } else {
        let kappa = log_slope(&times, &fnorms, (times[(2 * (count - 1)) / 3], t_end));
        if kappa < 0.0 {
            fnorms[count - 1] / -kappa
        } else {
            f64::INFINITY
        }
    };
    let mut remainder = vec![tail; count];
    if !pot.is_zero() && count > 1 {
        let dh = history.dt();
        let zero = || (vec![Complex64::new(0.0, 0.0); len], vec![Complex64::new(0.0, 0.0); len]);
        let mut ring: Vec<(Vec<Complex64>, Vec<Complex64>)> = Vec::with_capacity(count.min(4));
        let mut even_prev = zero();
        let mut even_last = zero();
        for idx in 0..count {
            let (a, b, _) = forcing_hat(idx);
            ring.push((a, b));
            if ring.len() > 4 {
                ring.remove(0);
            }
            let g = |back: usize| &ring[ring.len() - 1 - back];
            let prefix = if idx == 0 {
                zero()
            } else if idx == 1 {
                let (mut pa, mut pb) = zero();
                for j in 0..len {
                    pa[j] = (g(0).0[j] + g(1).0[j]) * (0.5 * dh);
                    pb[j] = (g(0).1[j] + g(1).1[j]) * (0.5 * dh);
                }
                (pa, pb)
            } else if idx % 2 == 0 {
                let (mut pa, mut pb) = even_last.clone();
                for j in 0..len {
                    pa[j] += (g(2).0[j] + g(1).0[j] * 4.0 + g(0).0[j]) * (dh / 3.0);
                    pb[j] += (g(2).1[j] + g(1).1[j] * 4.0 + g(0).1[j]) * (dh / 3.0);
                }
                (pa, pb)
            } else {
                let (mut pa, mut pb) = even_prev.clone();
                let c = 3.0 * dh / 8.0;
                for j in 0..len {
                    pa[j] += (g(3).0[j] + g(2).0[j] * 3.0 + g(1).0[j] * 3.0 + g(0).0[j]) * c;
                    pb[j] += (g(3).1[j] + g(2).1[j] * 3.0 + g(1).1[j] * 3.0 + g(0).1[j]) * c;
                }
                (pa, pb)
            };
            let ra: Vec<Complex64> = total_a.iter().zip(&prefix.0).map(|(x, y)| x - y).collect();
            let rb: Vec<Complex64> = total_b.iter().zip(&prefix.1).map(|(x, y)| x - y).collect();
            remainder[idx] = pair_energy_norm(&ra, &rb, &xi, scale) + tail;
            if idx % 2 == 0 {
                even_prev = std::mem::replace(&mut even_last, prefix);
            }
        }
    }
    let decreasing_final_third = decreasing_over_final_third(&remainder);
    Ok(FreeDataExtraction {
        free_data,
        times,
        remainder,
        tail,
        initial_energy_norm: first.energy_norm(),
        decreasing_final_third,
    })
}

/// Symplectic form `ω(U, W) = <u, w_t> - <u_t, w>`, preserved by the split scheme.
pub fn symplectic_pairing(a: &CauchyData, b: &CauchyData) -> f64 {
    a.u.dot(&b.ut) - a.ut.dot(&b.u)
}

/// Growing and decaying eigenmodes of the split-step map of the stationary
/// asymptotic potential, normalized by `<u, m> = 1`.
#[derive(Debug, Clone, Serialize)]
pub struct DiscreteModes {
    /// Growth rate of the step map.
    pub lambda: f64,
    #[serde(skip)]
    pub plus: CauchyData,
    #[serde(skip)]
    pub minus: CauchyData,
}

impl DiscreteModes {
    /// `(a_+, a_-)` with `U - a_+ E_+ - a_- E_-` symplectically orthogonal to both modes.
    pub fn coefficients(&self, data: &CauchyData) -> (f64, f64) {
        let norm = symplectic_pairing(&self.plus, &self.minus);
        (symplectic_pairing(data, &self.minus) / norm, -symplectic_pairing(data, &self.plus) / norm)
    }
}

/// Power iteration on the step map, started from `(m, ±λm)` and run for
/// `settle` time units in each direction.
pub fn discrete_modes(model: &PotentialModel, state: &BoundState, dt: f64, settle: f64) -> Result<DiscreteModes> {
    let traj = Trajectory::stationary();
    let id = BoostParams::identity();
    let normalize = |d: CauchyData| {
        let a = d.u.dot(&state.m);
        d.scaled(1.0 / a)
    };
    let run = |d: &CauchyData, span: f64| -> Result<CauchyData> {
        evolve_observed(d, model, &traj, &EvolveConfig::new(dt, span), &mut |_, _, _| Ok(()))
    };
    let steps = (settle / dt).round().max(1.0);
    let plus = normalize(run(&lab_bound_mode(state, 1.0, &id, 0.0), steps * dt)?);
    let minus = normalize(run(&lab_bound_mode(state, -1.0, &id, 0.0), -steps * dt)?);
    let probe = (0.25 / dt).round().max(1.0) * dt;
    let grown = run(&plus, probe)?.u.dot(&state.m);
    Ok(DiscreteModes { lambda: grown.ln() / probe, plus, minus })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct BranchCoefficients {
    pub lambda: f64,
    /// `a_+` from the pairing with `(m, -λm)`.
    pub growing: f64,
    /// `a_-` from the pairing with `(m, λm)`.
    pub decaying: f64,
    /// Coefficients against the discrete step-map modes, when supplied.
    pub discrete: Option<(f64, f64)>,
}

/// `U(t) = Σ a_± e^{±λγ(t - μx1)} E_± + e^{tJH_F} U_0 + R(t)` along a stored history.
#[derive(Debug, Clone, Serialize)]
pub struct Decomposition {
    pub coefficients: Vec<BranchCoefficients>,
    pub times: Vec<f64>,
    /// `||R(t)||` in `H^1 x L^2`.
    pub remainder: Vec<f64>,
    pub decreasing_final_third: bool,
}

/// Decomposition for a linear trajectory; `states` are bound states of the
/// contracted potential and `free_data` the free asymptotic data.
///
/// With `discrete` modes (zero asymptotic speed only) the bound part of the
/// remainder is reconstructed from the step-map modes.
pub fn asymptotic_decomposition(
    history: &SpaceTimeField,
    traj: &Trajectory,
    states: &[BoundState],
    free_data: &CauchyData,
    discrete: Option<&[DiscreteModes]>,
) -> Result<Decomposition> {
    if !traj.is_linear() {
        return Err(WaveError::config("the asymptotic decomposition requires a linear trajectory"));
    }
    if !history.has_velocity() {
        return Err(WaveError::config("the decomposition needs stored velocities"));
    }
    let mu = traj.boost_speed()?;
    if let Some(d) = discrete {
        if mu != 0.0 || d.len() != states.len() {
            return Err(WaveError::config("discrete modes need zero asymptotic speed and one mode pair per state"));
        }
    }
    let boost = BoostParams::new(mu)?;
    let grid = history.grid();
    let at_zero = if mu == 0.0 {
        history.data_at(0.0)?
    } else {
        let mut window = BoostWindow::widest(&grid, &boost, 0.0, history.dt(), 1);
        let (t0, t1) = history.time_range();
        let reach = t0.abs().min(t1.abs()) / (boost.gamma * mu.abs());
        window.x1_half_width = window.x1_half_width.min(reach);
        boost_field(history, &boost, &window)?.snapshot(0)?
    };
    let coefficients: Vec<BranchCoefficients> = states
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let (p, m) = riesz_coefficients(&at_zero, s);
            let discrete = discrete.map(|d| d[i].coefficients(&at_zero));
            BranchCoefficients { lambda: s.lambda, growing: p, decaying: m, discrete }
        })
        .collect();
    let mut remainder = Vec::with_capacity(history.len());
    for n in 0..history.len() {
        let t = history.time(n);
        let mut r = history.snapshot(n)?;
        let free = propagate_free(free_data, t)?;
        r.axpy(-1.0, &free);
        for (i, (s, c)) in states.iter().zip(&coefficients).enumerate() {
            match (discrete, c.discrete) {
                (Some(d), Some((p, m))) => {
                    let lam = d[i].lambda;
                    r.axpy(-p * (lam * t).exp(), &d[i].plus);
                    r.axpy(-m * (-lam * t).exp(), &d[i].minus);
                }
                _ => {
                    r.axpy(-c.growing, &lab_bound_mode(s, 1.0, &boost, t));
                    r.axpy(-c.decaying, &lab_bound_mode(s, -1.0, &boost, t));
                }
            }
        }
        remainder.push(r.energy_norm());
    }
    let decreasing_final_third = decreasing_over_final_third(&remainder);
    Ok(Decomposition { coefficients, times: history.times(), remainder, decreasing_final_third })
}

/// Stability residual, `P_b` decay, free data and remainder for one run.
#[derive(Debug, Clone, Serialize)]
pub struct ScatteringDiagnostics {
    pub stability_residual: Vec<f64>,
    pub amplitude_slope: f64,
    pub pb_decays: bool,
    pub delta: Vec<f64>,
    pub residual_trace: Vec<f64>,
    pub remainder_times: Vec<f64>,
    pub remainder_series: Vec<f64>,
    pub remainder_decreasing: bool,
    pub remainder_final_fraction: f64,
    #[serde(skip)]
    pub free_data: CauchyData,
}

/// Builds scattering data from `seed`, then extracts its free asymptotic data
/// from a lab evolution over the horizon.
pub fn scattering_diagnostics(
    seed: &CauchyData,
    model: &PotentialModel,
    traj: &Trajectory,
    states: &[BoundState],
    opts: &ScatteringOptions,
) -> Result<(ScatteringData, ScatteringDiagnostics)> {
    let built = make_scattering_data(seed, model, traj, states, opts)?;
    let window = (opts.decay_window.0 * opts.horizon, opts.decay_window.1 * opts.horizon);
    let slope = built.report.amplitudes.pb_log_slope(window);
    let cfg = EvolveConfig::new(opts.dt, opts.horizon).with_stride(opts.snapshot_stride);
    let history = evolve(&built.data, model, traj, &cfg)?;
    let free = extract_free_data(&history, model, traj)?;
    let diag = ScatteringDiagnostics {
        stability_residual: built.report.residuals(),
        amplitude_slope: slope,
        pb_decays: slope < 0.0,
        delta: built.delta.clone(),
        residual_trace: built.residual_trace.clone(),
        remainder_times: free.times.clone(),
        remainder_series: free.remainder.clone(),
        remainder_decreasing: free.decreasing_final_third,
        remainder_final_fraction: free.final_fraction(),
        free_data: free.free_data,
    };
    Ok((built, diag))
}
