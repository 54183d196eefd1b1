//! Reproduction recipes for the acceptance criteria.
//!
//! Each criterion builds its own inputs at desk scale, evaluates the
//! measured quantities and compares them with tolerances pinned below.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Result, WaveError};
use crate::evolution::{
    energy_flux_series, evolve, evolve_observed, picard_solve, total_energy, total_energy_series, EvolveConfig,
    MovingPotential, PicardOptions,
};
use crate::free_prop::{dispersive_decay_report, fit_slope, propagate_free, simpson_nodes, KirchhoffEvaluator};
use crate::grid::{CauchyData, Grid3, ScalarField};
use crate::harness::ensemble::{data_norm, member, DataFamily};
use crate::history::{FreeFrames, FreeSolution};
use crate::lorentz::{flat_energy, slanted_energy, BoostParams};
use crate::norms::{fourier_kernel_identity, reversed_norm, reversed_norm_comoving, weighted_local_energy_at, FourierIdentityOptions};
use crate::potential::{PotentialModel, Trajectory};
use crate::radial::square_well_s_wave;
use crate::scattering::{
    asymptotic_decomposition, discrete_modes, extract_free_data, lab_bound_mode, make_scattering_data,
    riesz_coefficients, scattering_diagnostics, stability_residual, ScatteringOptions,
};
use crate::spectral_h::{agmon_report, bound_states, project_pc, BoundState, Hamiltonian};

pub const KIRCHHOFF_TOL: f64 = 1e-4;
pub const KIRCHHOFF_PROBES: usize = 100;
pub const HUYGENS_TOL: f64 = 1e-8;
pub const FREE_DRIFT_TOL: f64 = 1e-10;
pub const SPLIT_DRIFT_FACTOR: f64 = 5.0;
pub const DISPERSIVE_SLOPE: f64 = -1.0;
pub const DISPERSIVE_SLOPE_TOL: f64 = 0.1;
pub const DISPERSIVE_TREND_TOL: f64 = 0.05;
pub const REVERSED_SPEEDS: [f64; 3] = [0.0, 0.3, 0.6];
pub const REFINEMENT_TREND_TOL: f64 = 0.10;
pub const REFINEMENT_SUBSET: usize = 3;
pub const FOURIER_IDENTITY_TOL: f64 = 1e-3;
pub const EIGENVALUE_TOL: f64 = 1e-4;
pub const AGMON_RATE_TOL: f64 = 0.03;
pub const SLANT_SPEEDS: [f64; 3] = [0.3, 0.6, 0.9];
pub const FLAT_SLANT_TOL: f64 = 1e-6;
pub const CONTRACTION_TOL: f64 = 0.5;
pub const PICARD_WINDOW_PRODUCT: f64 = 0.1;
pub const PICARD_STRANG_TOL: f64 = 1e-5;
pub const GROWTH_SLOPE_TOL: f64 = 0.02;
pub const DECAY_SLOPE_TOL: f64 = 0.05;
pub const STABILITY_TOL: f64 = 1e-6;
pub const REMAINDER_FRACTION_TOL: f64 = 0.10;
pub const ENERGY_TREND_TOL: f64 = 0.05;
pub const LOCAL_ENERGY_SPEEDS: [f64; 2] = [0.0, 0.5];
pub const LOCAL_ENERGY_EPS: f64 = 0.1;
pub const HORIZON_DOUBLING_TOL: f64 = 0.05;
pub const COEFFICIENT_TOL: f64 = 1e-6;

/// One measured quantity against its bound.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub label: String,
    pub value: f64,
    pub bound: String,
    pub passed: bool,
}

impl Check {
    pub fn below(label: impl Into<String>, value: f64, limit: f64) -> Self {
        Check { label: label.into(), value, bound: format!("< {limit:e}"), passed: value < limit }
    }

    pub fn at_most(label: impl Into<String>, value: f64, limit: f64) -> Self {
        Check { label: label.into(), value, bound: format!("<= {limit}"), passed: value <= limit }
    }

    /// `|value - target| < tol`.
    pub fn near(label: impl Into<String>, value: f64, target: f64, tol: f64) -> Self {
        Check {
            label: label.into(),
            value,
            bound: format!("{target} +- {tol}"),
            passed: (value - target).abs() < tol,
        }
    }

    /// `|value / target - 1| < tol`.
    pub fn relative(label: impl Into<String>, value: f64, target: f64, tol: f64) -> Self {
        Check {
            label: label.into(),
            value,
            bound: format!("{target:.6} within {:.1}%", 100.0 * tol),
            passed: (value / target - 1.0).abs() < tol,
        }
    }

    pub fn finite(label: impl Into<String>, value: f64) -> Self {
        Check { label: label.into(), value, bound: "finite".into(), passed: value.is_finite() }
    }

    pub fn holds(label: impl Into<String>, ok: bool) -> Self {
        Check { label: label.into(), value: if ok { 1.0 } else { 0.0 }, bound: "true".into(), passed: ok }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionOutcome {
    pub id: usize,
    pub name: &'static str,
    pub checks: Vec<Check>,
    /// Recorded quantities that carry no bound.
    pub records: Vec<(String, f64)>,
}

impl CriterionOutcome {
    fn new(id: usize) -> Self {
        CriterionOutcome { id, name: CRITERIA[id - 1], checks: Vec::new(), records: Vec::new() }
    }

    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.passed)
    }

    fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    fn record(&mut self, label: impl Into<String>, value: f64) {
        self.records.push((label.into(), value));
    }

    /// `PASS`/`FAIL` line with the first failing check, if any.
    pub fn line(&self) -> String {
        let status = if self.passed() { "PASS" } else { "FAIL" };
        let detail = match self.checks.iter().find(|c| !c.passed) {
            Some(c) => format!("{} = {:.4e} (need {})", c.label, c.value, c.bound),
            None => format!("{} checks", self.checks.len()),
        };
        format!("{status} {:>2} {:<34} {detail}", self.id, self.name)
    }
}

pub const CRITERIA: [&str; 14] = [
    "propagator_cross_validation",
    "strong_huygens",
    "energy_conservation",
    "dispersive_decay",
    "free_reversed_endpoint",
    "fourier_identity",
    "bound_state_eigenvalue",
    "lorentz_energy_comparability",
    "picard_oracle",
    "amplitude_dynamics",
    "scattering_remainder",
    "total_energy_boundedness",
    "local_energy_decay",
    "asymptotic_decomposition",
];

/// Desk-scale parameters shared by the criteria.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SuiteOptions {
    pub n: usize,
    pub length: f64,
    pub dt: f64,
    pub horizon: f64,
    pub ensemble: usize,
    pub seed: u64,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions { n: 64, length: 16.0, dt: 1.0 / 64.0, horizon: 6.0, ensemble: 20, seed: 2024 }
    }
}

impl SuiteOptions {
    fn grid(&self) -> Result<Grid3> {
        Grid3::new(self.n, self.length)
    }

    fn refined(&self) -> Result<Grid3> {
        Grid3::new(2 * self.n, self.length)
    }
}

pub fn criterion_name(id: usize) -> Option<&'static str> {
    CRITERIA.get(id.wrapping_sub(1)).copied()
}

pub fn run_criterion(id: usize, opts: &SuiteOptions) -> Result<CriterionOutcome> {
    match id {
        1 => propagator_cross_validation(opts),
        2 => strong_huygens(opts),
        3 => energy_conservation(opts),
        4 => dispersive_decay(opts),
        5 => free_reversed_endpoint(opts),
        6 => fourier_identity(opts),
        7 => bound_state_eigenvalue(opts),
        8 => lorentz_energy_comparability(opts),
        9 => picard_oracle(opts),
        10 => amplitude_dynamics(opts),
        11 => scattering_remainder(opts),
        12 => total_energy_boundedness(opts),
        13 => local_energy_decay(opts),
        14 => asymptotic_decomposition_criterion(opts),
        _ => Err(WaveError::config(format!("no acceptance criterion {id}"))),
    }
}

/// Markdown table of finished and failed criteria.
pub fn summary_table(results: &[(usize, Result<CriterionOutcome>)]) -> String {
    let mut out = String::from("| # | criterion | status | detail |\n|---|---|---|---|\n");
    for (id, r) in results {
        let name = criterion_name(*id).unwrap_or("?");
        match r {
            Ok(o) => {
                let detail = match o.checks.iter().find(|c| !c.passed) {
                    Some(c) => format!("{} = {:.4e}, need {}", c.label, c.value, c.bound),
                    None => format!("{} checks", o.checks.len()),
                };
                let status = if o.passed() { "PASS" } else { "FAIL" };
                out.push_str(&format!("| {id} | {name} | {status} | {detail} |\n"));
            }
            Err(e) => out.push_str(&format!("| {id} | {name} | ERROR | {e} |\n")),
        }
    }
    out
}

fn default_member(grid: Grid3, seed: u64, index: usize) -> Result<CauchyData> {
    member(grid, DataFamily::default(), seed, index)
}

fn single_state_well() -> Result<PotentialModel> {
    PotentialModel::smoothed_well(6.0, 1.0, 0.15)
}

fn subthreshold_well() -> Result<PotentialModel> {
    PotentialModel::smoothed_well(1.5, 1.2, 0.3)
}

fn decaying_trajectory(mu: f64) -> Trajectory {
    Trajectory::linear_plus_decaying(mu, 0.1, 2.0)
}

/// Offset amplitude of the trajectory in the amplitude and remainder criteria.
const SCATTERING_EPSILON: f64 = 0.01;

fn scattering_trajectory() -> Trajectory {
    Trajectory::linear_plus_decaying(0.0, SCATTERING_EPSILON, 2.0)
}

fn scattering_seed(grid: Grid3, seed: u64, index: usize) -> Result<CauchyData> {
    member(grid, DataFamily::RandomBump { radius: 2.0, power: 8, k_max: 1.0, modes: 4 }, seed, index)
}

fn max_abs_diff(a: &ScalarField, b: &ScalarField) -> f64 {
    a.data.iter().zip(&b.data).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

fn propagator_cross_validation(opts: &SuiteOptions) -> Result<CriterionOutcome> {
    let mut out = CriterionOutcome::new(1);
    let grid = opts.grid()?;
    let data = default_member(grid, opts.seed, 0)?;
    let kirchhoff = KirchhoffEvaluator::new(&data, 2, 3)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let levels = 10;
    let per_level = KIRCHHOFF_PROBES / levels;
    let mut worst = 0.0f64;
    let mut worst_richardson = 0.0f64;
    for _ in 0..levels {
        let t: f64 = rng.random_range(0.5..4.5);
        let exact = propagate_free(&data, t)?;
        for _ in 0..per_level {
            let idx = loop {
                let x = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
                if x.iter().map(|v: &f64| v * v).sum::<f64>() <= 9.0 {
                    let h = grid.spacing();
                    let j = |v: f64| (((v + opts.length / 2.0) / h).round() as usize).min(grid.n() - 1);
                    break grid.index(j(x[0]), j(x[1]), j(x[2]));
                }
            };
            let v = kirchhoff.eval(grid.point(idx), t)?;
            worst = worst.max((v.value - exact.u.data[idx]).abs());
            worst_richardson = worst_richardson.max(v.richardson_error);
        }
    }
    out.check(Check::below("max |kirchhoff - spectral|", worst, KIRCHHOFF_TOL));
    out.record("max sphere-rule refinement difference", worst_richardson);
    Ok(out)
}

fn strong_huygens(opts: &SuiteOptions) -> Result<CriterionOutcome> {
    let mut out = CriterionOutcome::new(2);
    let grid = opts.grid()?;
    let r = 3.5;
    let families = [("position", DataFamily::PositionBump { radius: r, power: 24 }), ("velocity", DataFamily::VelocityBump { radius: r, power: 24 })];
    for (label, family) in families {
        let data = member(grid, family, opts.seed, 0)?;
        for t in [1.5, 3.0, 4.5] {
            let u = propagate_free(&data, t)?.u;
            let peak = u.max_abs();
            let mut outside = 0.0f64;
            for idx in 0..grid.len() {
                let p = grid.point(idx);
                let rho = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
                if rho <= t - r || rho >= t + r {
                    outside = outside.max(u.data[idx].abs());
                }
            }
            out.check(Check::below(format!("{label} bump t={t}: outside/peak"), outside / peak, HUYGENS_TOL));
        }
    }
    Ok(out)
}

fn energy_conservation(opts: &SuiteOptions) -> Result<CriterionOutcome> {
    let mut out = CriterionOutcome::new(3);
    let grid = opts.grid()?;
    let data = default_member(grid, opts.seed, 0)?;
    let e0 = data.free_energy();
    let mut drift = 0.0f64;
    let cfg = EvolveConfig::new(opts.dt, opts.horizon);
    let zero = PotentialModel::zero();
    let st = Trajectory::stationary();
    evolve_observed(&data, &zero, &st, &cfg, &mut |_, _, d| {
        drift = drift.max((d.free_energy() - e0).abs() / e0);
        Ok(())
    })?;
    out.check(Check::below("free relative energy drift", drift, FREE_DRIFT_TOL));
    let model = subthreshold_well()?;
    let pot = MovingPotential::new(&model, &st, grid).at(0.0);
    let ev0 = total_energy(&data, &pot);
    let mut drift_v = 0.0f64;
    evolve_observed(&data, &model, &st, &cfg, &mut |_, _, d| {
        drift_v = drift_v.max((total_energy(d, &pot) - ev0).abs() / ev0);
        Ok(())
    })?;
    out.check(Check::below("stationary-well E_V drift", drift_v, SPLIT_DRIFT_FACTOR * opts.dt * opts.dt));
    Ok(out)
}

fn dispersive_decay(opts: &SuiteOptions) -> Result<CriterionOutcome> {
    let mut out = CriterionOutcome::new(4);
    let grid = opts.grid()?;
    let data = member(grid, DataFamily::VelocityBump { radius: 1.0, power: 8 }, opts.seed, 0)?;
    let times: Vec<f64> = (0..=8).map(|i| 1.0 + 0.5 * i as f64).collect();
    let rep = dispersive_decay_report(&data, &times)?;
    out.check(Check::holds("causality budget at every time", rep.rows.iter().all(|r| r.budget_ok)));
    out.check(Check::near("log-log slope of sup|u|", rep.sup_slope, DISPERSIVE_SLOPE, DISPERSIVE_SLOPE_TOL));
    let max_ratio = rep.rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    out.check(Check::finite("max t sup|u| / data norm", max_ratio));
    out.check(Check::near("ratio trend", rep.ratio_trend, 0.0, DISPERSIVE_TREND_TOL));
    Ok(out)
}

fn reversed_ratio(data: &CauchyData, horizon: f64, frame_dt: f64, ell: f64) -> Result<(f64, bool)> {
    let traj = Trajectory::linear(ell);
    let frames = FreeFrames::over(data, horizon, frame_dt).comoving(traj);
    let r = reversed_norm_comoving(&frames, &traj)?;
    Ok((r.value / data_norm(data), r.wrapped))
}

/// Frame spacing of the time integrals: the free solution is exact between
/// frames, so the norm is sampled at four time steps.
fn norm_frame_dt(opts: &SuiteOptions) -> f64 {
    4.0 * opts.dt
}

fn free_reversed_endpoint(opts: &SuiteOptions) -> Result<CriterionOutcome> {
    let mut out = CriterionOutcome::new(5);
    let grid = opts.grid()?;
    let fine = opts.refined()?;
    let frame_dt = norm_frame_dt(opts);
    for ell in REVERSED_SPEEDS {
        let mut ratios = Vec::with_capacity(opts.ensemble);
        let mut wrapped = 0usize;
        for index in 0..opts.ensemble {
            let data = default_member(grid, opts.seed, index)?;
            let (ratio, w) = reversed_ratio(&data, opts.horizon, frame_dt, ell)?;
            ratios.push((index, ratio));
            wrapped += w as usize;
        }
        let coarse_max = ratios.iter().map(|r| r.1).fold(0.0, f64::max);
        out.check(Check::finite(format!("l={ell}: ensemble max ratio"), coarse_max));
        out.record(format!("l={ell}: members whose sample point wraps"), wrapped as f64);
        ratios.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
        let mut fine_max = 0.0f64;
        for &(index, _) in ratios.iter().take(REFINEMENT_SUBSET) {
            let data = default_member(fine, opts.seed, index)?;
            fine_max = fine_max.max(reversed_ratio(&data, opts.horizon, 0.5 * frame_dt, ell)?.0);
        }
        out.check(Check::below(format!("l={ell}: refinement trend"), fine_max / coarse_max - 1.0, REFINEMENT_TREND_TOL));
    }
    Ok(out)
}

fn fourier_identity(opts: &SuiteOptions) -> Result<CriterionOutcome> {
    let mut out = CriterionOutcome::new(6);
    let grid = opts.grid()?;
    let sigma: f64 = 0.5;
    let f = ScalarField::from_fn(grid, |x| (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / (2.0 * sigma * sigma)).exp());
    let probes = [[0.0, 0.0, 0.0], [1.0, 0.5, -0.3], [-1.7, 0.2, 0.9], [2.5, -1.0, 0.4], [0.3, 2.2, -2.0]];
    for x in probes {
        let id = fourier_kernel_identity(&f, x, &FourierIdentityOptions::default())?;
        out.check(Check::below(format!("probe {x:?}: relative difference"), id.rel_difference, FOURIER_IDENTITY_TOL));
    }
    Ok(out)
}

fn bound_state_eigenvalue(opts: &SuiteOptions) -> Result<CriterionOutcome> {
    let mut out = CriterionOutcome::new(7);
    let model = PotentialModel::spherical_well(4.0, 1.0)?;
    let root = square_well_s_wave(4.0, 1.0)[0];
    let coarse = bound_states(&Hamiltonian::from_model(&model, &opts.grid()?), 1)?;
    let states = bound_states(&Hamiltonian::from_model(&model, &opts.refined()?), 1)?;
    let s = states.first().ok_or_else(|| WaveError::domain("no bound state found for the spherical well"))?;
    if let Some(c) = coarse.first() {
        out.record(format!("N={} eigenvalue error", opts.n), (c.eigenvalue - root).abs());
    }
    out.record("oracle root", root);
    out.check(Check::below(format!("N={} eigenvalue error", 2 * opts.n), (s.eigenvalue - root).abs(), EIGENVALUE_TOL));
    let rep = agmon_report(s, (2.0, 4.5))?;
    out.check(Check::relative("exterior decay rate", rep.fitted_rate, s.lambda, AGMON_RATE_TOL));
    Ok(out)
}

fn slant_family() -> DataFamily {
    DataFamily::RandomBump { radius: 0.75, power: 8, k_max: 1.5, modes: 6 }
}

fn slant_ratio(data: &CauchyData, v: f64, half: f64) -> Result<f64> {
    let free = FreeSolution::new(data, (-half, half));
    Ok(slanted_energy(&free, v, None)? / flat_energy(&free, 0.0, None)?)
}

fn lorentz_energy_comparability(opts: &SuiteOptions) -> Result<CriterionOutcome> {
    let mut out = CriterionOutcome::new(8);
    let grid = opts.grid()?;
    let fine = opts.refined()?;
    let half = 0.5 * opts.length;
    let members: Vec<CauchyData> = (0..opts.ensemble).map(|i| member(grid, slant_family(), opts.seed, i)).collect::<Result<_>>()?;
    let flat_dev = members
        .iter()
        .map(|d| slant_ratio(d, 0.0, half).map(|r| (r - 1.0).abs()))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    out.check(Check::below("v=0: max |ratio - 1|", flat_dev, FLAT_SLANT_TOL));
    for v in SLANT_SPEEDS {
        let mut scored = Vec::with_capacity(members.len());
        for (i, d) in members.iter().enumerate() {
            let r = slant_ratio(d, v, half)?;
            scored.push((i, r.max(1.0 / r)));
        }
        let c = scored.iter().map(|s| s.1).fold(1.0, f64::max);
        out.check(Check::finite(format!("v={v}: C"), c));
        scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
        let mut c_fine = 1.0f64;
        for &(i, _) in scored.iter().take(REFINEMENT_SUBSET) {
            let r = slant_ratio(&member(fine, slant_family(), opts.seed, i)?, v, half)?;
            c_fine = c_fine.max(r.max(1.0 / r));
        }
        out.record(format!("v={v}: C at N={}", 2 * opts.n), c_fine);
        out.check(Check::below(format!("v={v}: C refinement trend"), c_fine / c - 1.0, REFINEMENT_TREND_TOL));
    }
    Ok(out)
}

fn picard_oracle(opts: &SuiteOptions) -> Result<CriterionOutcome> {
    let mut out = CriterionOutcome::new(9);
    let grid = Grid3::new(32, opts.length)?;
    let data = default_member(grid, opts.seed, 0)?;
    let model = PotentialModel::smoothed_well(2.0, 1.2, 0.3)?;
    let st = Trajectory::stationary();
    let dt = 1e-3;
    let t_total = 1.0;
    let popts = PicardOptions { dt, snapshot_stride: 50, ..PicardOptions::default() };
    let sol = picard_solve(&data, &model, &st, t_total, &popts)?;
    out.check(Check::below("T_window sup|V|", sol.window_size_product, PICARD_WINDOW_PRODUCT));
    let ratio = sol.windows.iter().map(|w| w.max_ratio()).fold(0.0, f64::max);
    out.check(Check::at_most("max contraction ratio", ratio, CONTRACTION_TOL));
    let strang = evolve(&data, &model, &st, &EvolveConfig::new(dt, t_total).with_stride(50))?;
    let mut diff = 0.0f64;
    for n in 0..strang.len().min(sol.history.len()) {
        diff = diff.max(max_abs_diff(strang.snapshot_u(n), sol.history.snapshot_u(n)));
    }
    out.check(Check::holds("matching snapshot counts", strang.len() == sol.history.len()));
    out.check(Check::below("sup |strang - picard|", diff, PICARD_STRANG_TOL));
    Ok(out)
}

/// Bound states of the single-state well, with the count recorded.
fn scattering_states(grid: &Grid3, model: &PotentialModel, out: &mut CriterionOutcome) -> Result<Vec<BoundState>> {
    let states = bound_states(&Hamiltonian::from_model(model, grid), 2)?;
    out.record("bound states found", states.len() as f64);
    let s = states.first().ok_or_else(|| WaveError::domain("the scattering well has no bound state"))?;
    out.record("lambda", s.lambda);
    Ok(states)
}

fn scattering_options(opts: &SuiteOptions) -> ScatteringOptions {
    ScatteringOptions { dt: opts.dt, horizon: opts.horizon, ..ScatteringOptions::default() }
}

const SCATTERING_SEEDS: usize = 3;
const DECAY_FIT_WINDOW: (f64, f64) = (0.5, 2.0);

fn amplitude_dynamics(opts: &SuiteOptions) -> Result<CriterionOutcome> {
    let mut out = CriterionOutcome::new(10);
    let grid = opts.grid()?;
    let model = single_state_well()?;
    let states = scattering_states(&grid, &model, &mut out)?;
    let lam = states[0].lambda;
    let traj = scattering_trajectory();
    let sopts = scattering_options(opts);
    for index in 0..SCATTERING_SEEDS {
        let raw = scattering_seed(grid, opts.seed, index)?;
        let generic = stability_residual(&raw, &model, &traj, &states, &sopts)?;
        let growth = generic.amplitudes.log_slope(0, (0.5 * opts.horizon, opts.horizon));
        out.check(Check::relative(format!("seed {index}: generic growth slope"), growth, lam, GROWTH_SLOPE_TOL));
        let built = make_scattering_data(&raw, &model, &traj, &states, &sopts)?;
        let decay = built.report.amplitudes.log_slope(0, DECAY_FIT_WINDOW);
        out.check(Check::relative(format!("seed {index}: scattering-data decay slope"), decay, -lam, DECAY_SLOPE_TOL));
        out.check(Check::below(format!("seed {index}: stability residual"), built.report.max_residual(), STABILITY_TOL));
        out.record(format!("seed {index}: rounds"), built.residual_trace.len() as f64);
    }
    Ok(out)
}

fn scattering_remainder(opts: &SuiteOptions) -> Result<CriterionOutcome> {
    let mut out = CriterionOutcome::new(11);
    let grid = opts.grid()?;
    let model = single_state_well()?;
    let states = scattering_states(&grid, &model, &mut out)?;
    let traj = scattering_trajectory();
    let sopts = scattering_options(opts);
    for index in 0..SCATTERING_SEEDS {
        let raw = scattering_seed(grid, opts.seed, index)?;
        let (_, diag) = scattering_diagnostics(&raw, &model, &traj, &states, &sopts)?;
        out.check(Check::holds(format!("seed {index}: remainder decreasing over final third"), diag.remainder_decreasing));
        out.check(Check::below(format!("seed {index}: final remainder fraction"), diag.remainder_final_fraction, REMAINDER_FRACTION_TOL));
    }
    Ok(out)
}

/// Energy budget of one perturbed run.
struct EnergyBudget {
    sup_ratio: f64,
    trend: f64,
    variation: f64,
    constant: f64,
}

fn energy_budget(data: &CauchyData, model: &PotentialModel, traj: &Trajectory, opts: &SuiteOptions) -> Result<EnergyBudget> {
    let hist = evolve(data, model, traj, &EvolveConfig::new(opts.dt, opts.horizon).with_stride(4))?;
    let dn = data_norm(data);
    let energies = total_energy_series(&hist, model, traj)?;
    let sup = energies.iter().map(|e| e.energy.abs()).fold(0.0, f64::max);
    let (xs, ys): (Vec<f64>, Vec<f64>) = energies
        .iter()
        .filter(|e| e.t >= 1.0)
        .map(|e| (e.t.ln(), (e.energy.abs() / (dn * dn)).ln()))
        .unzip();
    let trend = fit_slope(&xs, &ys);
    let flux = energy_flux_series(&hist, model, traj)?;
    let nodes = simpson_nodes(0.0, hist.time(hist.len() - 1), hist.dt());
    let variation: f64 = nodes.iter().zip(&flux).map(|((_, w), f)| w * f.flux.abs()).sum();
    let rev = reversed_norm(&hist, traj)?.value;
    Ok(EnergyBudget {
        sup_ratio: sup / (dn * dn),
        trend,
        variation,
        constant: variation / (model.grad_l1 * rev * rev),
    })
}

const ENERGY_MEMBERS: usize = 5;

fn total_energy_boundedness(opts: &SuiteOptions) -> Result<CriterionOutcome> {
    let mut out = CriterionOutcome::new(12);
    let grid = opts.grid()?;
    let traj = decaying_trajectory(0.0);
    let smooth = subthreshold_well()?;
    let mut worst_trend = 0.0f64;
    let mut sup = 0.0f64;
    let mut c = 0.0f64;
    for index in 0..ENERGY_MEMBERS.min(opts.ensemble) {
        let b = energy_budget(&default_member(grid, opts.seed, index)?, &smooth, &traj, opts)?;
        worst_trend = if b.trend.abs() > worst_trend.abs() { b.trend } else { worst_trend };
        sup = sup.max(b.sup_ratio);
        c = c.max(b.constant);
        out.record(format!("smoothed well member {index}: energy variation"), b.variation);
    }
    out.check(Check::finite("smoothed well: sup E_V / data norm^2", sup));
    out.check(Check::near("smoothed well: E_V trend", worst_trend, 0.0, ENERGY_TREND_TOL));
    out.check(Check::finite("smoothed well: variation constant C", c));
    out.record("smoothed well: C", c);
    let model = single_state_well()?;
    let states = scattering_states(&grid, &model, &mut out)?;
    let built = make_scattering_data(&scattering_seed(grid, opts.seed, 0)?, &model, &traj, &states, &scattering_options(opts))?;
    let b = energy_budget(&built.data, &model, &traj, opts)?;
    out.check(Check::finite("scattering data: sup E_V / data norm^2", b.sup_ratio));
    out.check(Check::near("scattering data: E_V trend", b.trend, 0.0, ENERGY_TREND_TOL));
    out.check(Check::finite("scattering data: variation constant C", b.constant));
    out.record("scattering data: C", b.constant);
    Ok(out)
}

fn local_energy_decay(opts: &SuiteOptions) -> Result<CriterionOutcome> {
    let mut out = CriterionOutcome::new(13);
    let grid = opts.grid()?;
    let model = subthreshold_well()?;
    let short = 0.5 * opts.horizon;
    for nu in LOCAL_ENERGY_SPEEDS {
        let traj = decaying_trajectory(nu);
        let mut max_short = 0.0f64;
        let mut max_long = 0.0f64;
        for index in 0..opts.ensemble {
            let data = default_member(grid, opts.seed, index)?;
            let hist = evolve(&data, &model, &traj, &EvolveConfig::new(opts.dt, opts.horizon).with_stride(4))?;
            let norms = weighted_local_energy_at(&hist, nu, LOCAL_ENERGY_EPS, &[short, opts.horizon])?;
            let dn = data_norm(&data);
            max_short = max_short.max(norms[0] / dn);
            max_long = max_long.max(norms[1] / dn);
        }
        out.check(Check::finite(format!("nu={nu}: ensemble max ratio"), max_long));
        out.record(format!("nu={nu}: ratio at T={short}"), max_short);
        out.check(Check::below(format!("nu={nu}: horizon-doubling increase"), max_long / max_short - 1.0, HORIZON_DOUBLING_TOL));
    }
    Ok(out)
}

fn asymptotic_decomposition_criterion(opts: &SuiteOptions) -> Result<CriterionOutcome> {
    let mut out = CriterionOutcome::new(14);
    let grid = opts.grid()?;
    let model = single_state_well()?;
    let states = scattering_states(&grid, &model, &mut out)?;
    let active = &states[..1];
    let s = &active[0];
    let mut worst = 0.0f64;
    for index in 0..SCATTERING_SEEDS {
        let raw = scattering_seed(grid, opts.seed, index)?;
        let pc = CauchyData::new(project_pc(&raw.u, &states), project_pc(&raw.ut, &states))?;
        for st in active {
            let (p, m) = riesz_coefficients(&pc, st);
            worst = worst.max(p.abs()).max(m.abs());
        }
    }
    out.check(Check::below("P_c data: max |a_+-|", worst, COEFFICIENT_TOL));
    let traj = Trajectory::stationary();
    let sopts = scattering_options(opts);
    let modes = vec![discrete_modes(&model, s, opts.dt, 0.5 * opts.horizon)?];
    let built = make_scattering_data(&scattering_seed(grid, opts.seed, 0)?, &model, &traj, active, &sopts)?;
    let hist = evolve(&built.data, &model, &traj, &EvolveConfig::new(opts.dt, opts.horizon).with_stride(8))?;
    let free = extract_free_data(&hist, &model, &traj)?.free_data;
    let dec = asymptotic_decomposition(&hist, &traj, active, &free, Some(&modes))?;
    out.check(Check::holds("scattering data: |R(t)| decreasing over final third", dec.decreasing_final_third));
    out.record("scattering data: final |R|", *dec.remainder.last().unwrap_or(&f64::NAN));
    let minus = lab_bound_mode(s, -1.0, &BoostParams::identity(), 0.0);
    let hist = evolve(&minus, &model, &traj, &EvolveConfig::new(opts.dt, opts.horizon).with_stride(8))?;
    let dec = asymptotic_decomposition(&hist, &traj, active, &CauchyData::zeros(grid), Some(&modes))?;
    let c = dec.coefficients[0];
    out.check(Check::below("(m, -lambda m): growing coefficient", c.growing.abs(), COEFFICIENT_TOL));
    out.record("(m, -lambda m): decaying coefficient", c.decaying);
    if let Some((p, _)) = c.discrete {
        out.record("(m, -lambda m): discrete growing coefficient", p);
    }
    Ok(out)
}
