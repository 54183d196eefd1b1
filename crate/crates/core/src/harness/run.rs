//! Configured runs: ensemble generation, estimate evaluation and report files.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::Serialize;
use thiserror::Error;

use crate::error::WaveError;
use crate::evolution::{energy_flux_series, evolve, evolve_observed, total_energy_series, EvolveConfig};
use crate::free_prop::{dispersive_decay_report, simpson_nodes};
use crate::grid::{CauchyData, Grid3};
use crate::harness::config::{Estimate, ExperimentConfig};
use crate::harness::ensemble::{data_norm, member};
use crate::harness::suite::Check;
use crate::history::{FreeFrames, FreeSolution, History, SpaceTimeField};
use crate::io::write_fields;
use crate::lorentz::energy_comparability_report;
use crate::norms::{reversed_norm, reversed_norm_comoving, weighted_local_energy, EstimateReport, Hypothesis, RatioSample};
use crate::potential::{PotentialModel, Trajectory};
use crate::scattering::{boosted_states, make_scattering_data, ScatteringOptions};
use crate::spectral_h::BoundState;

/// A module error tagged with the run stage that raised it.
#[derive(Debug, Error)]
#[error("stage {stage}: {source}")]
pub struct RunError {
    pub stage: String,
    #[source]
    pub source: WaveError,
}

impl RunError {
    fn at(stage: &str) -> impl FnOnce(WaveError) -> RunError + '_ {
        move |source| RunError { stage: stage.to_string(), source }
    }

    pub fn is_config(&self) -> bool {
        matches!(self.source, WaveError::Config(_))
    }

    /// `2` for configuration errors, `1` otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.is_config() {
            2
        } else {
            1
        }
    }
}

pub type RunResult<T> = std::result::Result<T, RunError>;

#[derive(Debug, Clone, Serialize)]
pub struct GridDiagnostics {
    pub n: usize,
    pub length: f64,
    pub spacing: f64,
    pub nyquist: f64,
    pub points: usize,
    /// `L/2 - horizon`, the largest data radius the horizon allows.
    pub causality_radius: f64,
}

impl GridDiagnostics {
    fn new(grid: &Grid3, horizon: f64) -> Self {
        GridDiagnostics {
            n: grid.n(),
            length: grid.length(),
            spacing: grid.spacing(),
            nyquist: std::f64::consts::PI / grid.spacing(),
            points: grid.len(),
            causality_radius: grid.half_length() - horizon,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MemberSummary {
    pub index: usize,
    pub data_norm: f64,
    pub energy_norm: f64,
    pub support_radius: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LedgerEntry {
    pub estimate: String,
    pub hypothesis: Hypothesis,
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateOutcome {
    pub estimate: String,
    pub reports: Vec<EstimateReport>,
    pub checks: Vec<Check>,
}

impl EstimateOutcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub seed: u64,
    pub grid: GridDiagnostics,
    pub ledger: Vec<LedgerEntry>,
    pub members: Vec<MemberSummary>,
    pub estimates: Vec<EstimateOutcome>,
    pub passed: bool,
}

impl RunReport {
    /// `0` when every check passes, `1` otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            1
        }
    }

    pub fn samples_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["estimate", "parameters", "member", "lhs", "rhs", "ratio"]).expect("in-memory csv");
        for est in &self.estimates {
            for rep in &est.reports {
                let params: Vec<String> = rep.parameters.iter().map(|(k, v)| format!("{k}={v}")).collect();
                let params = params.join(";");
                for (i, s) in rep.samples.iter().enumerate() {
                    w.write_record([
                        rep.estimate.clone(),
                        params.clone(),
                        i.to_string(),
                        s.lhs.to_string(),
                        s.rhs.to_string(),
                        s.ratio.to_string(),
                    ])
                    .expect("in-memory csv");
                }
            }
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("csv is utf-8")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Worker count from `WAVELAB_THREADS`, defaulting to the available cores.
pub fn worker_count() -> usize {
    let available = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    std::env::var("WAVELAB_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or(available)
}

/// `f(0..n)` on up to [`worker_count`] threads; results keep index order.
pub fn par_map<T: Send>(n: usize, f: impl Fn(usize) -> crate::Result<T> + Sync) -> crate::Result<Vec<T>> {
    let workers = worker_count().min(n.max(1));
    if workers <= 1 {
        return (0..n).map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<crate::Result<T>>>> = Mutex::new((0..n).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let r = f(i);
                slots.lock().expect("result slots")[i] = Some(r);
            });
        }
    });
    slots.into_inner().expect("result slots").into_iter().map(|r| r.expect("every index ran")).collect()
}

struct RunContext {
    grid: Grid3,
    model: PotentialModel,
    traj: Trajectory,
    config: ExperimentConfig,
}

impl RunContext {
    fn member(&self, index: usize, ground: Option<&BoundState>) -> crate::Result<CauchyData> {
        let mut data = member(self.grid, self.config.data.family, self.config.data.seed, index)?;
        if let Some(s) = ground {
            data.u.axpy(self.config.data.bound_mixture, &s.m);
            data.support_radius = None;
        }
        Ok(data)
    }

    fn evolve_cfg(&self) -> EvolveConfig {
        let s = &self.config.scheme;
        EvolveConfig::new(s.dt, s.horizon).with_stride(s.stride)
    }

    fn frame_dt(&self) -> f64 {
        self.config.scheme.dt * self.config.scheme.stride as f64
    }
}

fn ratio_checks(id: &str, reports: &[EstimateReport]) -> Vec<Check> {
    reports.iter().map(|r| Check::finite(format!("{id}: max ratio"), r.max_ratio)).collect()
}

fn free_estimate(ctx: &RunContext, est: Estimate, members: &[CauchyData]) -> crate::Result<EstimateOutcome> {
    let id = est.id();
    let horizon = ctx.config.scheme.horizon;
    let (reports, mut checks) = match est {
        Estimate::FreeEnergyConservation => {
            let zero = PotentialModel::zero();
            let st = Trajectory::stationary();
            let cfg = EvolveConfig::new(ctx.config.scheme.dt, horizon);
            let samples = par_map(members.len(), |i| {
                let e0 = members[i].free_energy();
                let mut worst = 0.0f64;
                evolve_observed(&members[i], &zero, &st, &cfg, &mut |_, _, d| {
                    worst = worst.max((d.free_energy() - e0).abs());
                    Ok(())
                })?;
                Ok(RatioSample::new(worst, e0))
            })?;
            let rep = EstimateReport::new(id, samples).with_horizon(horizon);
            let check = Check::below(format!("{id}: relative drift"), rep.max_ratio, 1e-10);
            (vec![rep], vec![check])
        }
        Estimate::DispersiveDecay => {
            let t_end = horizon.min(5.0);
            let steps = ((t_end - 1.0) / 0.5).floor().max(1.0) as usize;
            let times: Vec<f64> = (0..=steps).map(|i| 1.0 + (t_end - 1.0) * i as f64 / steps as f64).collect();
            let samples = par_map(members.len(), |i| {
                let rep = dispersive_decay_report(&members[i], &times)?;
                let lhs = rep.rows.iter().map(|r| r.t * r.sup_norm).fold(0.0, f64::max);
                Ok(RatioSample::new(lhs, rep.grad_f_l1 + rep.lap_g_l1))
            })?;
            (vec![EstimateReport::new(id, samples).with_horizon(t_end)], Vec::new())
        }
        Estimate::FreeReversedEndpoint => {
            let samples = par_map(members.len(), |i| {
                let frames = FreeFrames::over(&members[i], horizon, ctx.frame_dt()).comoving(ctx.traj);
                let r = reversed_norm_comoving(&frames, &ctx.traj)?;
                Ok(RatioSample::new(r.value, data_norm(&members[i])))
            })?;
            (vec![EstimateReport::new(id, samples).with_horizon(horizon)], Vec::new())
        }
        Estimate::EnergyComparability => {
            let half = ctx.grid.half_length();
            let free: Vec<FreeSolution> = members.iter().map(|d| FreeSolution::new(d, (-half, half))).collect();
            let refs: Vec<&dyn History> = free.iter().map(|f| f as &dyn History).collect();
            let rep = energy_comparability_report(&refs, &[0.0, 0.3, 0.6, 0.9])?;
            let flat = rep.rows.first().map_or(f64::NAN, |r| r.constant);
            let check = Check::below(format!("{id}: flat slice constant - 1"), flat - 1.0, 1e-6);
            (rep.rows.into_iter().map(|r| r.report).collect(), vec![check])
        }
        _ => unreachable!("perturbed estimates take the evolution path"),
    };
    let mut all = ratio_checks(id, &reports);
    all.append(&mut checks);
    Ok(EstimateOutcome { estimate: id.to_string(), reports, checks: all })
}

/// Per-member quantities of one stored perturbed evolution.
struct PerturbedSample {
    reversed: Option<RatioSample>,
    local: Option<RatioSample>,
    energy: Option<(RatioSample, f64)>,
}

fn perturbed_sample(ctx: &RunContext, data: &CauchyData, selected: &[Estimate]) -> crate::Result<PerturbedSample> {
    let hist: SpaceTimeField = evolve(data, &ctx.model, &ctx.traj, &ctx.evolve_cfg())?;
    let dn = data_norm(data);
    let wants = |e: Estimate| selected.contains(&e);
    let reversed = if wants(Estimate::PerturbedReversedEndpoint) || wants(Estimate::TotalEnergyBound) {
        Some(reversed_norm(&hist, &ctx.traj)?.value)
    } else {
        None
    };
    let local = if wants(Estimate::LocalEnergyDecay) {
        let nu = ctx.traj.boost_speed()?;
        Some(RatioSample::new(weighted_local_energy(&hist, nu, 0.1)?, dn))
    } else {
        None
    };
    let energy = if wants(Estimate::TotalEnergyBound) {
        let series = total_energy_series(&hist, &ctx.model, &ctx.traj)?;
        let sup = series.iter().map(|e| e.energy.abs()).fold(0.0, f64::max);
        let flux = energy_flux_series(&hist, &ctx.model, &ctx.traj)?;
        let nodes = simpson_nodes(0.0, hist.time(hist.len() - 1), hist.dt());
        let variation: f64 = nodes.iter().zip(&flux).map(|((_, w), f)| w * f.flux.abs()).sum();
        let rev = reversed.unwrap_or(f64::NAN);
        Some((RatioSample::new(sup, dn * dn), variation / (ctx.model.grad_l1 * rev * rev)))
    } else {
        None
    };
    let reversed = if wants(Estimate::PerturbedReversedEndpoint) { reversed.map(|r| RatioSample::new(r, dn)) } else { None };
    Ok(PerturbedSample { reversed, local, energy })
}

fn perturbed_estimates(ctx: &RunContext, selected: &[Estimate], members: &[CauchyData]) -> crate::Result<Vec<EstimateOutcome>> {
    let samples = par_map(members.len(), |i| perturbed_sample(ctx, &members[i], selected))?;
    let horizon = ctx.config.scheme.horizon;
    let mut out = Vec::new();
    for &est in selected {
        let id = est.id();
        let outcome = match est {
            Estimate::PerturbedReversedEndpoint => {
                let rep = EstimateReport::new(id, samples.iter().filter_map(|s| s.reversed).collect()).with_horizon(horizon);
                EstimateOutcome { estimate: id.into(), checks: ratio_checks(id, std::slice::from_ref(&rep)), reports: vec![rep] }
            }
            Estimate::LocalEnergyDecay => {
                let rep = EstimateReport::new(id, samples.iter().filter_map(|s| s.local).collect())
                    .with_horizon(horizon)
                    .with_parameter("eps", 0.1);
                EstimateOutcome { estimate: id.into(), checks: ratio_checks(id, std::slice::from_ref(&rep)), reports: vec![rep] }
            }
            Estimate::TotalEnergyBound => {
                let c = samples.iter().filter_map(|s| s.energy.map(|e| e.1)).fold(0.0, f64::max);
                let rep = EstimateReport::new(id, samples.iter().filter_map(|s| s.energy.map(|e| e.0)).collect())
                    .with_horizon(horizon)
                    .with_parameter("variation_constant", c);
                let mut checks = ratio_checks(id, std::slice::from_ref(&rep));
                checks.push(Check::finite(format!("{id}: variation constant"), c));
                EstimateOutcome { estimate: id.into(), checks, reports: vec![rep] }
            }
            _ => continue,
        };
        out.push(outcome);
    }
    Ok(out)
}

fn scattering_estimate(ctx: &RunContext, members: &[CauchyData]) -> crate::Result<EstimateOutcome> {
    let id = Estimate::ScatteringAmplitudes.id();
    let states = boosted_states(&ctx.model, &ctx.traj, &ctx.grid, 1)?;
    let opts = ScatteringOptions {
        dt: ctx.config.scheme.dt,
        horizon: ctx.config.scheme.horizon,
        snapshot_stride: ctx.config.scheme.stride,
        ..ScatteringOptions::default()
    };
    let built = par_map(members.len(), |i| {
        let b = make_scattering_data(&members[i], &ctx.model, &ctx.traj, &states, &opts)?;
        let window = (opts.decay_window.0 * opts.horizon, opts.decay_window.1 * opts.horizon);
        Ok((b.report.max_residual(), b.report.amplitudes.pb_log_slope(window)))
    })?;
    let rep = EstimateReport::new(id, built.iter().map(|b| RatioSample::new(b.0, opts.tol)).collect())
        .with_horizon(opts.horizon)
        .with_parameter("lambda", states[0].lambda);
    let worst_slope = built.iter().map(|b| b.1).fold(f64::NEG_INFINITY, f64::max);
    let checks = vec![
        Check::below(format!("{id}: residual over tolerance"), rep.max_ratio, 1.0),
        Check::below(format!("{id}: largest bound-part log slope"), worst_slope, 0.0),
    ];
    Ok(EstimateOutcome { estimate: id.into(), reports: vec![rep], checks })
}

/// Validates, checks the hypothesis ledger and evaluates every selected estimate.
pub fn run(config: &ExperimentConfig) -> RunResult<RunReport> {
    config.validate().map_err(RunError::at("config"))?;
    let ledger = config.check_ledger().map_err(RunError::at("ledger"))?;
    let grid = config.grid().map_err(RunError::at("config"))?;
    let ctx = RunContext { grid, model: config.model().map_err(RunError::at("config"))?, traj: config.trajectory(), config: config.clone() };
    let mut report = RunReport {
        config: config.clone(),
        config_hash: config.hash(),
        seed: config.data.seed,
        grid: GridDiagnostics::new(&grid, config.scheme.horizon),
        ledger: ledger
            .into_iter()
            .map(|(e, h)| LedgerEntry { estimate: e.id().to_string(), hypothesis: h })
            .collect(),
        members: Vec::new(),
        estimates: Vec::new(),
        passed: true,
    };
    if config.estimates.is_empty() {
        return Ok(report);
    }
    let ground = if config.data.bound_mixture != 0.0 {
        let states = boosted_states(&ctx.model, &ctx.traj, &grid, 1).map_err(RunError::at("bound states"))?;
        let s = states.into_iter().next().ok_or_else(|| RunError {
            stage: "bound states".into(),
            source: WaveError::config("bound-state mixture needs a potential with a bound state"),
        })?;
        Some(s)
    } else {
        None
    };
    let members: Vec<CauchyData> = (0..config.data.ensemble)
        .map(|i| ctx.member(i, ground.as_ref()))
        .collect::<crate::Result<_>>()
        .map_err(RunError::at("ensemble"))?;
    report.members = members
        .iter()
        .enumerate()
        .map(|(index, d)| MemberSummary { index, data_norm: data_norm(d), energy_norm: d.energy_norm(), support_radius: d.support_radius })
        .collect();
    let mut perturbed = Vec::new();
    for &est in &config.estimates {
        match est {
            Estimate::PerturbedReversedEndpoint | Estimate::LocalEnergyDecay | Estimate::TotalEnergyBound => {
                if !perturbed.contains(&est) {
                    perturbed.push(est);
                }
            }
            Estimate::ScatteringAmplitudes => {
                let o = scattering_estimate(&ctx, &members).map_err(RunError::at(est.id()))?;
                report.estimates.push(o);
            }
            _ => {
                let o = free_estimate(&ctx, est, &members).map_err(RunError::at(est.id()))?;
                report.estimates.push(o);
            }
        }
    }
    if !perturbed.is_empty() {
        let mut o = perturbed_estimates(&ctx, &perturbed, &members).map_err(RunError::at("perturbed evolution"))?;
        report.estimates.append(&mut o);
    }
    report.passed = report.estimates.iter().all(|e| e.passed());
    if let Some(dir) = &config.output.dir {
        write_outputs(&report, dir, if config.output.snapshots { members.first() } else { None })
            .map_err(RunError::at("output"))?;
    }
    Ok(report)
}

/// `report.json`, `samples.csv` and, when given, the data snapshot of one member.
pub fn write_outputs(report: &RunReport, dir: &Path, snapshot: Option<&CauchyData>) -> crate::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("report.json"), report.to_json())?;
    std::fs::write(dir.join("samples.csv"), report.samples_csv())?;
    if let Some(d) = snapshot {
        write_fields(dir.join("member0.wvf"), &[&d.u, &d.ut])?;
    }
    Ok(())
}
