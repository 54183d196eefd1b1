//! Space-time norm estimators and estimate reports.
//!
//! Estimators stream over [`Frames`], so exact free evolutions never have to
//! be stored in full. Time integrals use composite Simpson weights over the
//! frame spacing; suprema in space are maxima over grid nodes.

use gauss_quad::GaussLegendre;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Result, WaveError};
use crate::fft;
use crate::free_prop::{simpson_nodes, SphereRule};
use crate::grid::{apply_shift, shift_field, ScalarField};
use crate::history::{FrameRequest, Frames, SpaceTimeField};
use crate::interp::PointInterpolator;
use crate::potential::Trajectory;

/// Simpson weights for `count` samples spaced by `dt`.
pub fn time_weights(count: usize, dt: f64) -> Vec<f64> {
    if count < 2 {
        return vec![0.0; count];
    }
    simpson_nodes(0.0, (count - 1) as f64 * dt, dt).into_iter().map(|(_, w)| w).collect()
}

fn check_exponent(name: &str, p: f64) -> Result<()> {
    if p >= 1.0 {
        Ok(())
    } else {
        Err(WaveError::config(format!("exponent {name} = {p} must be at least 1")))
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MixedNorm {
    pub value: f64,
    /// `1/p + 3/q = 1/2` with `p > 2`.
    pub admissible: bool,
}

pub fn strichartz_admissible(p: f64, q: f64) -> bool {
    p > 2.0 && (1.0 / p + 3.0 / q - 0.5).abs() < 1e-12
}

/// `‖u‖_{L^p_t L^q_x}`; infinite exponents are maxima.
pub fn mixed_norm(frames: &dyn Frames, p: f64, q: f64) -> Result<MixedNorm> {
    check_exponent("p", p)?;
    check_exponent("q", q)?;
    let grid = frames.grid();
    let cell = grid.cell_volume();
    let mut inner = Vec::with_capacity(frames.frame_count());
    frames.for_each_frame(FrameRequest::default(), &mut |f| {
        let v = if q.is_infinite() {
            f.u.max_abs()
        } else {
            (f.u.data.iter().map(|x| x.abs().powf(q)).sum::<f64>() * cell).powf(1.0 / q)
        };
        inner.push(v);
        Ok(())
    })?;
    let value = if p.is_infinite() {
        inner.iter().cloned().fold(0.0, f64::max)
    } else {
        let w = time_weights(inner.len(), frames.frame_dt());
        inner.iter().zip(w.iter()).map(|(v, w)| w * v.powf(p)).sum::<f64>().powf(1.0 / p)
    };
    Ok(MixedNorm { value, admissible: strichartz_admissible(p, q) })
}

/// `x -> (∫ |u(x + v(t), t)|^2 dt)^{1/2}` over the frames.
pub fn time_l2_field(frames: &dyn Frames, traj: &Trajectory) -> Result<ScalarField> {
    let grid = frames.grid();
    let w = time_weights(frames.frame_count(), frames.frame_dt());
    let mut acc = ScalarField::zeros(grid);
    let moving = !matches!(traj.kind, crate::potential::TrajectoryKind::Stationary);
    frames.for_each_frame(FrameRequest::default(), &mut |f| {
        let wt = w[f.index];
        if moving {
            let s = shift_field(f.u, traj.position(f.t));
            for (a, v) in acc.data.iter_mut().zip(s.data.iter()) {
                *a += wt * v * v;
            }
        } else {
            for (a, v) in acc.data.iter_mut().zip(f.u.data.iter()) {
                *a += wt * v * v;
            }
        }
        Ok(())
    })?;
    acc.data.iter_mut().for_each(|a| *a = a.max(0.0).sqrt());
    Ok(acc)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ReversedNorm {
    pub value: f64,
    /// Grid point attaining the maximum.
    pub argmax: [f64; 3],
    /// The moving sample point crosses the periodic boundary during the run.
    pub wrapped: bool,
}

/// `sup_x (∫ |u(x + v(t), t)|^2 dt)^{1/2}`.
pub fn reversed_norm(frames: &dyn Frames, traj: &Trajectory) -> Result<ReversedNorm> {
    let field = time_l2_field(frames, traj)?;
    Ok(reversed_norm_of(&field, frames, traj))
}

/// Reversed norm of frames that already sit in the moving frame of `traj`.
pub fn reversed_norm_comoving(frames: &dyn Frames, traj: &Trajectory) -> Result<ReversedNorm> {
    let field = time_l2_field(frames, &Trajectory::stationary())?;
    Ok(reversed_norm_of(&field, frames, traj))
}

fn reversed_norm_of(field: &ScalarField, frames: &dyn Frames, traj: &Trajectory) -> ReversedNorm {
    let grid = field.grid;
    let (idx, value) = field
        .data
        .iter()
        .enumerate()
        .fold((0, 0.0), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    let argmax = grid.point(idx);
    let half = grid.half_length();
    let wrapped = (0..frames.frame_count()).any(|n| {
        let d = traj.position(frames.frame_time(n));
        (0..3).any(|a| (argmax[a] + d[a]).abs() > half)
    });
    ReversedNorm { value, argmax, wrapped }
}

/// Lorentz quasinorm `L^{p,q}` of samples, each an atom of measure `cell`.
///
/// The decreasing rearrangement is a step function, so the defining integral
/// `∫ (s^{1/p} f*(s))^q ds/s` is evaluated exactly cell by cell.
pub fn lorentz_quasinorm(values: &[f64], cell: f64, p: f64, q: f64) -> Result<f64> {
    if p.is_infinite() && !q.is_infinite() {
        return Err(WaveError::config("Lorentz space with p = infinity needs q = infinity"));
    }
    if !(p > 1.0) {
        return Err(WaveError::config(format!("Lorentz exponent p = {p} must exceed 1")));
    }
    check_exponent("q", q)?;
    let mut sorted: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    if p.is_infinite() {
        return Ok(sorted.first().copied().unwrap_or(0.0));
    }
    if q.is_infinite() {
        return Ok(sorted
            .iter()
            .enumerate()
            .map(|(i, &v)| ((i + 1) as f64 * cell).powf(1.0 / p) * v)
            .fold(0.0, f64::max));
    }
    let r = q / p;
    let mut total = 0.0;
    for (i, &v) in sorted.iter().enumerate() {
        if v == 0.0 {
            break;
        }
        let a = (i as f64 * cell).powf(r);
        let b = ((i + 1) as f64 * cell).powf(r);
        total += v.powf(q) * (b - a) / r;
    }
    Ok(total.powf(1.0 / q))
}

/// `L^{p,q}` of a field over the box with cell measure `h^3`.
pub fn lorentz_quasinorm_field(field: &ScalarField, p: f64, q: f64) -> Result<f64> {
    lorentz_quasinorm(&field.data, field.grid.cell_volume(), p, q)
}

/// `L^1` along `x1` of the planar `L^{p,q}` over `(x2, x3)` with cell measure `h^2`.
pub fn planar_lorentz_norm(field: &ScalarField, p: f64, q: f64) -> Result<f64> {
    let grid = field.grid;
    let nn = grid.n() * grid.n();
    let h = grid.spacing();
    let mut total = 0.0;
    for plane in field.data.chunks(nn) {
        total += lorentz_quasinorm(plane, h * h, p, q)?;
    }
    Ok(total * h)
}

/// `‖(1 + |x - ν t e1|)^{-1/2-ε} (|∇u| + |u_t|)‖_{L²_{t,x}}` over `[t0, T]`
/// for each horizon `T`, which must be a frame time.
pub fn weighted_local_energy_at(frames: &dyn Frames, nu: f64, eps: f64, horizons: &[f64]) -> Result<Vec<f64>> {
    if !(nu.abs() < 1.0) {
        return Err(WaveError::config(format!("weight speed must satisfy |nu| < 1, got {nu}")));
    }
    if !(eps > 0.0) {
        return Err(WaveError::config("weight exponent offset must be positive"));
    }
    let dt = frames.frame_dt();
    let counts: Vec<usize> = horizons
        .iter()
        .map(|&t| {
            let s = (t - frames.frame_t0()) / dt;
            let n = s.round();
            if (s - n).abs() > 1e-6 || n < 0.0 || n as usize >= frames.frame_count() {
                Err(WaveError::config(format!("horizon {t} is not a frame time")))
            } else {
                Ok(n as usize + 1)
            }
        })
        .collect::<Result<_>>()?;
    let weights: Vec<Vec<f64>> = counts.iter().map(|&c| time_weights(c, dt)).collect();
    let grid = frames.grid();
    let cell = grid.cell_volume();
    let mut acc = vec![0.0; horizons.len()];
    let max_count = counts.iter().copied().max().unwrap_or(0);
    let expo = -1.0 - 2.0 * eps;
    frames.for_each_frame(FrameRequest { velocity: true, gradient: true }, &mut |f| {
        if f.index >= max_count {
            return Ok(());
        }
        let ut = f.ut.ok_or_else(|| WaveError::structural("frames carry no velocity"))?;
        let g = f.grad.ok_or_else(|| WaveError::structural("frames carry no gradient"))?;
        let mut density = 0.0;
        for idx in 0..grid.len() {
            let x = grid.point(idx);
            let r = ((x[0] - nu * f.t).powi(2) + x[1] * x[1] + x[2] * x[2]).sqrt();
            let grad = (g[0].data[idx].powi(2) + g[1].data[idx].powi(2) + g[2].data[idx].powi(2)).sqrt();
            density += (1.0 + r).powf(expo) * (grad + ut.data[idx].abs()).powi(2);
        }
        density *= cell;
        for (a, w) in acc.iter_mut().zip(weights.iter()) {
            if f.index < w.len() {
                *a += w[f.index] * density;
            }
        }
        Ok(())
    })?;
    Ok(acc.into_iter().map(|a| a.sqrt()).collect())
}

pub fn weighted_local_energy(frames: &dyn Frames, nu: f64, eps: f64) -> Result<f64> {
    Ok(weighted_local_energy_at(frames, nu, eps, &[frames.horizon()])?[0])
}

/// `‖u‖_{L²_t L^∞_r L^p_ω}` about the origin, with `L^p` over the unit
/// sphere's surface measure and the `sup` over the listed radii.
pub fn angular_mixed_norm(frames: &dyn Frames, p: f64, radii: &[f64], level: u32) -> Result<f64> {
    if p.is_infinite() {
        return Err(WaveError::config("angular exponent must be finite"));
    }
    check_exponent("p", p)?;
    let grid = frames.grid();
    if radii.iter().any(|&r| !(r >= 0.0) || r >= grid.half_length()) {
        return Err(WaveError::config("sampling radii must lie in [0, L/2)"));
    }
    let rule = SphereRule::at_level(level);
    let area = 4.0 * std::f64::consts::PI;
    let w = time_weights(frames.frame_count(), frames.frame_dt());
    let mut total = 0.0;
    frames.for_each_frame(FrameRequest::default(), &mut |f| {
        let interp = PointInterpolator::new(&[f.u], 1)?;
        let mut best = 0.0f64;
        let mut v = [0.0];
        for &r in radii {
            let mut acc = 0.0;
            for (node, &wn) in rule.nodes.iter().zip(rule.weights.iter()) {
                interp.eval_into([r * node[0], r * node[1], r * node[2]], &mut v);
                acc += wn * v[0].abs().powf(p);
            }
            best = best.max((area * acc).powf(1.0 / p));
        }
        total += w[f.index] * best * best;
        Ok(())
    })?;
    Ok(total.sqrt())
}

/// Two evaluations of the half-wave quantity `‖e^{it|D|}|D|^{-1} f (x)‖_{L²_t(ℝ)}`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FourierIdentity {
    pub x_probe: [f64; 3],
    /// From the time integral of `sin(t|D|)/|D| f` at the probe.
    pub lhs: f64,
    /// `‖G(x, .)‖_{L²_λ}` from the spherical Fourier representation.
    pub rhs: f64,
    pub rel_difference: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct FourierIdentityOptions {
    /// Samples with `|f| <=` this fraction of the maximum are treated as outside the support.
    pub support_tol: f64,
    pub time_panels: usize,
    pub lambda_panels: usize,
    pub nodes_per_panel: usize,
}

impl Default for FourierIdentityOptions {
    fn default() -> Self {
        FourierIdentityOptions { support_tol: 1e-12, time_panels: 8, lambda_panels: 8, nodes_per_panel: 32 }
    }
}

fn panel_rule(a: f64, b: f64, panels: usize, per: usize) -> Vec<(f64, f64)> {
    let gl = GaussLegendre::new(per.max(2)).expect("degree at least 2");
    let width = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(panels * per);
    for p in 0..panels {
        let lo = a + p as f64 * width;
        for &(z, w) in gl.as_node_weight_pairs() {
            out.push((lo + 0.5 * width * (z + 1.0), 0.5 * width * w));
        }
    }
    out
}

/// Compares the time-side and frequency-side norms at a probe point.
///
/// The sine part has half the squared norm of the half-wave term because
/// the two exponentials have disjoint temporal spectra, and it vanishes
/// outside `[|x| - R, |x| + R]` for data supported in `B_R`.
pub fn fourier_kernel_identity(f: &ScalarField, x_probe: [f64; 3], opts: &FourierIdentityOptions) -> Result<FourierIdentity> {
    let grid = f.grid;
    let peak = f.max_abs();
    if peak == 0.0 {
        return Ok(FourierIdentity { x_probe, lhs: 0.0, rhs: 0.0, rel_difference: 0.0 });
    }
    let thresh = opts.support_tol * peak;
    let support: Vec<usize> = (0..grid.len()).filter(|&i| f.data[i].abs() > thresh).collect();
    let support_radius = support
        .iter()
        .map(|&i| {
            let y = grid.point(i);
            (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt()
        })
        .fold(0.0, f64::max)
        + grid.spacing();
    let pr = (x_probe[0].powi(2) + x_probe[1].powi(2) + x_probe[2].powi(2)).sqrt();
    let t_max = pr + support_radius;
    // Periodic images reach the probe only after `L - |x| - R`.
    crate::grid::check_causality_budget(&grid, support_radius, pr)?;

    // Shell sums C_m of the spectrum at the probe, indexed by |mode|^2.
    let n = grid.n();
    let hat = fft::forward_real(&f.data, n);
    let mut probe_hat = hat.clone();
    let origin = grid.coord(0);
    apply_shift(&grid, &mut probe_hat, [x_probe[0] - origin, x_probe[1] - origin, x_probe[2] - origin]);
    let k0 = 2.0 * std::f64::consts::PI / grid.length();
    let max_shell = 3 * (n / 2) * (n / 2);
    let mut shells = vec![0.0f64; max_shell + 1];
    for (idx, z) in probe_hat.iter().enumerate() {
        let (a, b, c) = grid.unflatten(idx);
        let m = (grid.mode(a).pow(2) + grid.mode(b).pow(2) + grid.mode(c).pow(2)) as usize;
        shells[m] += z.re / grid.len() as f64;
    }
    let active: Vec<(f64, f64)> = shells
        .iter()
        .enumerate()
        .filter(|(_, &c)| c != 0.0)
        .map(|(m, &c)| (k0 * (m as f64).sqrt(), c))
        .collect();
    let mut time_sq = 0.0;
    for (t, w) in panel_rule(0.0, t_max, opts.time_panels, opts.nodes_per_panel) {
        let s: f64 = active.iter().map(|&(k, c)| c * if k == 0.0 { t } else { (t * k).sin() / k }).sum();
        time_sq += w * s * s;
    }
    let lhs = 2.0 * time_sq.sqrt();

    let cell = grid.cell_volume();
    let pts: Vec<(f64, f64)> = support
        .iter()
        .map(|&i| {
            let y = grid.point(i);
            let d = ((x_probe[0] - y[0]).powi(2) + (x_probe[1] - y[1]).powi(2) + (x_probe[2] - y[2]).powi(2)).sqrt();
            (d, f.data[i] * cell)
        })
        .collect();
    let lambda_max = 0.5 / grid.spacing();
    let mut freq_sq = 0.0;
    for (lam, w) in panel_rule(0.0, lambda_max, opts.lambda_panels, opts.nodes_per_panel) {
        let two_pi_lam = 2.0 * std::f64::consts::PI * lam;
        let sum: f64 = pts
            .iter()
            .map(|&(d, fv)| {
                let z = two_pi_lam * d;
                fv * if z < 1e-8 { 1.0 - z * z / 6.0 } else { z.sin() / z }
            })
            .sum();
        // 4π j0 is the sphere integral; 1/|D| has symbol 1/(2πλ) in this convention.
        let g = 2.0 * lam * sum;
        freq_sq += w * g * g;
    }
    let rhs = freq_sq.sqrt();
    Ok(FourierIdentity { x_probe, lhs, rhs, rel_difference: (lhs - rhs).abs() / lhs.max(f64::MIN_POSITIVE) })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TruncatedDuhamel {
    pub a: f64,
    /// `sup_x ‖D_A(x + v(t), t)‖_{L²_t[A, T]}`.
    pub norm: f64,
    /// `‖F‖_{L¹_x L²_t} / A`.
    pub bound_proxy: f64,
}

/// `D_A(t) = ∫_0^{t-A} sin((t-s)|D|)/|D| F(s) ds` measured along a trajectory.
pub fn truncated_duhamel_norm(forcing: &SpaceTimeField, a: f64, traj: &Trajectory) -> Result<TruncatedDuhamel> {
    let grid = forcing.grid();
    let dt = forcing.dt();
    let count = forcing.len();
    let t_start = forcing.t0();
    let horizon = forcing.time(count.saturating_sub(1));
    if !(a > 0.0) || a >= horizon - t_start {
        return Err(WaveError::config(format!("cutoff A = {a} must lie in (0, horizon)")));
    }
    let lag0 = (a / dt).round() as usize;
    if ((a / dt) - lag0 as f64).abs() > 1e-6 || lag0 == 0 {
        return Err(WaveError::config("cutoff A must be a positive multiple of the forcing step"));
    }
    let n = grid.n();
    let len = grid.len();
    let xi = grid.xi_abs();
    let spectra: Vec<Vec<Complex64>> = (0..count).map(|i| fft::forward_real(&forcing.snapshot_u(i).data, n)).collect();
    let lags: Vec<Vec<f64>> = (lag0..count)
        .map(|l| {
            let tau = l as f64 * dt;
            xi.iter().map(|&k| if k == 0.0 { tau } else { (tau * k).sin() / k }).collect()
        })
        .collect();
    let out_count = count - lag0;
    let tw = time_weights(out_count, dt);
    let mut acc = vec![0.0f64; len];
    for j in 0..out_count {
        let nidx = lag0 + j;
        let t = forcing.time(nidx);
        let upper = j; // the integral runs over snapshots 0..=j
        let mut dh = vec![Complex64::new(0.0, 0.0); len];
        if upper > 0 {
            let w = time_weights(upper + 1, dt);
            for (i, wi) in w.iter().enumerate() {
                let lag = &lags[nidx - i - lag0];
                let fi = &spectra[i];
                for idx in 0..len {
                    dh[idx] += fi[idx] * (wi * lag[idx]);
                }
            }
        }
        apply_shift(&grid, &mut dh, traj.position(t));
        let d = fft::inverse_real(&dh, n);
        for (s, v) in acc.iter_mut().zip(d.iter()) {
            *s += tw[j] * v * v;
        }
    }
    let norm = acc.iter().cloned().fold(0.0, f64::max).sqrt();
    let fw = time_weights(count, dt);
    let mut ft = vec![0.0f64; len];
    for (i, w) in fw.iter().enumerate() {
        for (s, v) in ft.iter_mut().zip(forcing.snapshot_u(i).data.iter()) {
            *s += w * v * v;
        }
    }
    let l1l2 = ft.iter().map(|s| s.max(0.0).sqrt()).sum::<f64>() * grid.cell_volume();
    Ok(TruncatedDuhamel { a, norm, bound_proxy: l1l2 / a })
}

/// One ensemble sample of an estimate.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RatioSample {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

impl RatioSample {
    pub fn new(lhs: f64, rhs: f64) -> Self {
        let ratio = if rhs > 0.0 { lhs / rhs } else if lhs == 0.0 { 0.0 } else { f64::INFINITY };
        RatioSample { lhs, rhs, ratio }
    }
}

/// A hypothesis of the estimate and whether the run satisfies it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Hypothesis {
    pub name: String,
    pub satisfied: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport {
    pub estimate: String,
    pub parameters: Vec<(String, f64)>,
    pub ensemble_size: usize,
    pub samples: Vec<RatioSample>,
    pub max_ratio: f64,
    /// Relative change of the max ratio under one refinement step.
    pub refinement_trend: Option<f64>,
    pub horizon: Option<f64>,
    pub hypotheses: Vec<Hypothesis>,
}

impl EstimateReport {
    pub fn new(estimate: &str, samples: Vec<RatioSample>) -> Self {
        let max_ratio = samples.iter().map(|s| s.ratio).fold(0.0, f64::max);
        EstimateReport {
            estimate: estimate.to_string(),
            parameters: Vec::new(),
            ensemble_size: samples.len(),
            samples,
            max_ratio,
            refinement_trend: None,
            horizon: None,
            hypotheses: Vec::new(),
        }
    }

    pub fn with_parameter(mut self, name: &str, value: f64) -> Self {
        self.parameters.push((name.to_string(), value));
        self
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = Some(horizon);
        self
    }

    pub fn with_hypotheses(mut self, hypotheses: Vec<Hypothesis>) -> Self {
        self.hypotheses = hypotheses;
        self
    }

    /// Records the trend against the same estimate on a coarser resolution.
    pub fn with_refinement(mut self, coarse: &EstimateReport) -> Self {
        self.refinement_trend = Some(self.max_ratio / coarse.max_ratio - 1.0);
        self
    }

    pub fn min_ratio(&self) -> f64 {
        self.samples.iter().map(|s| s.ratio).fold(f64::INFINITY, f64::min)
    }

    pub fn hypotheses_hold(&self) -> bool {
        self.hypotheses.iter().all(|h| h.satisfied)
    }
}
