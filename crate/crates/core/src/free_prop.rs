//! The free wave group on the periodic box.
//!
//! Solutions of `u_tt = Δu` are advanced exactly by per-mode multipliers
//! `cos(t|ξ|)`, `sin(t|ξ|)/|ξ|` and `-|ξ| sin(t|ξ|)`. Compactly supported data
//! can also be evaluated pointwise through Kirchhoff's spherical means, which
//! gives an independent check on the spectral code.

use gauss_quad::GaussLegendre;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Result, WaveError};
use crate::fft::{self, Fft3};
use crate::grid::{check_causality_budget, gradient, laplacian, CauchyData, ComplexField, Grid3, ScalarField};
use crate::history::SpaceTimeField;
use crate::interp::PointInterpolator;

/// Per-mode multipliers of the free group at a fixed time.
#[derive(Debug, Clone)]
pub struct PropagatorMultipliers {
    pub t: f64,
    pub cos_mul: Vec<f64>,
    pub sinc_mul: Vec<f64>,
    pub dsin_mul: Vec<f64>,
}

impl PropagatorMultipliers {
    pub fn new(grid: &Grid3, t: f64) -> Self {
        Self::from_xi(&grid.xi_abs(), t)
    }

    pub fn from_xi(xi: &[f64], t: f64) -> Self {
        let len = xi.len();
        let mut cos_mul = Vec::with_capacity(len);
        let mut sinc_mul = Vec::with_capacity(len);
        let mut dsin_mul = Vec::with_capacity(len);
        for &k in xi {
            let (s, c) = (t * k).sin_cos();
            cos_mul.push(c);
            sinc_mul.push(if k == 0.0 { t } else { s / k });
            dsin_mul.push(-k * s);
        }
        PropagatorMultipliers { t, cos_mul, sinc_mul, dsin_mul }
    }

    /// Applies the multipliers to spectral data in place.
    pub fn apply(&self, u_hat: &mut [Complex64], ut_hat: &mut [Complex64]) {
        for idx in 0..u_hat.len() {
            let (a, b) = (u_hat[idx], ut_hat[idx]);
            u_hat[idx] = a * self.cos_mul[idx] + b * self.sinc_mul[idx];
            ut_hat[idx] = a * self.dsin_mul[idx] + b * self.cos_mul[idx];
        }
    }

    /// Advances `(u, u_t)` in place with one forward and one inverse FFT.
    pub fn step(&self, u: &mut ScalarField, ut: &mut ScalarField) {
        let n = u.grid.n();
        let (mut uh, mut vh) = fft::forward_pair(&u.data, &ut.data, n);
        self.apply(&mut uh, &mut vh);
        let (a, b) = fft::inverse_pair(&uh, &vh, n);
        u.data = a;
        ut.data = b;
    }
}

/// Free propagation to time `t`, enforcing the causality budget when the
/// data carries a support radius.
pub fn propagate_free(data: &CauchyData, t: f64) -> Result<CauchyData> {
    if let Some(r) = data.support_radius {
        check_causality_budget(&data.grid(), r, t)?;
    }
    let mut out = propagate_free_periodic(data, t);
    out.support_radius = data.support_radius.map(|r| r + t.abs());
    Ok(out)
}

/// Free propagation on the torus with no budget check.
pub fn propagate_free_periodic(data: &CauchyData, t: f64) -> CauchyData {
    let mult = PropagatorMultipliers::new(&data.grid(), t);
    let mut u = data.u.clone();
    let mut ut = data.ut.clone();
    mult.step(&mut u, &mut ut);
    CauchyData { u, ut, support_radius: None }
}

/// Half-wave group `exp(i t |ξ|)` applied to a complex field.
pub fn half_wave(f: &ComplexField, t: f64) -> ComplexField {
    let grid = f.grid;
    let plan = Fft3::get(grid.n());
    let mut w = f.data.clone();
    plan.forward(&mut w);
    for (z, k) in w.iter_mut().zip(grid.xi_abs()) {
        *z *= Complex64::from_polar(1.0, t * k);
    }
    plan.inverse(&mut w);
    ComplexField { grid, data: w }
}

/// Product rule on the unit sphere: Gauss-Legendre in `cos θ`, trapezoid in `φ`.
#[derive(Debug, Clone)]
pub struct SphereRule {
    pub nodes: Vec<[f64; 3]>,
    /// Weights summing to one, so the rule returns spherical means.
    pub weights: Vec<f64>,
}

impl SphereRule {
    /// Rule with `n_theta` polar and `2 n_theta` azimuthal nodes.
    pub fn product(n_theta: usize) -> Self {
        let n_theta = n_theta.max(2);
        let n_phi = 2 * n_theta;
        let gl = GaussLegendre::new(n_theta).expect("degree at least 2");
        let mut nodes = Vec::with_capacity(n_theta * n_phi);
        let mut weights = Vec::with_capacity(n_theta * n_phi);
        for &(z, w) in gl.as_node_weight_pairs() {
            let rho = (1.0 - z * z).max(0.0).sqrt();
            for p in 0..n_phi {
                // Offset azimuth per ring to avoid aligning nodes with grid axes.
                let phi = 2.0 * std::f64::consts::PI * (p as f64 + 0.5) / n_phi as f64;
                nodes.push([rho * phi.cos(), rho * phi.sin(), z]);
                weights.push(0.5 * w / n_phi as f64);
            }
        }
        SphereRule { nodes, weights }
    }

    /// Rule at refinement `level`: `6 * 2^level` polar nodes.
    pub fn at_level(level: u32) -> Self {
        Self::product(6usize << level)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Pointwise evaluator of the free solution through Kirchhoff's formula.
///
/// Data and the gradient of the initial position are spectrally upsampled
/// and then interpolated with local eighth-order Lagrange stencils.
pub struct KirchhoffEvaluator {
    coarse: Grid3,
    interp: PointInterpolator,
    level: u32,
}

/// Kirchhoff value with the difference to the next coarser sphere rule.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct KirchhoffValue {
    pub value: f64,
    pub richardson_error: f64,
}

impl KirchhoffEvaluator {
    pub fn new(data: &CauchyData, upsample: usize, level: u32) -> Result<Self> {
        let coarse = data.grid();
        let (gh, fh) = fft::forward_pair(&data.u.data, &data.ut.data, coarse.n());
        let mut parts: Vec<Vec<Complex64>> = vec![gh.clone(), gh.clone(), gh.clone()];
        let i = Complex64::new(0.0, 1.0);
        for idx in 0..coarse.len() {
            let (a, b, c) = coarse.unflatten(idx);
            parts[0][idx] *= i * coarse.derivative_wavenumber(a);
            parts[1][idx] *= i * coarse.derivative_wavenumber(b);
            parts[2][idx] *= i * coarse.derivative_wavenumber(c);
        }
        let [px, py, pz] = <[Vec<Complex64>; 3]>::try_from(parts).expect("three gradient spectra");
        let interp = PointInterpolator::from_spectra(&coarse, vec![gh, fh, px, py, pz], upsample)?;
        Ok(KirchhoffEvaluator { coarse, interp, level })
    }

    pub fn coarse_grid(&self) -> Grid3 {
        self.coarse
    }

    /// Spherical means `(g, f, ω·∇g)` of radius `t` about `x`.
    fn means(&self, x: [f64; 3], t: f64, rule: &SphereRule) -> [f64; 3] {
        let mut acc = [0.0; 3];
        let mut v = [0.0; 5];
        for (node, &w) in rule.nodes.iter().zip(rule.weights.iter()) {
            let y = [x[0] + t * node[0], x[1] + t * node[1], x[2] + t * node[2]];
            self.interp.eval_into(y, &mut v);
            acc[0] += w * v[0];
            acc[1] += w * v[1];
            acc[2] += w * (node[0] * v[2] + node[1] * v[3] + node[2] * v[4]);
        }
        acc
    }

    fn value_with(&self, x: [f64; 3], t: f64, rule: &SphereRule) -> f64 {
        let [mg, mf, mdg] = self.means(x, t, rule);
        mg + t * mdg + t * mf
    }

    /// `u(x, t)` by Kirchhoff's formula.
    pub fn eval(&self, x: [f64; 3], t: f64) -> Result<KirchhoffValue> {
        if !(t > 0.0) {
            return Err(WaveError::domain(format!("Kirchhoff evaluation needs t > 0, got {t}")));
        }
        let half = self.coarse.half_length();
        for (ax, &xi) in x.iter().enumerate() {
            if xi.abs() + t >= half {
                return Err(WaveError::domain(format!(
                    "sphere of radius {t} about x leaves the box along axis {ax}"
                )));
            }
        }
        let fine_rule = SphereRule::at_level(self.level);
        let value = self.value_with(x, t, &fine_rule);
        let coarse_value = if self.level > 0 {
            self.value_with(x, t, &SphereRule::at_level(self.level - 1))
        } else {
            value
        };
        Ok(KirchhoffValue { value, richardson_error: (value - coarse_value).abs() })
    }
}

/// Quadrature nodes and weights on `[a, b]`: Simpson on uniform steps close
/// to `h`, with a three-eighths panel when the step count is odd.
pub fn simpson_nodes(a: f64, b: f64, h: f64) -> Vec<(f64, f64)> {
    let span = b - a;
    if span <= 0.0 {
        return vec![];
    }
    let raw = span / h;
    let m = if (raw - raw.round()).abs() < 1e-9 { raw.round() as usize } else { raw.ceil() as usize };
    let m = m.max(1);
    let dh = span / m as f64;
    let mut w = vec![0.0; m + 1];
    match m {
        1 => {
            w[0] = 0.5 * dh;
            w[1] = 0.5 * dh;
        }
        _ => {
            let simpson_end = if m % 2 == 0 { m } else { m - 3 };
            let mut j = 0;
            while j < simpson_end {
                w[j] += dh / 3.0;
                w[j + 1] += 4.0 * dh / 3.0;
                w[j + 2] += dh / 3.0;
                j += 2;
            }
            if simpson_end < m {
                let c = 3.0 * dh / 8.0;
                w[m - 3] += c;
                w[m - 2] += 3.0 * c;
                w[m - 1] += 3.0 * c;
                w[m] += c;
            }
        }
    }
    w.into_iter().enumerate().map(|(j, wj)| (a + j as f64 * dh, wj)).collect()
}

/// Inhomogeneous free solution `∫_0^t sin((t-s)|D|)/|D| F(s) ds` with its time
/// derivative, by composite Simpson over the snapshot spacing of `forcing`.
pub fn duhamel_free(forcing: &SpaceTimeField, t: f64) -> Result<CauchyData> {
    duhamel_free_between(forcing, 0.0, t, t)
}

/// `∫_a^b sin((t-s)|D|)/|D| F(s) ds` and its `t` derivative.
pub fn duhamel_free_between(forcing: &SpaceTimeField, a: f64, b: f64, t: f64) -> Result<CauchyData> {
    use crate::history::History;
    let grid = forcing.grid();
    let (t0, t1) = forcing.time_range();
    let tol = 1e-9 * (1.0 + t.abs());
    if forcing.is_empty() || a < t0 - tol || b > t1 + tol {
        return Err(WaveError::config(format!(
            "forcing snapshots cover [{t0}, {t1}] but the integral needs [{a}, {b}]"
        )));
    }
    let len = grid.len();
    let mut acc_u = vec![Complex64::new(0.0, 0.0); len];
    let mut acc_v = vec![Complex64::new(0.0, 0.0); len];
    let xi = grid.xi_abs();
    for (s, w) in simpson_nodes(a, b, forcing.dt()) {
        let fs = forcing.u_at(s)?;
        let fh = fft::forward_real(&fs.data, grid.n());
        let tau = t - s;
        for idx in 0..len {
            let k = xi[idx];
            let (sn, c) = (tau * k).sin_cos();
            let sinc = if k == 0.0 { tau } else { sn / k };
            acc_u[idx] += fh[idx] * (w * sinc);
            acc_v[idx] += fh[idx] * (w * c);
        }
    }
    let (u, ut) = fft::inverse_pair(&acc_u, &acc_v, grid.n());
    CauchyData::new(ScalarField { grid, data: u }, ScalarField { grid, data: ut })
}

/// One row of the dispersive-decay table.
#[derive(Debug, Clone, Serialize)]
pub struct DispersiveRow {
    pub t: f64,
    pub sup_norm: f64,
    pub ratio: f64,
    pub budget_ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct DispersiveReport {
    pub rows: Vec<DispersiveRow>,
    /// `‖∇f‖_{L¹}` of the initial velocity.
    pub grad_f_l1: f64,
    /// `‖Δg‖_{L¹}` of the initial position.
    pub lap_g_l1: f64,
    /// Least-squares slope of `log sup|u|` against `log t`.
    pub sup_slope: f64,
    /// Least-squares slope of `log ratio` against `log t`.
    pub ratio_trend: f64,
}

/// `L¹` norm of the Euclidean gradient magnitude.
pub fn gradient_l1(field: &ScalarField) -> f64 {
    let [gx, gy, gz] = gradient(field);
    let sum: f64 = (0..field.data.len())
        .map(|i| (gx.data[i].powi(2) + gy.data[i].powi(2) + gz.data[i].powi(2)).sqrt())
        .sum();
    sum * field.grid.cell_volume()
}

/// Tabulates `t sup|u(t)|` against `‖∇f‖_{L¹} + ‖Δg‖_{L¹}` for compact data.
pub fn dispersive_decay_report(data: &CauchyData, times: &[f64]) -> Result<DispersiveReport> {
    let radius = data
        .support_radius
        .ok_or_else(|| WaveError::config("dispersive report needs compactly supported data"))?;
    let grid = data.grid();
    let grad_f_l1 = gradient_l1(&data.ut);
    let lap_g_l1 = laplacian(&data.u).l1_norm();
    let proxy = grad_f_l1 + lap_g_l1;
    let xi = grid.xi_abs();
    let (gh, fh) = fft::forward_pair(&data.u.data, &data.ut.data, grid.n());
    let mut rows = Vec::with_capacity(times.len());
    for &t in times {
        let mult = PropagatorMultipliers::from_xi(&xi, t);
        let uh: Vec<Complex64> = (0..grid.len())
            .map(|i| gh[i] * mult.cos_mul[i] + fh[i] * mult.sinc_mul[i])
            .collect();
        let u = fft::inverse_real(&uh, grid.n());
        let sup = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        rows.push(DispersiveRow {
            t,
            sup_norm: sup,
            ratio: if proxy > 0.0 { t * sup / proxy } else { 0.0 },
            budget_ok: t.abs() + radius <= grid.half_length() + 1e-12,
        });
    }
    let logs: Vec<(f64, f64, f64)> = rows
        .iter()
        .filter(|r| r.t > 0.0 && r.sup_norm > 0.0)
        .map(|r| (r.t.ln(), r.sup_norm.ln(), r.ratio.max(1e-300).ln()))
        .collect();
    let xs: Vec<f64> = logs.iter().map(|p| p.0).collect();
    let sup_slope = fit_slope(&xs, &logs.iter().map(|p| p.1).collect::<Vec<_>>());
    let ratio_trend = fit_slope(&xs, &logs.iter().map(|p| p.2).collect::<Vec<_>>());
    Ok(DispersiveReport { rows, grad_f_l1, lap_g_l1, sup_slope, ratio_trend })
}

/// Least-squares slope of `y` against `x`; zero for fewer than two points.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len());
    if n < 2 {
        return 0.0;
    }
    let mx = x[..n].iter().sum::<f64>() / n as f64;
    let my = y[..n].iter().sum::<f64>() / n as f64;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for i in 0..n {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx).powi(2);
    }
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Residual of the time-integral identity for velocity data `f`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TimeIntegralIdentity {
    pub t: f64,
    pub t_max: f64,
    /// `sup |sin(t|D|)/|D| f + ∫_t^{t_max} cos(s|D|) f ds|`
    pub sup_residual: f64,
    /// Tail surrogate `‖f‖_{L¹} / t_max`.
    pub tail_bound: f64,
}

/// Evaluates the time-integral identity with Simpson quadrature in `s`.
pub fn time_integral_identity(f: &ScalarField, t: f64, t_max: f64, ds: f64) -> TimeIntegralIdentity {
    let grid = f.grid;
    let fh = f.to_spectral();
    let xi = grid.xi_abs();
    let mut acc: Vec<Complex64> = fh
        .data
        .iter()
        .zip(xi.iter())
        .map(|(z, &k)| z * if k == 0.0 { t } else { (t * k).sin() / k })
        .collect();
    for (s, w) in simpson_nodes(t, t_max, ds) {
        for ((a, z), &k) in acc.iter_mut().zip(fh.data.iter()).zip(xi.iter()) {
            *a += z * (w * (s * k).cos());
        }
    }
    let r = fft::inverse_real(&acc, grid.n());
    TimeIntegralIdentity {
        t,
        t_max,
        sup_residual: r.iter().fold(0.0f64, |m, v| m.max(v.abs())),
        tail_bound: f.l1_norm() / t_max,
    }
}
