//! Potential shapes with decay metadata, and C¹ trajectories.

use gauss_quad::GaussLegendre;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WaveError};
use crate::fft;
use crate::free_prop::fit_slope;
use crate::grid::{Grid3, ScalarField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialKind {
    Zero,
    /// `-depth` inside the ball of `radius`, zero outside.
    SphericalWell { depth: f64, radius: f64 },
    /// Symmetrized Woods-Saxon well
    /// `-depth sinh(a/w) / (cosh(r/w) + cosh(a/w))`.
    SmoothedWell { depth: f64, radius: f64, smoothing: f64 },
    /// Potential for which `tanh(width r) sech(kappa r) / r` is a bound state
    /// with energy `-kappa^2`.
    InverseConstructed { kappa: f64, width: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialModel {
    pub kind: PotentialKind,
    /// The model is `V(x1_scale x1, x2, x3)` of the radial profile.
    pub x1_scale: f64,
    /// Every `alpha` below this value bounds `|V| <= C <x>^-alpha`.
    pub decay_alpha: f64,
    pub sup_norm: f64,
    /// `‖∇V‖_{L¹}`, infinite when the gradient is only a measure.
    pub grad_l1: f64,
}

impl PotentialModel {
    pub fn new(kind: PotentialKind) -> Result<Self> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(WaveError::config(format!("potential parameter {name} must be positive, got {v}")))
            }
        };
        match kind {
            PotentialKind::Zero => {}
            PotentialKind::SphericalWell { depth, radius } => {
                positive("v0", depth)?;
                positive("a", radius)?;
            }
            PotentialKind::SmoothedWell { depth, radius, smoothing } => {
                positive("v0", depth)?;
                positive("a", radius)?;
                positive("smoothing", smoothing)?;
            }
            PotentialKind::InverseConstructed { kappa, width } => {
                positive("kappa", kappa)?;
                positive("width", width)?;
            }
        }
        let mut model = PotentialModel { kind, x1_scale: 1.0, decay_alpha: f64::INFINITY, sup_norm: 0.0, grad_l1: 0.0 };
        model.sup_norm = model.radial_sup();
        model.grad_l1 = model.compute_grad_l1();
        Ok(model)
    }

    pub fn zero() -> Self {
        PotentialModel::new(PotentialKind::Zero).expect("zero potential is valid")
    }

    pub fn spherical_well(depth: f64, radius: f64) -> Result<Self> {
        Self::new(PotentialKind::SphericalWell { depth, radius })
    }

    pub fn smoothed_well(depth: f64, radius: f64, smoothing: f64) -> Result<Self> {
        Self::new(PotentialKind::SmoothedWell { depth, radius, smoothing })
    }

    pub fn inverse_constructed(kappa: f64, width: f64) -> Result<Self> {
        Self::new(PotentialKind::InverseConstructed { kappa, width })
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, PotentialKind::Zero)
    }

    /// Whether every point has radial symmetry (no contraction applied).
    pub fn is_radial(&self) -> bool {
        self.x1_scale == 1.0
    }

    /// Radial profile of the uncontracted potential.
    pub fn radial(&self, r: f64) -> f64 {
        match self.kind {
            PotentialKind::Zero => 0.0,
            PotentialKind::SphericalWell { depth, radius } => {
                if r < radius {
                    -depth
                } else {
                    0.0
                }
            }
            PotentialKind::SmoothedWell { depth, radius, smoothing } => {
                let w = smoothing;
                -depth * (radius / w).sinh() / ((r / w).cosh() + (radius / w).cosh())
            }
            PotentialKind::InverseConstructed { kappa, width } => {
                let b = width;
                let t = (b * r).tanh();
                let tau = (kappa * r).tanh();
                let sech2 = 1.0 - t * t;
                let ratio = if r < 1e-12 { kappa / b } else { tau / t };
                -2.0 * b * b * sech2 - 2.0 * b * kappa * ratio * sech2 + 2.0 * kappa * kappa * (tau * tau - 1.0)
            }
        }
    }

    /// Derivative of the radial profile; `None` where it is not a function.
    pub fn radial_derivative(&self, r: f64) -> Option<f64> {
        match self.kind {
            PotentialKind::Zero => Some(0.0),
            PotentialKind::SphericalWell { .. } => None,
            PotentialKind::SmoothedWell { depth, radius, smoothing } => {
                let w = smoothing;
                let d = (r / w).cosh() + (radius / w).cosh();
                Some(depth * (radius / w).sinh() * (r / w).sinh() / (w * d * d))
            }
            PotentialKind::InverseConstructed { .. } => {
                let h = 1e-5 * (1.0 + r);
                Some((self.radial(r + h) - self.radial((r - h).abs())) / (2.0 * h))
            }
        }
    }

    /// Scaled radius at which the profile is evaluated.
    #[inline]
    pub fn scaled_radius(&self, x: [f64; 3]) -> f64 {
        let a = self.x1_scale * x[0];
        (a * a + x[1] * x[1] + x[2] * x[2]).sqrt()
    }

    /// Radius beyond which `|V|` falls below `tol` times its sup.
    pub fn effective_radius(&self, tol: f64) -> f64 {
        let sup = self.sup_norm;
        if sup == 0.0 {
            return 0.0;
        }
        if let PotentialKind::SphericalWell { radius, .. } = self.kind {
            return radius / self.x1_scale.min(1.0);
        }
        let mut r: f64 = 0.0;
        let mut step = 0.01;
        while r < 1e4 {
            if self.radial(r).abs() < tol * sup && self.radial(r + step).abs() < tol * sup {
                break;
            }
            r += step;
            step *= 1.01;
        }
        r / self.x1_scale.min(1.0)
    }

    fn radial_sup(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..20000 {
            let r = i as f64 * 1e-3;
            m = m.max(self.radial(r).abs());
        }
        m
    }

    fn compute_grad_l1(&self) -> f64 {
        match self.kind {
            PotentialKind::Zero => 0.0,
            PotentialKind::SphericalWell { .. } => f64::INFINITY,
            _ => {
                // ∫|∇V_s| = (1/s) ∫ |V'(r)| r^2 dr ∫_{S^2} sqrt(s^2 ω1^2 + ω2^2 + ω3^2) dω
                let s = self.x1_scale;
                let gl = GaussLegendre::new(64).expect("valid degree");
                let angular = 2.0 * std::f64::consts::PI
                    * gl.integrate(-1.0, 1.0, |z| (s * s * z * z + 1.0 - z * z).sqrt());
                let r_max = 60.0;
                let panels = 240;
                let mut radial = 0.0;
                for p in 0..panels {
                    let a = r_max * p as f64 / panels as f64;
                    let b = r_max * (p + 1) as f64 / panels as f64;
                    radial += gl.integrate(a, b, |r| self.radial_derivative(r).unwrap_or(0.0).abs() * r * r);
                }
                radial * angular / s
            }
        }
    }

    pub fn eval(&self, x: [f64; 3]) -> f64 {
        self.radial(self.scaled_radius(x))
    }

    /// `V(x - v(t))` for a moving potential.
    pub fn eval_moving(&self, traj: &Trajectory, x: [f64; 3], t: f64) -> f64 {
        let c = traj.position(t);
        self.eval([x[0] - c[0], x[1] - c[1], x[2] - c[2]])
    }

    /// Samples `V(x - center)` on the grid.
    ///
    /// A discontinuous well is represented by its band-limited projection onto
    /// the grid's Fourier modes, computed from its exact Fourier transform.
    pub fn sample(&self, grid: &Grid3, center: [f64; 3]) -> ScalarField {
        match self.kind {
            PotentialKind::SphericalWell { depth, radius } => self.sample_band_limited(grid, center, depth, radius),
            _ => ScalarField::from_fn(*grid, |x| self.eval([x[0] - center[0], x[1] - center[1], x[2] - center[2]])),
        }
    }

    fn sample_band_limited(&self, grid: &Grid3, center: [f64; 3], depth: f64, radius: f64) -> ScalarField {
        let s = self.x1_scale;
        let x0 = grid.coord(0);
        let mut hat = vec![Complex64::new(0.0, 0.0); grid.len()];
        for (idx, z) in hat.iter_mut().enumerate() {
            let k = grid.wavevector(idx);
            let q = ((k[0] / s).powi(2) + k[1] * k[1] + k[2] * k[2]).sqrt();
            let ft = -depth * 4.0 * std::f64::consts::PI * radius.powi(3) * ball_kernel(q * radius) / s;
            let phase = k[0] * (x0 - center[0]) + k[1] * (x0 - center[1]) + k[2] * (x0 - center[2]);
            *z = Complex64::from_polar(ft, phase);
        }
        let vals = fft::inverse_real(&hat, grid.n());
        let scale = grid.len() as f64 / grid.length().powi(3);
        ScalarField { grid: *grid, data: vals.into_iter().map(|v| v * scale).collect() }
    }
}

/// `j1(x)/x = (sin x - x cos x)/x^3`, equal to `1/3` at zero.
fn ball_kernel(x: f64) -> f64 {
    if x.abs() < 1e-3 {
        let x2 = x * x;
        1.0 / 3.0 - x2 / 30.0 + x2 * x2 / 840.0
    } else {
        (x.sin() - x * x.cos()) / (x * x * x)
    }
}

/// `V(sqrt(1 - mu^2) x1, x2, x3)`.
pub fn lorentz_contracted_potential(model: &PotentialModel, mu: f64) -> Result<PotentialModel> {
    if !(mu.abs() < 1.0) {
        return Err(WaveError::domain(format!("boost speed must satisfy |mu| < 1, got {mu}")));
    }
    let mut out = *model;
    out.x1_scale *= (1.0 - mu * mu).sqrt();
    out.grad_l1 = out.compute_grad_l1();
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrajectoryKind {
    Stationary,
    /// `v(t) = mu t`.
    Linear { mu: [f64; 3] },
    /// `v(t) = mu t + epsilon <t>^-beta e1`.
    LinearPlusDecaying { mu: [f64; 3], epsilon: f64, beta: f64 },
    /// Velocity ramps from `v_in` to `v_out` around `t_switch` over `width`.
    SmoothedPiecewise { v_in: [f64; 3], v_out: [f64; 3], t_switch: f64, width: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub kind: TrajectoryKind,
}

fn japanese(t: f64) -> f64 {
    (1.0 + t * t).sqrt()
}

fn ln_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

impl Trajectory {
    pub fn new(kind: TrajectoryKind) -> Self {
        Trajectory { kind }
    }

    pub fn stationary() -> Self {
        Trajectory { kind: TrajectoryKind::Stationary }
    }

    pub fn linear(mu: f64) -> Self {
        Trajectory { kind: TrajectoryKind::Linear { mu: [mu, 0.0, 0.0] } }
    }

    pub fn linear_plus_decaying(mu: f64, epsilon: f64, beta: f64) -> Self {
        Trajectory { kind: TrajectoryKind::LinearPlusDecaying { mu: [mu, 0.0, 0.0], epsilon, beta } }
    }

    pub fn position(&self, t: f64) -> [f64; 3] {
        match self.kind {
            TrajectoryKind::Stationary => [0.0; 3],
            TrajectoryKind::Linear { mu } => [mu[0] * t, mu[1] * t, mu[2] * t],
            TrajectoryKind::LinearPlusDecaying { mu, epsilon, beta } => {
                [mu[0] * t + epsilon * japanese(t).powf(-beta), mu[1] * t, mu[2] * t]
            }
            TrajectoryKind::SmoothedPiecewise { v_in, v_out, t_switch, width } => {
                let ramp = |t: f64| 0.5 * (t - t_switch + width * ln_cosh((t - t_switch) / width));
                let r = ramp(t) - ramp(0.0);
                [0, 1, 2].map(|i| v_in[i] * t + (v_out[i] - v_in[i]) * r)
            }
        }
    }

    pub fn velocity(&self, t: f64) -> [f64; 3] {
        match self.kind {
            TrajectoryKind::Stationary => [0.0; 3],
            TrajectoryKind::Linear { mu } => mu,
            TrajectoryKind::LinearPlusDecaying { mu, epsilon, beta } => {
                [mu[0] - epsilon * beta * t * japanese(t).powf(-beta - 2.0), mu[1], mu[2]]
            }
            TrajectoryKind::SmoothedPiecewise { v_in, v_out, t_switch, width } => {
                let s = 0.5 * (1.0 + ((t - t_switch) / width).tanh());
                [0, 1, 2].map(|i| v_in[i] + (v_out[i] - v_in[i]) * s)
            }
        }
    }

    /// Asymptotic velocity `mu`.
    pub fn asymptotic_velocity(&self) -> [f64; 3] {
        match self.kind {
            TrajectoryKind::Stationary => [0.0; 3],
            TrajectoryKind::Linear { mu } | TrajectoryKind::LinearPlusDecaying { mu, .. } => mu,
            TrajectoryKind::SmoothedPiecewise { v_out, .. } => v_out,
        }
    }

    /// Exponent `beta` with `|v(t) - mu t| <= C <t>^-beta`.
    pub fn decay_beta(&self) -> f64 {
        match self.kind {
            TrajectoryKind::Stationary | TrajectoryKind::Linear { .. } => f64::INFINITY,
            TrajectoryKind::LinearPlusDecaying { epsilon, beta, .. } => {
                if epsilon == 0.0 {
                    f64::INFINITY
                } else {
                    beta
                }
            }
            TrajectoryKind::SmoothedPiecewise { .. } => 0.0,
        }
    }

    pub fn is_linear(&self) -> bool {
        match self.kind {
            TrajectoryKind::Stationary | TrajectoryKind::Linear { .. } => true,
            TrajectoryKind::LinearPlusDecaying { epsilon, .. } => epsilon == 0.0,
            TrajectoryKind::SmoothedPiecewise { v_in, v_out, .. } => v_in == v_out,
        }
    }

    /// Speed along the first axis of the asymptotic velocity, rejecting
    /// motion along other axes.
    pub fn boost_speed(&self) -> Result<f64> {
        let mu = self.asymptotic_velocity();
        if mu[1] != 0.0 || mu[2] != 0.0 {
            return Err(WaveError::config("boosts are implemented along the first axis only"));
        }
        Ok(mu[0])
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AdmissibilityReport {
    pub ok: bool,
    /// Largest sampled finite-difference speed.
    pub speed_bound: f64,
    /// Fitted decay exponent of `|v(t) - mu t|`; `None` when it vanishes.
    pub beta_fit: Option<f64>,
    pub linear: bool,
}

/// Samples the trajectory densely, measuring its speed and decay exponent.
pub fn admissibility_check(traj: &Trajectory, t_range: (f64, f64)) -> Result<AdmissibilityReport> {
    let (a, b) = t_range;
    if !(a.is_finite() && b.is_finite() && b > a) {
        return Err(WaveError::config(format!("invalid time range [{a}, {b}]")));
    }
    let samples = 20000;
    let dt = (b - a) / samples as f64;
    let mut speed_bound: f64 = 0.0;
    let mut prev = traj.position(a);
    for i in 1..=samples {
        let t = a + i as f64 * dt;
        let p = traj.position(t);
        let d = ((p[0] - prev[0]).powi(2) + (p[1] - prev[1]).powi(2) + (p[2] - prev[2]).powi(2)).sqrt() / dt;
        if d >= 1.0 {
            return Err(WaveError::config(format!(
                "inadmissible trajectory: speed {d} >= 1 near t = {t}"
            )));
        }
        speed_bound = speed_bound.max(d);
        prev = p;
    }
    let mu = traj.asymptotic_velocity();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in 0..=200 {
        let t = a + (b - a) * i as f64 / 200.0;
        let p = traj.position(t);
        let dev = ((p[0] - mu[0] * t).powi(2) + (p[1] - mu[1] * t).powi(2) + (p[2] - mu[2] * t).powi(2)).sqrt();
        if dev > 1e-300 && t.abs() >= 1.0 {
            xs.push(japanese(t).ln());
            ys.push(dev.ln());
        }
    }
    let beta_fit = if xs.len() >= 2 { Some(-fit_slope(&xs, &ys)) } else { None };
    Ok(AdmissibilityReport { ok: true, speed_bound, beta_fit, linear: traj.is_linear() })
}
