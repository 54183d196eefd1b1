//! Space-time histories: stored snapshot series and exact free solutions.
//!
//! Both implement [`History`], which exposes full Cauchy data at a time and
//! `x1 = const` planes at arbitrary `(x1, t)`. Planes are what Lorentz
//! resampling and slanted slices consume.

use num_complex::Complex64;

use crate::error::{Result, WaveError};
use crate::fft;
use crate::grid::{CauchyData, Grid3, ScalarField};
use crate::potential::Trajectory;

/// `u`, `u_t` and `d u / d x1` on one `x1 = const` plane, `(x2, x3)` row-major.
#[derive(Debug, Clone)]
pub struct PlaneSample {
    pub u: Vec<f64>,
    pub ut: Vec<f64>,
    pub ux1: Vec<f64>,
}

pub trait History: Sync {
    fn grid(&self) -> Grid3;

    /// Closed time interval covered by the history.
    fn time_range(&self) -> (f64, f64);

    fn data_at(&self, t: f64) -> Result<CauchyData>;

    fn plane_at(&self, x1: f64, t: f64) -> Result<PlaneSample>;

    /// Planes at `(x1_0 + i dx1, t_0 + i dt)` for `i < count`.
    fn plane_sweep(&self, x1_0: f64, dx1: f64, t_0: f64, dt: f64, count: usize) -> Result<Vec<PlaneSample>> {
        (0..count)
            .map(|i| self.plane_at(x1_0 + i as f64 * dx1, t_0 + i as f64 * dt))
            .collect()
    }

    fn check_time(&self, t: f64) -> Result<()> {
        let (a, b) = self.time_range();
        let tol = 1e-9 * (1.0 + a.abs().max(b.abs()));
        if t < a - tol || t > b + tol {
            return Err(WaveError::domain(format!(
                "time {t} outside stored slab [{a}, {b}]"
            )));
        }
        Ok(())
    }
}

/// Periodic trigonometric interpolation weights along one axis.
///
/// Returns value and first-derivative weights for the `n` nodes at
/// offset `x` from node zero, measured in units of the spacing `h`.
pub fn trig_weights(delta: f64, n: usize, h: f64) -> (Vec<f64>, Vec<f64>) {
    let nf = n as f64;
    let pi = std::f64::consts::PI;
    let mut w = vec![0.0; n];
    let mut dw = vec![0.0; n];
    for (j, (wj, dwj)) in w.iter_mut().zip(dw.iter_mut()).enumerate() {
        let d = delta - j as f64;
        let sn = (pi * d / nf).sin();
        let dist = d.rem_euclid(nf);
        let near = dist.min(nf - dist);
        if near < 1e-13 {
            *wj = 1.0;
            *dwj = 0.0;
            continue;
        }
        let tn = (pi * d / nf).tan();
        let s = (pi * d).sin();
        let c = (pi * d).cos();
        *wj = s / (nf * tn);
        *dwj = (pi * c / tn - s * (pi / nf) / (sn * sn)) / (nf * h);
    }
    (w, dw)
}

/// Cubic Hermite basis on `[0, 1]`: weights for `(p0, m0, p1, m1)`.
fn hermite(s: f64) -> [f64; 4] {
    let s2 = s * s;
    let s3 = s2 * s;
    [2.0 * s3 - 3.0 * s2 + 1.0, s3 - 2.0 * s2 + s, -2.0 * s3 + 3.0 * s2, s3 - s2]
}

/// Lagrange weights at `x` for nodes `0, 1, .., m-1`.
fn lagrange(x: f64, m: usize) -> Vec<f64> {
    (0..m)
        .map(|j| {
            let mut w = 1.0;
            for k in 0..m {
                if k != j {
                    w *= (x - k as f64) / (j as f64 - k as f64);
                }
            }
            w
        })
        .collect()
}

/// Snapshot terms `(index, weight on u, weight on u_t)` for a time-interpolated value.
type TimeStencil = Vec<(usize, f64, f64)>;

/// Uniformly spaced snapshots `(u, u_t)`, cubic in time.
///
/// With stored velocities, `u` uses cubic Hermite interpolation and `u_t`
/// four-point Lagrange interpolation; otherwise both use Lagrange.
#[derive(Debug, Clone)]
pub struct SpaceTimeField {
    grid: Grid3,
    t0: f64,
    dt: f64,
    u: Vec<ScalarField>,
    ut: Option<Vec<ScalarField>>,
}

impl SpaceTimeField {
    pub fn new(grid: Grid3, t0: f64, dt: f64, with_velocity: bool) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(WaveError::config(format!("snapshot spacing must be positive, got {dt}")));
        }
        Ok(SpaceTimeField { grid, t0, dt, u: Vec::new(), ut: if with_velocity { Some(Vec::new()) } else { None } })
    }

    pub fn push(&mut self, u: ScalarField, ut: Option<ScalarField>) -> Result<()> {
        self.grid.ensure_same(&u.grid)?;
        match (&mut self.ut, ut) {
            (Some(list), Some(v)) => {
                self.grid.ensure_same(&v.grid)?;
                list.push(v);
            }
            (None, None) => {}
            (Some(_), None) => return Err(WaveError::structural("history stores velocities; none given")),
            (None, Some(_)) => return Err(WaveError::structural("history does not store velocities")),
        }
        self.u.push(u);
        Ok(())
    }

    pub fn push_data(&mut self, data: &CauchyData) -> Result<()> {
        let ut = self.ut.as_ref().map(|_| data.ut.clone());
        self.push(data.u.clone(), ut)
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn time(&self, n: usize) -> f64 {
        self.t0 + n as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|n| self.time(n)).collect()
    }

    pub fn snapshot_u(&self, n: usize) -> &ScalarField {
        &self.u[n]
    }

    pub fn snapshot_ut(&self, n: usize) -> Option<&ScalarField> {
        self.ut.as_ref().map(|v| &v[n])
    }

    pub fn has_velocity(&self) -> bool {
        self.ut.is_some()
    }

    pub fn snapshot(&self, n: usize) -> Result<CauchyData> {
        let ut = self
            .snapshot_ut(n)
            .ok_or_else(|| WaveError::structural("history holds no velocities"))?;
        CauchyData::new(self.u[n].clone(), ut.clone())
    }

    /// Reverses the time direction: `t -> -t`, negating velocities.
    pub fn time_reversed(&self) -> SpaceTimeField {
        let n = self.len();
        let t_end = self.time(n.saturating_sub(1));
        let u: Vec<ScalarField> = self.u.iter().rev().cloned().collect();
        let ut = self.ut.as_ref().map(|v| {
            v.iter()
                .rev()
                .map(|f| {
                    let mut g = f.clone();
                    g.scale(-1.0);
                    g
                })
                .collect()
        });
        SpaceTimeField { grid: self.grid, t0: -t_end, dt: self.dt, u, ut }
    }

    /// Multiplies every stored field by `s`.
    pub fn scaled(&self, s: f64) -> SpaceTimeField {
        let mut out = self.clone();
        for f in out.u.iter_mut() {
            f.scale(s);
        }
        if let Some(v) = out.ut.as_mut() {
            for f in v.iter_mut() {
                f.scale(s);
            }
        }
        out
    }

    /// Lagrange stencil of up to four snapshots around `t`.
    fn lagrange_stencil(&self, t: f64) -> Vec<(usize, f64)> {
        let n = self.len();
        if n == 1 {
            return vec![(0, 1.0)];
        }
        let m = n.min(4);
        let s = (t - self.t0) / self.dt;
        let base = (s.floor() as i64 - (m as i64 / 2 - 1)).clamp(0, (n - m) as i64) as usize;
        let w = lagrange(s - base as f64, m);
        w.into_iter().enumerate().map(|(j, wj)| (base + j, wj)).collect()
    }

    /// Stencil reproducing `u(t)`.
    fn u_stencil(&self, t: f64) -> TimeStencil {
        let n = self.len();
        if self.ut.is_none() || n == 1 {
            return self.lagrange_stencil(t).into_iter().map(|(j, w)| (j, w, 0.0)).collect();
        }
        let s = (t - self.t0) / self.dt;
        let k = (s.floor().max(0.0) as usize).min(n - 2);
        let local = (s - k as f64).clamp(0.0, 1.0);
        let h = hermite(local);
        vec![(k, h[0], h[1] * self.dt), (k + 1, h[2], h[3] * self.dt)]
    }

    /// Stencil reproducing `u_t(t)`.
    fn ut_stencil(&self, t: f64) -> Result<TimeStencil> {
        if self.ut.is_none() {
            return Err(WaveError::structural("history holds no velocities"));
        }
        Ok(self.lagrange_stencil(t).into_iter().map(|(j, w)| (j, 0.0, w)).collect())
    }

    fn combine(&self, stencil: &TimeStencil) -> ScalarField {
        let mut out = ScalarField::zeros(self.grid);
        for &(j, wu, wv) in stencil {
            if wu != 0.0 {
                out.axpy(wu, &self.u[j]);
            }
            if wv != 0.0 {
                if let Some(v) = &self.ut {
                    out.axpy(wv, &v[j]);
                }
            }
        }
        out
    }

    pub fn u_at(&self, t: f64) -> Result<ScalarField> {
        self.check_time(t)?;
        Ok(self.combine(&self.u_stencil(t)))
    }

    pub fn ut_at(&self, t: f64) -> Result<ScalarField> {
        self.check_time(t)?;
        Ok(self.combine(&self.ut_stencil(t)?))
    }

    /// Plane values for an arbitrary stencil: applies weights along `x1`.
    fn plane_from_stencils(&self, x1: f64, u_st: &TimeStencil, ut_st: &TimeStencil) -> PlaneSample {
        let grid = self.grid;
        let n = grid.n();
        let nn = n * n;
        let delta = (x1 - grid.coord(0)) / grid.spacing();
        let (w, dw) = trig_weights(delta, n, grid.spacing());
        let mut u = vec![0.0; nn];
        let mut ux1 = vec![0.0; nn];
        let mut ut = vec![0.0; nn];
        let accumulate = |field: &ScalarField, a: f64, target_val: &mut [f64], deriv: Option<&mut [f64]>| {
            match deriv {
                Some(d) => {
                    for i in 0..n {
                        let (wi, dwi) = (a * w[i], a * dw[i]);
                        let row = &field.data[i * nn..(i + 1) * nn];
                        for ((tv, dv), &f) in target_val.iter_mut().zip(d.iter_mut()).zip(row) {
                            *tv += wi * f;
                            *dv += dwi * f;
                        }
                    }
                }
                None => {
                    for i in 0..n {
                        let wi = a * w[i];
                        if wi == 0.0 {
                            continue;
                        }
                        let row = &field.data[i * nn..(i + 1) * nn];
                        for (tv, &f) in target_val.iter_mut().zip(row) {
                            *tv += wi * f;
                        }
                    }
                }
            }
        };
        for &(j, wu, wv) in u_st {
            if wu != 0.0 {
                accumulate(&self.u[j], wu, &mut u, Some(&mut ux1));
            }
            if wv != 0.0 {
                if let Some(v) = &self.ut {
                    accumulate(&v[j], wv, &mut u, Some(&mut ux1));
                }
            }
        }
        if let Some(v) = &self.ut {
            for &(j, _, wv) in ut_st {
                if wv != 0.0 {
                    accumulate(&v[j], wv, &mut ut, None);
                }
            }
        }
        PlaneSample { u, ut, ux1 }
    }
}

impl History for SpaceTimeField {
    fn grid(&self) -> Grid3 {
        self.grid
    }

    fn time_range(&self) -> (f64, f64) {
        (self.t0, self.time(self.len().saturating_sub(1)))
    }

    fn data_at(&self, t: f64) -> Result<CauchyData> {
        CauchyData::new(self.u_at(t)?, self.ut_at(t)?)
    }

    fn plane_at(&self, x1: f64, t: f64) -> Result<PlaneSample> {
        self.check_time(t)?;
        let u_st = self.u_stencil(t);
        let ut_st = self.ut_stencil(t)?;
        Ok(self.plane_from_stencils(x1, &u_st, &ut_st))
    }
}

/// Exact free evolution of fixed data, evaluated spectrally on demand.
#[derive(Debug, Clone)]
pub struct FreeSolution {
    grid: Grid3,
    u_hat: Vec<Complex64>,
    ut_hat: Vec<Complex64>,
    xi: Vec<f64>,
    t_range: (f64, f64),
}

impl FreeSolution {
    pub fn new(data: &CauchyData, t_range: (f64, f64)) -> Self {
        let grid = data.grid();
        let (u_hat, ut_hat) = fft::forward_pair(&data.u.data, &data.ut.data, grid.n());
        FreeSolution { grid, u_hat, ut_hat, xi: grid.xi_abs(), t_range }
    }

    /// Same solution with time reversed, `u(x, -t)`.
    pub fn time_reversed(&self) -> FreeSolution {
        FreeSolution {
            grid: self.grid,
            u_hat: self.u_hat.clone(),
            ut_hat: self.ut_hat.iter().map(|z| -z).collect(),
            xi: self.xi.clone(),
            t_range: (-self.t_range.1, -self.t_range.0),
        }
    }
}

impl History for FreeSolution {
    fn grid(&self) -> Grid3 {
        self.grid
    }

    fn time_range(&self) -> (f64, f64) {
        self.t_range
    }

    fn data_at(&self, t: f64) -> Result<CauchyData> {
        self.check_time(t)?;
        let len = self.grid.len();
        let mut uh = vec![Complex64::new(0.0, 0.0); len];
        let mut vh = vec![Complex64::new(0.0, 0.0); len];
        for idx in 0..len {
            let k = self.xi[idx];
            let (s, c) = (t * k).sin_cos();
            let sinc = if k == 0.0 { t } else { s / k };
            uh[idx] = self.u_hat[idx] * c + self.ut_hat[idx] * sinc;
            vh[idx] = self.u_hat[idx] * (-k * s) + self.ut_hat[idx] * c;
        }
        let (u, ut) = fft::inverse_pair(&uh, &vh, self.grid.n());
        CauchyData::new(ScalarField { grid: self.grid, data: u }, ScalarField { grid: self.grid, data: ut })
    }

    fn plane_at(&self, x1: f64, t: f64) -> Result<PlaneSample> {
        Ok(self.plane_sweep(x1, 0.0, t, 0.0, 1)?.remove(0))
    }

    fn plane_sweep(&self, x1_0: f64, dx1: f64, t_0: f64, dt: f64, count: usize) -> Result<Vec<PlaneSample>> {
        if count == 0 {
            return Ok(Vec::new());
        }
        self.check_time(t_0)?;
        self.check_time(t_0 + (count - 1) as f64 * dt)?;
        let grid = self.grid;
        let n = grid.n();
        let nn = n * n;
        let len = grid.len();
        let origin = grid.coord(0);

        // Per-mode rotation state (cos, sin) of t |xi|, advanced by dt |xi|.
        let mut cs = vec![(0.0f64, 0.0f64); len];
        let mut step = vec![(0.0f64, 0.0f64); len];
        for idx in 0..len {
            let k = self.xi[idx];
            let (s, c) = (t_0 * k).sin_cos();
            cs[idx] = (c, s);
            let (s1, c1) = (dt * k).sin_cos();
            step[idx] = (c1, s1);
        }
        let kx: Vec<f64> = (0..n).map(|a| grid.wavenumber(a)).collect();
        let kd: Vec<f64> = (0..n).map(|a| grid.derivative_wavenumber(a)).collect();
        let i_unit = Complex64::new(0.0, 1.0);

        let mut out = Vec::with_capacity(count);
        let mut pu = vec![Complex64::new(0.0, 0.0); nn];
        let mut pv = vec![Complex64::new(0.0, 0.0); nn];
        let mut pd = vec![Complex64::new(0.0, 0.0); nn];
        for p in 0..count {
            let x1 = x1_0 + p as f64 * dx1;
            let t = t_0 + p as f64 * dt;
            pu.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
            pv.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
            pd.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
            for a in 0..n {
                let phase = if a == n / 2 {
                    Complex64::new((kx[a] * (x1 - origin)).cos(), 0.0)
                } else {
                    Complex64::from_polar(1.0, kx[a] * (x1 - origin))
                };
                let dphase = phase * i_unit * kd[a];
                let block = a * nn;
                for b in 0..nn {
                    let idx = block + b;
                    let k = self.xi[idx];
                    let (c, s) = cs[idx];
                    let sinc = if k == 0.0 { t } else { s / k };
                    let uh = self.u_hat[idx] * c + self.ut_hat[idx] * sinc;
                    let vh = self.u_hat[idx] * (-k * s) + self.ut_hat[idx] * c;
                    pu[b] += uh * phase;
                    pv[b] += vh * phase;
                    pd[b] += uh * dphase;
                }
            }
            // Advance rotation state for the next plane.
            if p + 1 < count {
                for (st, r) in cs.iter_mut().zip(step.iter()) {
                    let (c, s) = *st;
                    *st = (c * r.0 - s * r.1, s * r.0 + c * r.1);
                }
            }
            let scale = 1.0 / n as f64;
            let mut w: Vec<Complex64> = pu.iter().zip(pv.iter()).map(|(a, b)| (a + i_unit * b) * scale).collect();
            fft::inverse_2d(&mut w, n);
            let mut d: Vec<Complex64> = pd.iter().map(|z| z * scale).collect();
            fft::inverse_2d(&mut d, n);
            out.push(PlaneSample {
                u: w.iter().map(|z| z.re).collect(),
                ut: w.iter().map(|z| z.im).collect(),
                ux1: d.iter().map(|z| z.re).collect(),
            });
        }
        Ok(out)
    }
}

/// Fields a consumer needs from each frame.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FrameRequest {
    pub velocity: bool,
    pub gradient: bool,
}

/// One time level handed to a streaming consumer.
pub struct Frame<'a> {
    pub index: usize,
    pub t: f64,
    pub u: &'a ScalarField,
    pub ut: Option<&'a ScalarField>,
    pub grad: Option<&'a [ScalarField; 3]>,
}

/// Uniformly spaced time levels that can be streamed without storing them all.
pub trait Frames {
    fn grid(&self) -> Grid3;
    fn frame_t0(&self) -> f64;
    fn frame_dt(&self) -> f64;
    fn frame_count(&self) -> usize;
    fn for_each_frame(&self, req: FrameRequest, f: &mut dyn FnMut(Frame<'_>) -> Result<()>) -> Result<()>;

    fn frame_time(&self, n: usize) -> f64 {
        self.frame_t0() + n as f64 * self.frame_dt()
    }

    fn horizon(&self) -> f64 {
        self.frame_time(self.frame_count().saturating_sub(1))
    }
}

impl Frames for SpaceTimeField {
    fn grid(&self) -> Grid3 {
        self.grid
    }

    fn frame_t0(&self) -> f64 {
        self.t0
    }

    fn frame_dt(&self) -> f64 {
        self.dt
    }

    fn frame_count(&self) -> usize {
        self.len()
    }

    fn for_each_frame(&self, req: FrameRequest, f: &mut dyn FnMut(Frame<'_>) -> Result<()>) -> Result<()> {
        if req.velocity && self.ut.is_none() {
            return Err(WaveError::structural("history holds no velocities"));
        }
        for n in 0..self.len() {
            let grad = if req.gradient { Some(crate::grid::gradient(&self.u[n])) } else { None };
            f(Frame {
                index: n,
                t: self.time(n),
                u: &self.u[n],
                ut: if req.velocity { self.snapshot_ut(n) } else { None },
                grad: grad.as_ref(),
            })?;
        }
        Ok(())
    }
}

/// Exact free evolution streamed at `t0 + n dt`, optionally translated to a
/// frame moving along a trajectory: `u(x + v(t), t)`.
#[derive(Debug, Clone)]
pub struct FreeFrames {
    grid: Grid3,
    u_hat: Vec<Complex64>,
    ut_hat: Vec<Complex64>,
    xi: Vec<f64>,
    t0: f64,
    dt: f64,
    count: usize,
    traj: Option<Trajectory>,
}

impl FreeFrames {
    pub fn new(data: &CauchyData, t0: f64, dt: f64, count: usize) -> Self {
        let grid = data.grid();
        let (u_hat, ut_hat) = fft::forward_pair(&data.u.data, &data.ut.data, grid.n());
        FreeFrames { grid, u_hat, ut_hat, xi: grid.xi_abs(), t0, dt, count, traj: None }
    }

    /// Frames covering `[0, horizon]` with step `dt`.
    pub fn over(data: &CauchyData, horizon: f64, dt: f64) -> Self {
        let count = (horizon / dt).round() as usize + 1;
        Self::new(data, 0.0, dt, count)
    }

    pub fn comoving(mut self, traj: Trajectory) -> Self {
        self.traj = Some(traj);
        self
    }

    fn spectra_at(&self, cs: &[(f64, f64)], t: f64) -> (Vec<Complex64>, Vec<Complex64>) {
        let len = self.grid.len();
        let mut uh = Vec::with_capacity(len);
        let mut vh = Vec::with_capacity(len);
        for idx in 0..len {
            let k = self.xi[idx];
            let (c, s) = cs[idx];
            let sinc = if k == 0.0 { t } else { s / k };
            uh.push(self.u_hat[idx] * c + self.ut_hat[idx] * sinc);
            vh.push(self.u_hat[idx] * (-k * s) + self.ut_hat[idx] * c);
        }
        if let Some(traj) = &self.traj {
            let d = traj.position(t);
            crate::grid::apply_shift(&self.grid, &mut uh, d);
            crate::grid::apply_shift(&self.grid, &mut vh, d);
        }
        (uh, vh)
    }

    fn gradient_spectra(&self, uh: &[Complex64]) -> [Vec<Complex64>; 3] {
        let g = self.grid;
        let i = Complex64::new(0.0, 1.0);
        let mut out = [uh.to_vec(), uh.to_vec(), uh.to_vec()];
        for idx in 0..g.len() {
            let (a, b, c) = g.unflatten(idx);
            out[0][idx] *= i * g.derivative_wavenumber(a);
            out[1][idx] *= i * g.derivative_wavenumber(b);
            out[2][idx] *= i * g.derivative_wavenumber(c);
        }
        out
    }
}

impl Frames for FreeFrames {
    fn grid(&self) -> Grid3 {
        self.grid
    }

    fn frame_t0(&self) -> f64 {
        self.t0
    }

    fn frame_dt(&self) -> f64 {
        self.dt
    }

    fn frame_count(&self) -> usize {
        self.count
    }

    fn for_each_frame(&self, req: FrameRequest, f: &mut dyn FnMut(Frame<'_>) -> Result<()>) -> Result<()> {
        let grid = self.grid;
        let n = grid.n();
        let len = grid.len();
        let mut cs: Vec<(f64, f64)> = self.xi.iter().map(|&k| {
            let (s, c) = (self.t0 * k).sin_cos();
            (c, s)
        }).collect();
        let step: Vec<(f64, f64)> = self.xi.iter().map(|&k| {
            let (s, c) = (self.dt * k).sin_cos();
            (c, s)
        }).collect();
        let advance = |cs: &mut Vec<(f64, f64)>, frame: usize| {
            if frame % 64 == 63 {
                // Re-anchor the recurrence to keep rounding from accumulating.
                let t = self.t0 + (frame + 1) as f64 * self.dt;
                for (z, &k) in cs.iter_mut().zip(self.xi.iter()) {
                    let (s, c) = (t * k).sin_cos();
                    *z = (c, s);
                }
            } else {
                for (z, &(c1, s1)) in cs.iter_mut().zip(step.iter()) {
                    let (c, s) = *z;
                    *z = (c * c1 - s * s1, s * c1 + c * s1);
                }
            }
        };
        let wrap = |data: Vec<f64>| ScalarField { grid, data };
        if !req.velocity && !req.gradient {
            // Two frames per complex transform.
            let mut frame = 0;
            while frame < self.count {
                let ta = self.frame_time(frame);
                let (ua, _) = self.spectra_at(&cs, ta);
                advance(&mut cs, frame);
                if frame + 1 < self.count {
                    let tb = self.frame_time(frame + 1);
                    let (ub, _) = self.spectra_at(&cs, tb);
                    advance(&mut cs, frame + 1);
                    let (a, b) = fft::inverse_pair(&ua, &ub, n);
                    let (a, b) = (wrap(a), wrap(b));
                    f(Frame { index: frame, t: ta, u: &a, ut: None, grad: None })?;
                    f(Frame { index: frame + 1, t: tb, u: &b, ut: None, grad: None })?;
                } else {
                    let a = wrap(fft::inverse_real(&ua, n));
                    f(Frame { index: frame, t: ta, u: &a, ut: None, grad: None })?;
                }
                frame += 2;
            }
            return Ok(());
        }
        debug_assert_eq!(cs.len(), len);
        for frame in 0..self.count {
            let t = self.frame_time(frame);
            let (uh, vh) = self.spectra_at(&cs, t);
            advance(&mut cs, frame);
            let (u, ut) = fft::inverse_pair(&uh, &vh, n);
            let (u, ut) = (wrap(u), wrap(ut));
            let grad = if req.gradient {
                let [g1, g2, g3] = self.gradient_spectra(&uh);
                let (a, b) = fft::inverse_pair(&g1, &g2, n);
                let c = fft::inverse_real(&g3, n);
                Some([wrap(a), wrap(b), wrap(c)])
            } else {
                None
            };
            f(Frame { index: frame, t, u: &u, ut: if req.velocity { Some(&ut) } else { None }, grad: grad.as_ref() })?;
        }
        Ok(())
    }
}
