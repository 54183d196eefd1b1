//! Periodic cubic grids, real and spectral fields, and Cauchy data.
//!
//! Nodes sit at `x_j = -L/2 + j h` along every axis, so the origin is node
//! `N/2`. Storage is row-major: `(i, j, k) -> (i N + j) N + k` with `i` the
//! first coordinate.

use num_complex::Complex64;

use crate::error::{Result, WaveError};
use crate::fft;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid3 {
    n: usize,
    length: f64,
}

impl Grid3 {
    pub fn new(n: usize, length: f64) -> Result<Self> {
        if n < 8 || !n.is_power_of_two() {
            return Err(WaveError::structural(format!(
                "grid size must be a power of two and at least 8, got {n}"
            )));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(WaveError::structural(format!("box length must be positive, got {length}")));
        }
        Ok(Grid3 { n, length })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(3)
    }

    pub fn coord(&self, j: usize) -> f64 {
        -0.5 * self.length + j as f64 * self.spacing()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n + j) * self.n + k
    }

    #[inline]
    pub fn unflatten(&self, idx: usize) -> (usize, usize, usize) {
        let n = self.n;
        (idx / (n * n), (idx / n) % n, idx % n)
    }

    pub fn point(&self, idx: usize) -> [f64; 3] {
        let (i, j, k) = self.unflatten(idx);
        [self.coord(i), self.coord(j), self.coord(k)]
    }

    /// Signed integer mode number along one axis.
    #[inline]
    pub fn mode(&self, j: usize) -> i64 {
        let n = self.n as i64;
        let j = j as i64;
        if j < n / 2 {
            j
        } else {
            j - n
        }
    }

    /// Angular wavenumber along one axis.
    #[inline]
    pub fn wavenumber(&self, j: usize) -> f64 {
        2.0 * std::f64::consts::PI / self.length * self.mode(j) as f64
    }

    /// Wavenumber used for odd-order derivatives; the Nyquist mode is zeroed.
    #[inline]
    pub fn derivative_wavenumber(&self, j: usize) -> f64 {
        if j == self.n / 2 {
            0.0
        } else {
            self.wavenumber(j)
        }
    }

    pub fn wavevector(&self, idx: usize) -> [f64; 3] {
        let (i, j, k) = self.unflatten(idx);
        [self.wavenumber(i), self.wavenumber(j), self.wavenumber(k)]
    }

    /// `|xi|` for every mode in storage order.
    pub fn xi_abs(&self) -> Vec<f64> {
        let n = self.n;
        let w: Vec<f64> = (0..n).map(|j| self.wavenumber(j)).collect();
        let mut out = Vec::with_capacity(self.len());
        for i in 0..n {
            for j in 0..n {
                let a = w[i] * w[i] + w[j] * w[j];
                for k in 0..n {
                    out.push((a + w[k] * w[k]).sqrt());
                }
            }
        }
        out
    }

    /// Largest radius for which a centered ball stays inside the box.
    pub fn half_length(&self) -> f64 {
        0.5 * self.length
    }

    pub fn ensure_same(&self, other: &Grid3) -> Result<()> {
        if self != other {
            return Err(WaveError::structural(format!(
                "grid mismatch: N={} L={} vs N={} L={}",
                self.n, self.length, other.n, other.length
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: Grid3,
    pub data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid3) -> Self {
        ScalarField { grid, data: vec![0.0; grid.len()] }
    }

    pub fn from_vec(grid: Grid3, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(WaveError::structural(format!(
                "field has {} samples, grid needs {}",
                data.len(),
                grid.len()
            )));
        }
        Ok(ScalarField { grid, data })
    }

    pub fn from_fn(grid: Grid3, f: impl Fn([f64; 3]) -> f64) -> Self {
        let data = (0..grid.len()).map(|idx| f(grid.point(idx))).collect();
        ScalarField { grid, data }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, &v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.data.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Quadrature `integral u v dx`.
    pub fn dot(&self, other: &ScalarField) -> f64 {
        self.data.iter().zip(other.data.iter()).map(|(a, b)| a * b).sum::<f64>()
            * self.grid.cell_volume()
    }

    pub fn l2_norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn l1_norm(&self) -> f64 {
        self.data.iter().map(|v| v.abs()).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn integral(&self) -> f64 {
        self.data.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn scale(&mut self, s: f64) {
        for v in self.data.iter_mut() {
            *v *= s;
        }
    }

    /// `self += s * other`
    pub fn axpy(&mut self, s: f64, other: &ScalarField) {
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += s * b;
        }
    }

    pub fn to_spectral(&self) -> SpectralField {
        SpectralField { grid: self.grid, data: fft::forward_real(&self.data, self.grid.n()) }
    }
}

/// Unnormalized DFT coefficients of a real field.
#[derive(Debug, Clone)]
pub struct SpectralField {
    pub grid: Grid3,
    pub data: Vec<Complex64>,
}

impl SpectralField {
    pub fn to_real(&self) -> ScalarField {
        ScalarField { grid: self.grid, data: fft::inverse_real(&self.data, self.grid.n()) }
    }

    /// `integral |u|^2 dx` through Parseval.
    pub fn l2_norm_sq(&self) -> f64 {
        let norm = self.grid.cell_volume() / self.grid.len() as f64;
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>() * norm
    }
}

/// Value of a homogeneous Sobolev norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SobolevNorm {
    pub value: f64,
    /// Set when a negative order forced the zero mode of a field with
    /// nonzero mean to be dropped.
    pub zero_mode_dropped: bool,
}

/// Homogeneous `H^s` norm `|| |xi|^s u_hat ||` computed spectrally.
pub fn sobolev_norm(field: &ScalarField, s: f64) -> SobolevNorm {
    let grid = field.grid;
    let hat = field.to_spectral();
    let xi = grid.xi_abs();
    let norm = grid.cell_volume() / grid.len() as f64;
    let mut total = 0.0;
    let mut dropped = false;
    for (z, &k) in hat.data.iter().zip(xi.iter()) {
        if k == 0.0 {
            if s == 0.0 {
                total += z.norm_sqr();
            } else if s < 0.0 && z.norm() > 1e-12 * grid.len() as f64 * field.max_abs().max(1e-300) {
                dropped = true;
            }
            continue;
        }
        total += k.powf(2.0 * s) * z.norm_sqr();
    }
    SobolevNorm { value: (total * norm).sqrt(), zero_mode_dropped: dropped }
}

/// Spectral gradient with the Nyquist mode removed.
pub fn gradient(field: &ScalarField) -> [ScalarField; 3] {
    let grid = field.grid;
    let n = grid.n();
    let hat = field.to_spectral();
    let dk: Vec<f64> = (0..n).map(|j| grid.derivative_wavenumber(j)).collect();
    let mut parts: Vec<Vec<Complex64>> = vec![hat.data.clone(), hat.data.clone(), hat.data];
    let i = Complex64::new(0.0, 1.0);
    for idx in 0..grid.len() {
        let (a, b, c) = grid.unflatten(idx);
        parts[0][idx] *= i * dk[a];
        parts[1][idx] *= i * dk[b];
        parts[2][idx] *= i * dk[c];
    }
    let (gx, gy) = fft::inverse_pair(&parts[0], &parts[1], n);
    let gz = fft::inverse_real(&parts[2], n);
    [
        ScalarField { grid, data: gx },
        ScalarField { grid, data: gy },
        ScalarField { grid, data: gz },
    ]
}

/// Spectral derivative along one axis.
pub fn partial(field: &ScalarField, axis: usize) -> ScalarField {
    let grid = field.grid;
    let n = grid.n();
    let mut hat = field.to_spectral();
    let i = Complex64::new(0.0, 1.0);
    for idx in 0..grid.len() {
        let (a, b, c) = grid.unflatten(idx);
        let k = [a, b, c][axis];
        hat.data[idx] *= i * grid.derivative_wavenumber(k);
    }
    ScalarField { grid, data: fft::inverse_real(&hat.data, n) }
}

pub fn laplacian(field: &ScalarField) -> ScalarField {
    let grid = field.grid;
    let mut hat = field.to_spectral();
    for (z, k) in hat.data.iter_mut().zip(grid.xi_abs()) {
        *z *= -k * k;
    }
    hat.to_real()
}

/// A pair `(u, du/dt)` at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct CauchyData {
    pub u: ScalarField,
    pub ut: ScalarField,
    /// Radius of a centered ball containing the support, when known.
    pub support_radius: Option<f64>,
}

impl CauchyData {
    pub fn new(u: ScalarField, ut: ScalarField) -> Result<Self> {
        u.grid.ensure_same(&ut.grid)?;
        Ok(CauchyData { u, ut, support_radius: None })
    }

    pub fn with_support(mut self, radius: f64) -> Self {
        self.support_radius = Some(radius);
        self
    }

    pub fn zeros(grid: Grid3) -> Self {
        CauchyData { u: ScalarField::zeros(grid), ut: ScalarField::zeros(grid), support_radius: None }
    }

    pub fn grid(&self) -> Grid3 {
        self.u.grid
    }

    /// Free energy `1/2 integral |grad u|^2 + |u_t|^2` (spectral gradient term).
    pub fn free_energy(&self) -> f64 {
        let grid = self.grid();
        let hat = self.u.to_spectral();
        let norm = grid.cell_volume() / grid.len() as f64;
        let grad_sq: f64 = hat
            .data
            .iter()
            .zip(grid.xi_abs())
            .map(|(z, k)| k * k * z.norm_sqr())
            .sum::<f64>()
            * norm;
        0.5 * (grad_sq + self.ut.dot(&self.ut))
    }

    /// Energy including `1/2 integral V u^2`.
    pub fn energy_with_potential(&self, potential: &ScalarField) -> f64 {
        let pot: f64 = self
            .u
            .data
            .iter()
            .zip(potential.data.iter())
            .map(|(u, v)| v * u * u)
            .sum::<f64>()
            * self.grid().cell_volume();
        self.free_energy() + 0.5 * pot
    }

    /// Pair inner product `<(u, ut), (v, vt)>` in `L^2 x L^2`.
    pub fn pair_dot(&self, other: &CauchyData) -> f64 {
        self.u.dot(&other.u) + self.ut.dot(&other.ut)
    }

    pub fn axpy(&mut self, s: f64, other: &CauchyData) {
        self.u.axpy(s, &other.u);
        self.ut.axpy(s, &other.ut);
    }

    pub fn scaled(&self, s: f64) -> CauchyData {
        let mut out = self.clone();
        out.u.scale(s);
        out.ut.scale(s);
        out
    }

    /// Radius of the smallest centered ball holding all samples above
    /// `rel_tol` times the peak.
    pub fn measured_support_radius(&self, rel_tol: f64) -> f64 {
        let grid = self.grid();
        let peak = self.u.max_abs().max(self.ut.max_abs());
        if peak == 0.0 {
            return 0.0;
        }
        let thresh = rel_tol * peak;
        let mut r: f64 = 0.0;
        for idx in 0..grid.len() {
            if self.u.data[idx].abs() > thresh || self.ut.data[idx].abs() > thresh {
                let p = grid.point(idx);
                r = r.max((p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt());
            }
        }
        r
    }

    /// Norm of `(u, ut)` in `H^1 x L^2`, homogeneous in the first slot.
    pub fn energy_norm(&self) -> f64 {
        (2.0 * self.free_energy()).sqrt()
    }
}

/// Checks that free propagation for `|t| <= t_max` stays inside the box.
///
/// Compact data supported in a centered ball of radius `R` evolves without
/// wrap-around while `t_max + R <= L/2`.
pub fn check_causality_budget(grid: &Grid3, support_radius: f64, t_max: f64) -> Result<()> {
    let budget = grid.half_length();
    if t_max.abs() + support_radius > budget + 1e-12 {
        return Err(WaveError::config(format!(
            "causality budget violated: |t| = {} plus support radius {} exceeds L/2 = {}",
            t_max.abs(),
            support_radius,
            budget
        )));
    }
    Ok(())
}

/// Complex-valued samples on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    pub grid: Grid3,
    pub data: Vec<Complex64>,
}

impl ComplexField {
    pub fn from_real(re: &ScalarField, im: &ScalarField) -> Result<Self> {
        re.grid.ensure_same(&im.grid)?;
        Ok(ComplexField {
            grid: re.grid,
            data: re.data.iter().zip(im.data.iter()).map(|(&a, &b)| Complex64::new(a, b)).collect(),
        })
    }

    pub fn re(&self) -> ScalarField {
        ScalarField { grid: self.grid, data: self.data.iter().map(|z| z.re).collect() }
    }

    pub fn im(&self) -> ScalarField {
        ScalarField { grid: self.grid, data: self.data.iter().map(|z| z.im).collect() }
    }

    pub fn l2_norm(&self) -> f64 {
        (self.data.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.cell_volume()).sqrt()
    }
}

/// Per-axis phases `e^{i k d}` of a translation, with Nyquist modes kept real.
pub(crate) fn shift_phases(grid: &Grid3, d: f64) -> Vec<Complex64> {
    let n = grid.n();
    (0..n)
        .map(|a| {
            let k = grid.wavenumber(a);
            if a == n / 2 {
                Complex64::new((k * d).cos(), 0.0)
            } else {
                Complex64::from_polar(1.0, k * d)
            }
        })
        .collect()
}

/// Multiplies a spectrum by the translation phase of `x -> x + d`.
pub(crate) fn apply_shift(grid: &Grid3, hat: &mut [Complex64], d: [f64; 3]) {
    if d == [0.0; 3] {
        return;
    }
    let n = grid.n();
    let p: Vec<Vec<Complex64>> = d.iter().map(|&di| shift_phases(grid, di)).collect();
    for a in 0..n {
        for b in 0..n {
            let pab = p[0][a] * p[1][b];
            let row = (a * n + b) * n;
            for c in 0..n {
                hat[row + c] *= pab * p[2][c];
            }
        }
    }
}

/// Periodic translate `x -> field(x + d)` by spectral interpolation.
pub fn shift_field(field: &ScalarField, d: [f64; 3]) -> ScalarField {
    if d == [0.0; 3] {
        return field.clone();
    }
    let mut hat = field.to_spectral();
    apply_shift(&field.grid, &mut hat.data, d);
    hat.to_real()
}
