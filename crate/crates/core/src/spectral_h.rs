//! The grid Hamiltonian `H = -Δ + V`, its negative-energy bound states,
//! spectral projections and exterior decay diagnostics.
//!
//! Bound states come from block shift-and-invert iteration: each sweep solves
//! `(H - σ) Y = X` column by column with preconditioned conjugate gradients and
//! then applies Rayleigh-Ritz on the span of `Y`.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Result, WaveError};
use crate::fft::Fft3;
use crate::free_prop::fit_slope;
use crate::grid::{Grid3, ScalarField};
use crate::potential::PotentialModel;

#[derive(Debug, Clone)]
pub struct Hamiltonian {
    grid: Grid3,
    potential: ScalarField,
    k2: Vec<f64>,
}

impl Hamiltonian {
    pub fn new(potential: ScalarField) -> Self {
        let grid = potential.grid;
        let k2 = grid.xi_abs().into_iter().map(|k| k * k).collect();
        Hamiltonian { grid, potential, k2 }
    }

    /// Hamiltonian of a potential centered at the origin.
    pub fn from_model(model: &PotentialModel, grid: &Grid3) -> Self {
        Self::new(model.sample(grid, [0.0; 3]))
    }

    pub fn grid(&self) -> Grid3 {
        self.grid
    }

    pub fn potential(&self) -> &ScalarField {
        &self.potential
    }

    /// Applies a real even Fourier multiplier to two real vectors at once.
    fn multiplier_pair(&self, a: &[f64], b: Option<&[f64]>, mult: impl Fn(usize) -> f64) -> (Vec<f64>, Option<Vec<f64>>) {
        let plan = Fft3::get(self.grid.n());
        let mut w: Vec<Complex64> = match b {
            Some(b) => a.iter().zip(b.iter()).map(|(&x, &y)| Complex64::new(x, y)).collect(),
            None => a.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        };
        plan.forward(&mut w);
        for (i, z) in w.iter_mut().enumerate() {
            *z *= mult(i);
        }
        plan.inverse(&mut w);
        let re = w.iter().map(|z| z.re).collect();
        let im = b.map(|_| w.iter().map(|z| z.im).collect());
        (re, im)
    }

    fn apply_many_with(&self, vs: &[&[f64]], shift: f64) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(vs.len());
        for chunk in vs.chunks(2) {
            let (a, b) = self.multiplier_pair(chunk[0], chunk.get(1).copied(), |i| self.k2[i]);
            let mut list = vec![a];
            if let Some(b) = b {
                list.push(b);
            }
            for (v, mut hv) in chunk.iter().zip(list) {
                for ((h, &x), &p) in hv.iter_mut().zip(v.iter()).zip(self.potential.data.iter()) {
                    *h += (p - shift) * x;
                }
                out.push(hv);
            }
        }
        out
    }

    /// `H v` for each vector.
    pub fn apply_many(&self, vs: &[&[f64]]) -> Vec<Vec<f64>> {
        self.apply_many_with(vs, 0.0)
    }

    pub fn apply(&self, field: &ScalarField) -> ScalarField {
        let out = self.apply_many(&[&field.data]).remove(0);
        ScalarField { grid: self.grid, data: out }
    }

    fn precondition_many(&self, vs: &[&[f64]], s: f64) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(vs.len());
        for chunk in vs.chunks(2) {
            let (a, b) = self.multiplier_pair(chunk[0], chunk.get(1).copied(), |i| 1.0 / (self.k2[i] + s));
            out.push(a);
            if let Some(b) = b {
                out.push(b);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundState {
    #[serde(skip)]
    pub m: ScalarField,
    pub eigenvalue: f64,
    pub lambda: f64,
    pub residual: f64,
    pub exterior_decay_rate: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct EigenOptions {
    pub tol: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    /// Extra block vectors beyond the requested count.
    pub guard: usize,
    /// States with `lambda L / 2` below this are treated as box modes.
    pub min_localization: f64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions { tol: 1e-9, max_outer: 60, max_inner: 600, guard: 2, min_localization: 3.0 }
    }
}

/// Outcome of a bound-state search.
#[derive(Debug, Clone)]
pub struct BoundStateSearch {
    pub states: Vec<BoundState>,
    /// Negative eigenvalues rejected as periodic-box modes.
    pub box_modes: Vec<f64>,
    pub outer_iterations: usize,
    pub residual_history: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Orthonormalizes columns in place by twice-repeated Gram-Schmidt, dropping
/// numerically dependent ones.
fn orthonormalize(cols: &mut Vec<Vec<f64>>) {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(cols.len());
    for mut v in cols.drain(..) {
        let n0 = norm(&v);
        for _ in 0..2 {
            for q in &out {
                let c = dot(q, &v);
                for (x, y) in v.iter_mut().zip(q.iter()) {
                    *x -= c * y;
                }
            }
        }
        let n = norm(&v);
        if n > 1e-10 * n0.max(1e-300) {
            v.iter_mut().for_each(|x| *x /= n);
            out.push(v);
        }
    }
    *cols = out;
}

struct NegativeCurvature;

/// Lockstep preconditioned CG for `(H - shift) y_j = b_j`.
fn shifted_pcg(
    h: &Hamiltonian,
    rhs: &[Vec<f64>],
    shift: f64,
    tol: f64,
    max_iter: usize,
) -> std::result::Result<Vec<Vec<f64>>, NegativeCurvature> {
    let m = rhs.len();
    let s = (-shift).max(0.0) + 1.0;
    let mut x: Vec<Vec<f64>> = rhs.iter().map(|b| vec![0.0; b.len()]).collect();
    let mut r: Vec<Vec<f64>> = rhs.to_vec();
    let bnorm: Vec<f64> = rhs.iter().map(|b| norm(b)).collect();
    let refs: Vec<&[f64]> = r.iter().map(|v| v.as_slice()).collect();
    let mut z = h.precondition_many(&refs, s);
    let mut p = z.clone();
    let mut rz: Vec<f64> = (0..m).map(|j| dot(&r[j], &z[j])).collect();
    let mut active: Vec<bool> = (0..m).map(|j| bnorm[j] > 0.0).collect();
    for _ in 0..max_iter {
        let idx: Vec<usize> = (0..m).filter(|&j| active[j]).collect();
        if idx.is_empty() {
            break;
        }
        let prefs: Vec<&[f64]> = idx.iter().map(|&j| p[j].as_slice()).collect();
        let q = h.apply_many_with(&prefs, shift);
        for (qi, &j) in q.iter().zip(idx.iter()) {
            let pq = dot(&p[j], qi);
            if pq <= 0.0 {
                return Err(NegativeCurvature);
            }
            let alpha = rz[j] / pq;
            for ((xv, rv), (pv, qv)) in x[j].iter_mut().zip(r[j].iter_mut()).zip(p[j].iter().zip(qi.iter())) {
                *xv += alpha * pv;
                *rv -= alpha * qv;
            }
            if norm(&r[j]) <= tol * bnorm[j] {
                active[j] = false;
            }
        }
        let idx: Vec<usize> = (0..m).filter(|&j| active[j]).collect();
        let rrefs: Vec<&[f64]> = idx.iter().map(|&j| r[j].as_slice()).collect();
        let zn = h.precondition_many(&rrefs, s);
        for (zj, &j) in zn.into_iter().zip(idx.iter()) {
            let rz_new = dot(&r[j], &zj);
            let beta = rz_new / rz[j];
            rz[j] = rz_new;
            for (pv, zv) in p[j].iter_mut().zip(zj.iter()) {
                *pv = zv + beta * *pv;
            }
            z[j] = zj;
        }
    }
    Ok(x)
}

fn initial_block(grid: &Grid3, count: usize) -> Vec<Vec<f64>> {
    let shapes: [fn([f64; 3]) -> f64; 10] = [
        |_| 1.0,
        |x| x[0],
        |x| x[1],
        |x| x[2],
        |x| x[0] * x[1],
        |x| x[1] * x[2],
        |x| x[0] * x[2],
        |x| x[0] * x[0] - x[1] * x[1],
        |x| 2.0 * x[2] * x[2] - x[0] * x[0] - x[1] * x[1],
        |x| x[0] * x[0] + x[1] * x[1] + x[2] * x[2] - 3.0,
    ];
    (0..count)
        .map(|j| {
            let shape = shapes[j % shapes.len()];
            let width = 1.5 + 0.5 * (j / shapes.len()) as f64;
            (0..grid.len())
                .map(|idx| {
                    let x = grid.point(idx);
                    let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
                    // A small deterministic perturbation keeps the block generic.
                    let jitter = 1e-3 * ((idx as f64 * 0.61803398875 + j as f64 * 0.1).fract() - 0.5);
                    shape(x) * (-r2 / (2.0 * width * width)).exp() + jitter * (-r2 / 8.0).exp()
                })
                .collect()
        })
        .collect()
}

/// Negative-energy bound states of `h`, sorted by energy.
pub fn bound_states(h: &Hamiltonian, max_count: usize) -> Result<Vec<BoundState>> {
    Ok(bound_state_search(h, max_count, &EigenOptions::default())?.states)
}

pub fn bound_state_search(h: &Hamiltonian, max_count: usize, opts: &EigenOptions) -> Result<BoundStateSearch> {
    let grid = h.grid();
    let vmin = h.potential().min();
    if max_count == 0 || vmin >= 0.0 {
        return Ok(BoundStateSearch { states: vec![], box_modes: vec![], outer_iterations: 0, residual_history: vec![] });
    }
    let p = max_count + opts.guard;
    let mut x = initial_block(&grid, p);
    orthonormalize(&mut x);
    let mut shift = vmin - 0.5;
    let mut history = Vec::new();
    let mut inner_tol = 1e-3;
    let half_length = grid.half_length();

    for outer in 0..opts.max_outer {
        let y = loop {
            match shifted_pcg(h, &x, shift, inner_tol, opts.max_inner) {
                Ok(y) => break y,
                Err(NegativeCurvature) => shift -= 0.5 * (1.0 + shift.abs()),
            }
        };
        let mut y = y;
        orthonormalize(&mut y);
        let refs: Vec<&[f64]> = y.iter().map(|v| v.as_slice()).collect();
        let hy = h.apply_many(&refs);
        let k = y.len();
        let mut g = DMatrix::<f64>::zeros(k, k);
        for i in 0..k {
            for j in 0..=i {
                let v = 0.5 * (dot(&y[i], &hy[j]) + dot(&y[j], &hy[i]));
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        let eig = SymmetricEigen::new(g);
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
        let mut new_x = Vec::with_capacity(k);
        let mut new_hx = Vec::with_capacity(k);
        let mut theta = Vec::with_capacity(k);
        for &c in &order {
            let mut v = vec![0.0; grid.len()];
            let mut hv = vec![0.0; grid.len()];
            for i in 0..k {
                let coef = eig.eigenvectors[(i, c)];
                for ((a, b), (yy, hh)) in v.iter_mut().zip(hv.iter_mut()).zip(y[i].iter().zip(hy[i].iter())) {
                    *a += coef * yy;
                    *b += coef * hh;
                }
            }
            theta.push(eig.eigenvalues[c]);
            new_x.push(v);
            new_hx.push(hv);
        }
        let residuals: Vec<f64> = (0..k)
            .map(|j| {
                new_hx[j].iter().zip(new_x[j].iter()).map(|(a, b)| (a - theta[j] * b).powi(2)).sum::<f64>().sqrt()
            })
            .collect();
        // Genuine states are localized well inside the box.
        let genuine: Vec<usize> = (0..k)
            .filter(|&j| theta[j] < 0.0 && (-theta[j]).sqrt() * half_length >= opts.min_localization)
            .take(max_count)
            .collect();
        let worst = genuine.iter().map(|&j| residuals[j]).fold(0.0f64, f64::max);
        history.push(if genuine.is_empty() { residuals[0] } else { worst });
        x = new_x;

        let converged = outer >= 2 && genuine.iter().all(|&j| residuals[j] < opts.tol);
        let nothing_bound = outer >= 4 && theta[0] >= 0.0 && residuals[0] < 1e-4;
        if converged || nothing_bound {
            let cell = grid.cell_volume().sqrt();
            let mut states = Vec::new();
            for &j in &genuine {
                let mut m = ScalarField { grid, data: x[j].iter().map(|v| v / cell).collect() };
                let peak = m.data.iter().cloned().fold(0.0f64, |a, v| if v.abs() > a.abs() { v } else { a });
                if peak < 0.0 {
                    m.scale(-1.0);
                }
                let hm = h.apply(&m);
                let mut r = hm.clone();
                r.axpy(-theta[j], &m);
                states.push(BoundState {
                    m,
                    eigenvalue: theta[j],
                    lambda: (-theta[j]).sqrt(),
                    residual: r.l2_norm(),
                    exterior_decay_rate: None,
                });
            }
            let box_modes = (0..k)
                .filter(|&j| theta[j] < 0.0 && !genuine.contains(&j) && residuals[j] < 1e-3)
                .map(|j| theta[j])
                .collect();
            return Ok(BoundStateSearch { states, box_modes, outer_iterations: outer + 1, residual_history: history });
        }
        // Move the shift toward the lowest Ritz value while keeping it below.
        let lowest = theta[0];
        let candidate = lowest - (0.1 * lowest.abs()).max(4.0 * residuals[0]).max(1e-3);
        if candidate > shift {
            shift = candidate;
        }
        inner_tol = (0.1 * worst).clamp(1e-12, 1e-3);
    }
    Err(WaveError::NoConvergence { message: "bound-state iteration cap reached".into(), history })
}

/// `P_b f = Σ <f, m_j> m_j`.
pub fn project_pb(field: &ScalarField, states: &[BoundState]) -> ScalarField {
    let mut out = ScalarField::zeros(field.grid);
    for s in states {
        out.axpy(field.dot(&s.m), &s.m);
    }
    out
}

/// `P_c f = f - P_b f`.
pub fn project_pc(field: &ScalarField, states: &[BoundState]) -> ScalarField {
    let mut out = field.clone();
    out.axpy(-1.0, &project_pb(field, states));
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct AgmonReport {
    pub lambda: f64,
    /// Least-squares rate of `r |m(r)|` over the exterior shell.
    pub fitted_rate: f64,
    /// Upper end `2 sqrt(-E)` of the admissible weight exponents.
    pub theoretical_cap: f64,
    pub alpha: f64,
    /// `∫ e^{α|x|} m^2 / ∫ m^2` on the box at `α = 0.9 · 2λ`.
    pub weighted_ratio: f64,
    /// `|m(x)| <= C e^{-α|x|/2}` on the shell with `C` from its inner edge.
    pub pointwise_ok: bool,
}

/// Weighted mass `∫_{|x| <= radius} e^{α|x|} m^2` relative to `∫ m^2`.
pub fn agmon_weighted_ratio(state: &BoundState, alpha: f64, radius: f64) -> f64 {
    let grid = state.m.grid;
    let mut num = 0.0;
    let mut den = 0.0;
    for idx in 0..grid.len() {
        let x = grid.point(idx);
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        let w = state.m.data[idx].powi(2);
        den += w;
        if r <= radius {
            num += (alpha * r).exp() * w;
        }
    }
    num / den
}

pub fn agmon_report(state: &BoundState, shell: (f64, f64)) -> Result<AgmonReport> {
    let grid = state.m.grid;
    let (r0, r1) = shell;
    if !(r1 > r0 && r1 - r0 >= 4.0 * grid.spacing()) {
        return Err(WaveError::config(format!("exterior shell [{r0}, {r1}] is too thin")));
    }
    if r1 > grid.half_length() {
        return Err(WaveError::config("exterior shell leaves the box interior"));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut samples = Vec::new();
    for idx in 0..grid.len() {
        let x = grid.point(idx);
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        let v = state.m.data[idx].abs();
        if r >= r0 && r <= r1 && v > 0.0 {
            xs.push(r);
            ys.push((r * v).ln());
            samples.push((r, v));
        }
    }
    if xs.len() < 8 {
        return Err(WaveError::config("exterior shell holds too few grid nodes"));
    }
    let fitted_rate = -fit_slope(&xs, &ys);
    let lambda = state.lambda;
    let alpha = 0.9 * 2.0 * lambda;
    let weighted_ratio = agmon_weighted_ratio(state, alpha, f64::INFINITY);
    let c = samples
        .iter()
        .filter(|(r, _)| *r <= r0 + grid.spacing())
        .map(|(r, v)| v * (0.5 * alpha * r).exp())
        .fold(0.0f64, f64::max);
    let pointwise_ok = samples.iter().all(|(r, v)| *v <= 2.0 * c * (-0.5 * alpha * r).exp());
    Ok(AgmonReport { lambda, fitted_rate, theoretical_cap: 2.0 * lambda, alpha, weighted_ratio, pointwise_ok })
}
