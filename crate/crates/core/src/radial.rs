//! One-dimensional radial reductions used as oracles for the grid solver.

use serde::Serialize;

use crate::potential::PotentialModel;

/// s-wave energies of the spherical well `-depth` on `r < radius`, from
/// `k cot(k a) = -kappa`, `k^2 + kappa^2 = depth`. Sorted ascending.
pub fn square_well_s_wave(depth: f64, radius: f64) -> Vec<f64> {
    let kmax = depth.sqrt();
    let f = |k: f64| k / (k * radius).tan() + (depth - k * k).max(0.0).sqrt();
    let pi = std::f64::consts::PI;
    let mut out = Vec::new();
    let mut n = 1;
    loop {
        let lo = (n as f64 - 0.5) * pi / radius;
        if lo >= kmax {
            break;
        }
        let hi = (n as f64 * pi / radius).min(kmax);
        let mut a = lo + 1e-14;
        let mut b = hi - 1e-14;
        if f(a) * f(b) > 0.0 {
            n += 1;
            continue;
        }
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if f(a) * f(m) <= 0.0 {
                b = m;
            } else {
                a = m;
            }
        }
        let k = 0.5 * (a + b);
        out.push(-(depth - k * k));
        n += 1;
    }
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out
}

/// Radial eigenproblem `-u'' + (l(l+1)/r^2 + V(r)) u = E u` on `(0, r_max)`
/// with `u(0) = u(r_max) = 0`, solved by shooting with fixed-step RK4.
pub struct RadialProblem<'a> {
    pub potential: &'a dyn Fn(f64) -> f64,
    /// Radii where the potential jumps; steps never straddle them.
    pub breakpoints: Vec<f64>,
    pub l: u32,
    pub r_max: f64,
    pub step: f64,
}

impl<'a> RadialProblem<'a> {
    pub fn for_model(model: &'a PotentialModel, potential: &'a dyn Fn(f64) -> f64, l: u32) -> Self {
        let breakpoints = match model.kind {
            crate::potential::PotentialKind::SphericalWell { radius, .. } => vec![radius],
            _ => vec![],
        };
        RadialProblem { potential, breakpoints, l, r_max: 40.0, step: 2e-3 }
    }

    /// Nodes of the shot solution in `(0, r_max)` and its end value.
    fn shoot(&self, e: f64) -> (usize, f64) {
        let l = self.l as f64;
        let cent = l * (l + 1.0);
        let mut edges = vec![0.0];
        for &b in &self.breakpoints {
            if b > 0.0 && b < self.r_max {
                edges.push(b);
            }
        }
        edges.push(self.r_max);
        let r0: f64 = if self.l == 0 { 0.0 } else { 1e-3 };
        let mut u = if self.l == 0 { 0.0 } else { r0.powf(l + 1.0) };
        let mut du = if self.l == 0 { 1.0 } else { (l + 1.0) * r0.powf(l) };
        let mut nodes = 0;
        for w in edges.windows(2) {
            let (a, b) = (w[0].max(r0), w[1]);
            if b <= a {
                continue;
            }
            let steps = ((b - a) / self.step).ceil() as usize;
            let h = (b - a) / steps as f64;
            let eps = 1e-12 * (b - a);
            let rhs = |r: f64, u: f64| -> f64 {
                let rc = r.clamp(a + eps, b - eps);
                (cent / (rc * rc) + (self.potential)(rc) - e) * u
            };
            let mut r = a;
            for _ in 0..steps {
                let k1u = du;
                let k1v = rhs(r, u);
                let k2u = du + 0.5 * h * k1v;
                let k2v = rhs(r + 0.5 * h, u + 0.5 * h * k1u);
                let k3u = du + 0.5 * h * k2v;
                let k3v = rhs(r + 0.5 * h, u + 0.5 * h * k2u);
                let k4u = du + h * k3v;
                let k4v = rhs(r + h, u + h * k3u);
                let un = u + h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
                let dn = du + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
                if u != 0.0 && (un > 0.0) != (u > 0.0) {
                    nodes += 1;
                }
                u = un;
                du = dn;
                r += h;
                let m = u.abs().max(du.abs());
                if m > 1e100 {
                    u /= m;
                    du /= m;
                }
            }
        }
        (nodes, u)
    }

    /// Eigenvalues below zero, ascending.
    pub fn negative_eigenvalues(&self, e_min: f64) -> Vec<f64> {
        let count_below = |e: f64| self.shoot(e).0;
        let total = count_below(-1e-12);
        let mut out = Vec::with_capacity(total);
        for n in 0..total {
            let (mut a, mut b) = (e_min, -1e-12);
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if count_below(m) > n {
                    b = m;
                } else {
                    a = m;
                }
                if b - a < 1e-13 {
                    break;
                }
            }
            out.push(0.5 * (a + b));
        }
        out
    }
}

/// Bound-state energies of a radial model in one angular channel.
pub fn radial_eigenvalues(model: &PotentialModel, l: u32) -> Vec<f64> {
    let v = |r: f64| model.radial(r);
    let problem = RadialProblem::for_model(model, &v, l);
    problem.negative_eigenvalues(-model.sup_norm - 1.0)
}

#[derive(Debug, Clone, Serialize)]
pub struct ThresholdRow {
    pub depth: f64,
    /// Bound-state counts for `l = 0, 1, ..`.
    pub counts: Vec<usize>,
    /// Energy closest to zero among all bound states, if any.
    pub shallowest: Option<f64>,
    /// A count changes before the next depth in the sweep.
    pub new_state_ahead: bool,
}

/// Sweeps the depth of a radial family and flags emerging bound states.
pub fn threshold_sweep(make: impl Fn(f64) -> PotentialModel, depths: &[f64], l_max: u32) -> Vec<ThresholdRow> {
    let mut rows: Vec<ThresholdRow> = depths
        .iter()
        .map(|&d| {
            let model = make(d);
            let mut counts = Vec::new();
            let mut shallowest: Option<f64> = None;
            for l in 0..=l_max {
                let evs = radial_eigenvalues(&model, l);
                counts.push(evs.len());
                if let Some(&e) = evs.last() {
                    shallowest = Some(shallowest.map_or(e, |s: f64| s.max(e)));
                }
            }
            ThresholdRow { depth: d, counts, shallowest, new_state_ahead: false }
        })
        .collect();
    for i in 0..rows.len().saturating_sub(1) {
        rows[i].new_state_ahead = rows[i].counts != rows[i + 1].counts;
    }
    rows
}
