//! Cached three-dimensional FFT plans on cubic grids.
//!
//! Forward transforms are unnormalized; inverse transforms divide by `N^3`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub struct Fft3 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

static PLANS: OnceLock<Mutex<HashMap<usize, Arc<Fft3>>>> = OnceLock::new();

impl Fft3 {
    /// Shared plan for an `n x n x n` grid.
    pub fn get(n: usize) -> Arc<Fft3> {
        let map = PLANS.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = map.lock().unwrap_or_else(|e| e.into_inner());
        guard
            .entry(n)
            .or_insert_with(|| {
                let mut planner = FftPlanner::new();
                Arc::new(Fft3 {
                    n,
                    forward: planner.plan_fft_forward(n),
                    inverse: planner.plan_fft_inverse(n),
                })
            })
            .clone()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(data, &self.forward);
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, &self.inverse);
        let scale = 1.0 / (self.n * self.n * self.n) as f64;
        for z in data.iter_mut() {
            *z *= scale;
        }
    }

    fn run(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        assert_eq!(data.len(), n * n * n, "buffer does not match FFT size");
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];

        // Last axis is contiguous.
        plan.process_with_scratch(data, &mut scratch);

        // Middle axis: transpose each i-slab, transform rows, transpose back.
        let nn = n * n;
        for slab in data.chunks_mut(nn) {
            transpose_square(slab, n);
            plan.process_with_scratch(slab, &mut scratch);
            transpose_square(slab, n);
        }

        // First axis: gather (i) columns for each fixed j into a k-major block.
        let mut block = vec![Complex64::new(0.0, 0.0); nn];
        for j in 0..n {
            for i in 0..n {
                let src = (i * n + j) * n;
                for k in 0..n {
                    block[k * n + i] = data[src + k];
                }
            }
            plan.process_with_scratch(&mut block, &mut scratch);
            for i in 0..n {
                let dst = (i * n + j) * n;
                for k in 0..n {
                    data[dst + k] = block[k * n + i];
                }
            }
        }
    }
}

fn transpose_square(m: &mut [Complex64], n: usize) {
    for r in 0..n {
        for c in (r + 1)..n {
            m.swap(r * n + c, c * n + r);
        }
    }
}

/// Index of the mode `-k` for flat index `idx`.
#[inline]
pub fn negated_index(idx: usize, n: usize) -> usize {
    let k = idx % n;
    let j = (idx / n) % n;
    let i = idx / (n * n);
    let neg = |a: usize| (n - a) % n;
    (neg(i) * n + neg(j)) * n + neg(k)
}

/// Transforms two real arrays with a single complex FFT.
pub fn forward_pair(a: &[f64], b: &[f64], n: usize) -> (Vec<Complex64>, Vec<Complex64>) {
    let plan = Fft3::get(n);
    let mut w: Vec<Complex64> = a
        .iter()
        .zip(b.iter())
        .map(|(&x, &y)| Complex64::new(x, y))
        .collect();
    plan.forward(&mut w);
    let len = w.len();
    let mut ah = vec![Complex64::new(0.0, 0.0); len];
    let mut bh = vec![Complex64::new(0.0, 0.0); len];
    for idx in 0..len {
        let wk = w[idx];
        let wm = w[negated_index(idx, n)].conj();
        ah[idx] = (wk + wm) * 0.5;
        bh[idx] = (wk - wm) * Complex64::new(0.0, -0.5);
    }
    (ah, bh)
}

/// Inverse of [`forward_pair`] for Hermitian-symmetric spectra.
pub fn inverse_pair(ah: &[Complex64], bh: &[Complex64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let plan = Fft3::get(n);
    let i = Complex64::new(0.0, 1.0);
    let mut w: Vec<Complex64> = ah.iter().zip(bh.iter()).map(|(&x, &y)| x + i * y).collect();
    plan.inverse(&mut w);
    (w.iter().map(|z| z.re).collect(), w.iter().map(|z| z.im).collect())
}

pub fn forward_real(a: &[f64], n: usize) -> Vec<Complex64> {
    let plan = Fft3::get(n);
    let mut w: Vec<Complex64> = a.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    plan.forward(&mut w);
    w
}

/// Inverse transform keeping the real part.
pub fn inverse_real(ah: &[Complex64], n: usize) -> Vec<f64> {
    let plan = Fft3::get(n);
    let mut w = ah.to_vec();
    plan.inverse(&mut w);
    w.iter().map(|z| z.re).collect()
}

/// Inverse 2-D transform of an `n x n` row-major block, normalized by `n^2`.
pub fn inverse_2d(data: &mut [Complex64], n: usize) {
    let plan = Fft3::get(n);
    let mut scratch = vec![Complex64::new(0.0, 0.0); plan.inverse.get_inplace_scratch_len()];
    plan.inverse.process_with_scratch(data, &mut scratch);
    transpose_square(data, n);
    plan.inverse.process_with_scratch(data, &mut scratch);
    transpose_square(data, n);
    let scale = 1.0 / (n * n) as f64;
    for z in data.iter_mut() {
        *z *= scale;
    }
}

/// Forward 2-D transform of an `n x n` row-major block.
pub fn forward_2d(data: &mut [Complex64], n: usize) {
    let plan = Fft3::get(n);
    let mut scratch = vec![Complex64::new(0.0, 0.0); plan.forward.get_inplace_scratch_len()];
    plan.forward.process_with_scratch(data, &mut scratch);
    transpose_square(data, n);
    plan.forward.process_with_scratch(data, &mut scratch);
    transpose_square(data, n);
}
