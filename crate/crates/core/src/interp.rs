//! Off-grid evaluation of band-limited fields.

use num_complex::Complex64;

use crate::error::{Result, WaveError};
use crate::fft;
use crate::grid::{Grid3, ScalarField};

const STENCIL: usize = 8;

/// Fields spectrally upsampled onto a finer grid and then interpolated with
/// local eighth-order Lagrange stencils.
#[derive(Debug, Clone)]
pub struct PointInterpolator {
    fine: Grid3,
    fields: Vec<Vec<f64>>,
}

impl PointInterpolator {
    pub fn new(fields: &[&ScalarField], upsample: usize) -> Result<Self> {
        let spectra: Vec<Vec<Complex64>> = fields.iter().map(|f| fft::forward_real(&f.data, f.grid.n())).collect();
        let grid = match fields.first() {
            Some(f) => f.grid,
            None => return Err(WaveError::config("interpolator needs at least one field")),
        };
        Self::from_spectra(&grid, spectra, upsample)
    }

    /// Builds from unnormalized spectra of real fields on `grid`.
    pub fn from_spectra(grid: &Grid3, spectra: Vec<Vec<Complex64>>, upsample: usize) -> Result<Self> {
        if upsample == 0 || !upsample.is_power_of_two() {
            return Err(WaveError::config("upsampling factor must be a power of two"));
        }
        let fine = Grid3::new(grid.n() * upsample, grid.length())?;
        let padded: Vec<Vec<Complex64>> = spectra.iter().map(|s| upsample_spectrum(s, grid, &fine)).collect();
        let mut fields = Vec::with_capacity(padded.len());
        for pair in padded.chunks(2) {
            if pair.len() == 2 {
                let (a, b) = fft::inverse_pair(&pair[0], &pair[1], fine.n());
                fields.push(a);
                fields.push(b);
            } else {
                fields.push(fft::inverse_real(&pair[0], fine.n()));
            }
        }
        Ok(PointInterpolator { fine, fields })
    }

    pub fn field_count(&self) -> usize {
        self.fields.len()
    }

    /// Values of every field at `y`, periodic in each axis.
    pub fn eval_into(&self, y: [f64; 3], out: &mut [f64]) {
        let m = self.fine.n();
        let h = self.fine.spacing();
        let mut idx = [[0usize; STENCIL]; 3];
        let mut wts = [[0.0f64; STENCIL]; 3];
        for ax in 0..3 {
            let s = (y[ax] - self.fine.coord(0)) / h;
            let base = s.floor() as i64 - (STENCIL as i64 / 2 - 1);
            let local = s - base as f64;
            for p in 0..STENCIL {
                idx[ax][p] = (base + p as i64).rem_euclid(m as i64) as usize;
                let mut w = 1.0;
                for q in 0..STENCIL {
                    if q != p {
                        w *= (local - q as f64) / (p as f64 - q as f64);
                    }
                }
                wts[ax][p] = w;
            }
        }
        out.iter_mut().for_each(|o| *o = 0.0);
        for a in 0..STENCIL {
            for b in 0..STENCIL {
                let wab = wts[0][a] * wts[1][b];
                let row = (idx[0][a] * m + idx[1][b]) * m;
                for c in 0..STENCIL {
                    let w = wab * wts[2][c];
                    let id = row + idx[2][c];
                    for (o, f) in out.iter_mut().zip(self.fields.iter()) {
                        *o += w * f[id];
                    }
                }
            }
        }
    }

    pub fn eval(&self, y: [f64; 3]) -> Vec<f64> {
        let mut out = vec![0.0; self.fields.len()];
        self.eval_into(y, &mut out);
        out
    }
}

/// Zero-pads a spectrum onto a finer grid of the same box, dropping Nyquist modes.
pub fn upsample_spectrum(hat: &[Complex64], coarse: &Grid3, fine: &Grid3) -> Vec<Complex64> {
    let n = coarse.n();
    let m = fine.n();
    let scale = (m as f64 / n as f64).powi(3);
    let mut out = vec![Complex64::new(0.0, 0.0); fine.len()];
    let map = |a: usize| -> Option<usize> {
        let k = coarse.mode(a);
        if k == -(n as i64) / 2 && m > n {
            None
        } else {
            Some(k.rem_euclid(m as i64) as usize)
        }
    };
    for idx in 0..coarse.len() {
        let (a, b, c) = coarse.unflatten(idx);
        if let (Some(i), Some(j), Some(k)) = (map(a), map(b), map(c)) {
            out[(i * m + j) * m + k] = hat[idx] * scale;
        }
    }
    out
}
