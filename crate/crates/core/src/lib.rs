pub mod error;
pub mod evolution;
pub mod fft;
pub mod free_prop;
pub mod grid;
pub mod harness;
pub mod history;
pub mod interp;
pub mod io;
pub mod lorentz;
pub mod norms;
pub mod potential;
pub mod radial;
pub mod scattering;
pub mod spectral_h;

pub use error::{Result, WaveError};
pub use grid::{CauchyData, ComplexField, Grid3, ScalarField, SpectralField};
