//! Spectral solvers for the semiclassical Nelson system: particle ground states, the
//! adiabatic and full Schrödinger–Klein–Gordon field dynamics, Pekar minimizers and
//! Bogoliubov fluctuation kernels on a periodic cube.

pub mod adiabatic;
pub mod akg;
pub mod config;
pub mod dressing;
pub mod error;
pub mod experiments;
pub mod fft;
pub mod fgrid;
pub mod fluctuations;
pub mod fields;
pub mod grid;
pub mod krylov;
pub mod linalg;
pub mod pekar;
pub mod quadrature;
pub mod schrodinger;
pub mod skg;

pub use error::{NelsonError, Result};
pub use fields::{to_momentum, to_position, FieldK, WaveX};
pub use grid::{GridSpec, SpectralGrid};
