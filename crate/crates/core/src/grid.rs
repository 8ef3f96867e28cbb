//! Periodic position/momentum lattices and the spectral context shared by all solvers.
//!
//! Position points sit at `x_j = (j - N/2) Δx` on each axis, so the origin is a lattice
//! point and the box is symmetric under `x -> -x`. Momentum arrays are stored in FFT order:
//! index `j` carries the integer wave number `m = j` for `j < N/2` and `m = j - N` otherwise,
//! with `k = (2π/L) m`. All arrays are row-major with the z index fastest.
//!
//! Sums carry continuum weights: `Δx³` in position space and `Δk/(2π)³` for transforms of
//! particle functions, so `to_momentum` approximates `∫ e^{-ikx} f(x) dx` and `to_position`
//! approximates `(2π)^{-3} ∫ e^{ikx} f̂(k) dk`. Classical fields live in `L²(ℝ³_k, dk)` and
//! their norms use the bare cell volume `Δk`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{NelsonError, Result};
use crate::fft::Fft3;
use crate::quadrature;

/// Box length and points per axis of a cubic periodic grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub length: f64,
    pub points: usize,
}

impl GridSpec {
    pub fn new(length: f64, points: usize) -> Result<Self> {
        let spec = GridSpec { length, points };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0) || !self.length.is_finite() {
            return Err(NelsonError::Config(format!(
                "box length must be positive, got {}",
                self.length
            )));
        }
        if self.points < 8 || self.points % 2 != 0 {
            return Err(NelsonError::Config(format!(
                "points per axis must be even and >= 8, got {}",
                self.points
            )));
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        self.length / self.points as f64
    }

    /// Position-space cell volume `Δx³`.
    pub fn dv(&self) -> f64 {
        self.dx().powi(3)
    }

    /// Lattice spacing `2π/L` of the momentum grid along one axis.
    pub fn dk1(&self) -> f64 {
        2.0 * PI / self.length
    }

    /// Momentum cell volume `Δk = (2π/L)³`.
    pub fn dk(&self) -> f64 {
        self.dk1().powi(3)
    }

    /// Radius of the largest momentum ball contained in the lattice.
    pub fn k_nyquist(&self) -> f64 {
        self.dk1() * (self.points / 2) as f64
    }

    pub fn len(&self) -> usize {
        self.points * self.points * self.points
    }

    pub fn is_empty(&self) -> bool {
        self.points == 0
    }

    pub fn ensure_same(&self, other: &GridSpec) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(NelsonError::GridMismatch {
                left: format!("L={} N={}", self.length, self.points),
                right: format!("L={} N={}", other.length, other.points),
            })
        }
    }

    /// Integer wave number of FFT slot `j`.
    pub fn wave_number(&self, j: usize) -> i64 {
        let n = self.points as i64;
        let j = j as i64;
        if j < n / 2 {
            j
        } else {
            j - n
        }
    }

    /// FFT slot of integer wave number `m` (taken modulo N).
    pub fn slot(&self, m: i64) -> usize {
        m.rem_euclid(self.points as i64) as usize
    }

    pub fn flat(&self, i: usize, j: usize, l: usize) -> usize {
        (i * self.points + j) * self.points + l
    }

    pub fn unflat(&self, idx: usize) -> (usize, usize, usize) {
        let n = self.points;
        (idx / (n * n), (idx / n) % n, idx % n)
    }

    pub fn coordinate(&self, j: usize) -> f64 {
        (j as f64 - (self.points / 2) as f64) * self.dx()
    }

    pub fn position(&self, idx: usize) -> [f64; 3] {
        let (i, j, l) = self.unflat(idx);
        [self.coordinate(i), self.coordinate(j), self.coordinate(l)]
    }

    pub fn wave_vector(&self, idx: usize) -> [f64; 3] {
        let (i, j, l) = self.unflat(idx);
        let dk1 = self.dk1();
        [
            dk1 * self.wave_number(i) as f64,
            dk1 * self.wave_number(j) as f64,
            dk1 * self.wave_number(l) as f64,
        ]
    }

    /// Flat momentum index of `-k`, or `None` when `-k` leaves the lattice (Nyquist planes).
    pub fn negated(&self, idx: usize) -> Option<usize> {
        let n = self.points as i64;
        let (i, j, l) = self.unflat(idx);
        let ms = [self.wave_number(i), self.wave_number(j), self.wave_number(l)];
        if ms.iter().any(|&m| m == -n / 2) {
            return None;
        }
        Some(self.flat(self.slot(-ms[0]), self.slot(-ms[1]), self.slot(-ms[2])))
    }
}

/// Precomputed lattice tables plus the FFT plan for one grid.
///
/// The zero mode gets one effective frequency `ω₀`, the harmonic mean of `|k|` over the
/// central momentum cell. Every power `ω(0)^s` is taken as `ω₀^s`, which keeps products of
/// powers exact (`ω^a ω^b = ω^{a+b}`) and makes `ω₀^{-1}` the cell average of `|k|^{-1}`.
pub struct SpectralGrid {
    spec: GridSpec,
    fft: Fft3,
    k2: Vec<f64>,
    omega: Vec<f64>,
    parity: Vec<f64>,
    dealias: Vec<bool>,
    omega_zero: f64,
}

impl std::fmt::Debug for SpectralGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralGrid")
            .field("spec", &self.spec)
            .field("omega_zero", &self.omega_zero)
            .finish()
    }
}

impl SpectralGrid {
    pub fn new(spec: GridSpec) -> Result<Self> {
        spec.validate()?;
        let n = spec.points;
        let len = spec.len();
        let dk1 = spec.dk1();
        let omega_zero = dk1 / quadrature::unit_cube_inverse_radius();
        // 2/3 rule: keep |m| < N/3 along every axis.
        let keep = |m: i64| (3 * m.unsigned_abs() as usize) < n;

        let mut k2 = vec![0.0; len];
        let mut omega = vec![0.0; len];
        let mut parity = vec![0.0; len];
        let mut dealias = vec![false; len];
        for idx in 0..len {
            let (i, j, l) = spec.unflat(idx);
            let ms = [spec.wave_number(i), spec.wave_number(j), spec.wave_number(l)];
            let kk: f64 = ms.iter().map(|&m| (dk1 * m as f64).powi(2)).sum();
            k2[idx] = kk;
            omega[idx] = if idx == 0 { omega_zero } else { kk.sqrt() };
            parity[idx] = if (ms[0] + ms[1] + ms[2]).rem_euclid(2) == 0 {
                1.0
            } else {
                -1.0
            };
            dealias[idx] = ms.iter().all(|&m| keep(m));
        }
        Ok(SpectralGrid {
            spec,
            fft: Fft3::new(n),
            k2,
            omega,
            parity,
            dealias,
            omega_zero,
        })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn fft(&self) -> &Fft3 {
        &self.fft
    }

    pub fn len(&self) -> usize {
        self.spec.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spec.is_empty()
    }

    /// `|k|²` per momentum slot (exact, zero at the origin).
    pub fn k2(&self) -> &[f64] {
        &self.k2
    }

    /// Dispersion `ω(k) = |k|` with the effective zero-mode frequency.
    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn omega_zero(&self) -> f64 {
        self.omega_zero
    }

    /// `ω(k)^s` on the lattice, zero mode included.
    pub fn omega_pow(&self, s: f64) -> Vec<f64> {
        self.omega.iter().map(|w| w.powf(s)).collect()
    }

    /// Dealiasing mask applied to the particle-field coupling.
    pub fn dealias(&self) -> &[bool] {
        &self.dealias
    }

    /// Forward transform with continuum weight: `f̂(k) = Σ_x e^{-ikx} f(x) Δx³`.
    pub fn forward_in_place(&self, data: &mut [Complex64]) {
        self.fft.forward(data);
        let dv = self.spec.dv();
        for (z, p) in data.iter_mut().zip(&self.parity) {
            *z *= p * dv;
        }
    }

    /// Inverse transform with continuum weight: `f(x) = Σ_k e^{ikx} f̂(k) Δk/(2π)³`.
    pub fn inverse_in_place(&self, data: &mut [Complex64]) {
        for (z, p) in data.iter_mut().zip(&self.parity) {
            *z *= *p;
        }
        self.fft.inverse(data);
        let w = 1.0 / self.spec.length.powi(3);
        for z in data.iter_mut() {
            *z *= w;
        }
    }

    /// Applies a diagonal momentum-space multiplier to a position-space array.
    pub fn apply_fourier_multiplier(&self, data: &mut [Complex64], multiplier: &[f64]) {
        self.fft.forward(data);
        let scale = 1.0 / self.spec.len() as f64;
        for (z, m) in data.iter_mut().zip(multiplier) {
            *z *= m * scale;
        }
        self.fft.inverse(data);
    }

    /// Applies a complex diagonal momentum-space multiplier to a position-space array.
    pub fn apply_complex_multiplier(&self, data: &mut [Complex64], multiplier: &[Complex64]) {
        self.fft.forward(data);
        let scale = 1.0 / self.spec.len() as f64;
        for (z, m) in data.iter_mut().zip(multiplier) {
            *z *= m * scale;
        }
        self.fft.inverse(data);
    }

    /// Kinetic energy multiplier with a Bloch shift: `|q + shift|²`.
    pub fn shifted_k2(&self, shift: [f64; 3]) -> Vec<f64> {
        (0..self.len())
            .map(|idx| {
                let q = self.spec.wave_vector(idx);
                (0..3).map(|a| (q[a] + shift[a]).powi(2)).sum()
            })
            .collect()
    }
}
