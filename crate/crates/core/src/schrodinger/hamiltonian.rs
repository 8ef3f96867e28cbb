use std::borrow::Cow;

use num_complex::Complex64;

use crate::grid::SpectralGrid;

/// `h = kinetic(p) + V(x)` acting on raw lattice arrays; `kinetic` is a diagonal momentum
/// multiplier (`|k|²`, or `|k + q|²` for Bloch-shifted problems).
pub struct Hamiltonian<'a> {
    sg: &'a SpectralGrid,
    potential: Cow<'a, [f64]>,
    kinetic: Cow<'a, [f64]>,
}

impl<'a> Hamiltonian<'a> {
    pub fn new(sg: &'a SpectralGrid, potential: Cow<'a, [f64]>) -> Self {
        assert_eq!(potential.len(), sg.len());
        Hamiltonian {
            sg,
            potential,
            kinetic: Cow::Borrowed(sg.k2()),
        }
    }

    pub fn with_kinetic(mut self, kinetic: Vec<f64>) -> Self {
        assert_eq!(kinetic.len(), self.sg.len());
        self.kinetic = Cow::Owned(kinetic);
        self
    }

    pub fn grid(&self) -> &'a SpectralGrid {
        self.sg
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    pub fn kinetic(&self) -> &[f64] {
        &self.kinetic
    }

    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        let mut out = v.to_vec();
        self.sg.apply_fourier_multiplier(&mut out, &self.kinetic);
        for ((o, x), p) in out.iter_mut().zip(v).zip(self.potential.iter()) {
            *o += p * x;
        }
        out
    }

    /// `(kinetic + shift)^{-1} r`.
    pub fn precondition(&self, r: &[Complex64], shift: f64) -> Vec<Complex64> {
        let mult: Vec<f64> = self.kinetic.iter().map(|k| 1.0 / (k + shift)).collect();
        let mut out = r.to_vec();
        self.sg.apply_fourier_multiplier(&mut out, &mult);
        out
    }

    pub fn preconditioner(&self, shift: f64) -> Vec<f64> {
        self.kinetic.iter().map(|k| 1.0 / (k + shift)).collect()
    }

    pub fn apply_multiplier(&self, r: &[Complex64], mult: &[f64]) -> Vec<Complex64> {
        let mut out = r.to_vec();
        self.sg.apply_fourier_multiplier(&mut out, mult);
        out
    }

    /// Rayleigh quotient `⟨v, h v⟩ / ⟨v, v⟩`.
    pub fn rayleigh(&self, v: &[Complex64]) -> f64 {
        let hv = self.apply(v);
        let num: f64 = v.iter().zip(&hv).map(|(a, b)| (a.conj() * b).re).sum();
        let den: f64 = v.iter().map(|a| a.norm_sqr()).sum();
        num / den
    }

    pub fn min_potential(&self) -> (usize, f64) {
        self.potential
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc })
    }

    pub fn max_abs_potential(&self) -> f64 {
        self.potential.iter().fold(0.0, |a, v| a.max(v.abs()))
    }
}
