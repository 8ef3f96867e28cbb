//! Particle wavefunctions on the position lattice and classical fields on the momentum lattice.

use num_complex::Complex64;

use crate::error::{NelsonError, Result};
use crate::grid::{GridSpec, SpectralGrid};

/// Complex particle wavefunction sampled on the position lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveX {
    pub grid: GridSpec,
    pub values: Vec<Complex64>,
}

/// Complex classical field sampled on the momentum lattice (FFT order).
#[derive(Debug, Clone, PartialEq)]
pub struct FieldK {
    pub grid: GridSpec,
    pub values: Vec<Complex64>,
}

fn check_finite(values: &[Complex64], what: &str) -> Result<()> {
    if values.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(NelsonError::Domain(format!("{what} has non-finite entries")))
    }
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn sq_sum(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

impl WaveX {
    pub fn zeros(grid: GridSpec) -> Self {
        WaveX {
            grid,
            values: vec![Complex64::default(); grid.len()],
        }
    }

    pub fn from_values(grid: GridSpec, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(NelsonError::Config(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        check_finite(&values, "wavefunction")?;
        Ok(WaveX { grid, values })
    }

    pub fn from_fn<F: Fn([f64; 3]) -> Complex64>(grid: GridSpec, f: F) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.position(i))).collect();
        WaveX { grid, values }
    }

    pub fn from_real_fn<F: Fn([f64; 3]) -> f64>(grid: GridSpec, f: F) -> Self {
        Self::from_fn(grid, |x| Complex64::new(f(x), 0.0))
    }

    /// `⟨self, other⟩ = Σ conj(self)·other Δx³`.
    pub fn inner(&self, other: &WaveX) -> Complex64 {
        dot(&self.values, &other.values) * self.grid.dv()
    }

    pub fn norm_l2(&self) -> f64 {
        (sq_sum(&self.values) * self.grid.dv()).sqrt()
    }

    pub fn normalized(mut self) -> Result<Self> {
        let n = self.norm_l2();
        if !(n > 0.0) {
            return Err(NelsonError::Domain("cannot normalize a zero wavefunction".into()));
        }
        for z in &mut self.values {
            *z /= n;
        }
        Ok(self)
    }

    pub fn scale(&mut self, c: Complex64) {
        for z in &mut self.values {
            *z *= c;
        }
    }

    /// `self += a·other`.
    pub fn axpy(&mut self, a: Complex64, other: &WaveX) {
        for (z, w) in self.values.iter_mut().zip(&other.values) {
            *z += a * w;
        }
    }

    pub fn sub(&self, other: &WaveX) -> WaveX {
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        WaveX {
            grid: self.grid,
            values,
        }
    }

    pub fn density(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.norm_sqr()).collect()
    }

    pub fn is_finite(&self) -> bool {
        check_finite(&self.values, "").is_ok()
    }

    /// `‖ψ‖_{H¹}² = ‖ψ‖² + ‖∇ψ‖²`.
    pub fn h1_norm(&self, sg: &SpectralGrid) -> f64 {
        let mut hat = self.values.clone();
        sg.fft().forward(&mut hat);
        let n = self.grid.len() as f64;
        let s: f64 = hat
            .iter()
            .zip(sg.k2())
            .map(|(z, k2)| (1.0 + k2) * z.norm_sqr())
            .sum();
        (s / n * self.grid.dv()).sqrt()
    }

    /// Lattice translation `ψ(x) -> ψ(x - shift·Δx)` (periodic).
    pub fn shifted(&self, shift: [i64; 3]) -> WaveX {
        let g = self.grid;
        let mut out = vec![Complex64::default(); g.len()];
        for (idx, v) in self.values.iter().enumerate() {
            let (i, j, l) = g.unflat(idx);
            let t = g.flat(
                g.slot(i as i64 + shift[0]),
                g.slot(j as i64 + shift[1]),
                g.slot(l as i64 + shift[2]),
            );
            out[t] = *v;
        }
        WaveX {
            grid: g,
            values: out,
        }
    }
}

impl FieldK {
    pub fn zeros(grid: GridSpec) -> Self {
        FieldK {
            grid,
            values: vec![Complex64::default(); grid.len()],
        }
    }

    pub fn from_values(grid: GridSpec, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(NelsonError::Config(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        check_finite(&values, "field")?;
        Ok(FieldK { grid, values })
    }

    /// Samples `f(k)` at every momentum lattice point.
    pub fn from_fn<F: Fn([f64; 3]) -> Complex64>(grid: GridSpec, f: F) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.wave_vector(i))).collect();
        FieldK { grid, values }
    }

    /// `⟨self, other⟩ = Σ conj(self)·other Δk`.
    pub fn inner(&self, other: &FieldK) -> Complex64 {
        dot(&self.values, &other.values) * self.grid.dk()
    }

    /// Plain `L²(dk)` norm.
    pub fn norm_l2(&self) -> f64 {
        (sq_sum(&self.values) * self.grid.dk()).sqrt()
    }

    /// `(Σ_k ω(k)^{2s} |φ(k)|² Δk)^{1/2}`.
    pub fn weighted_norm(&self, sg: &SpectralGrid, s: f64) -> f64 {
        let s2: f64 = self
            .values
            .iter()
            .zip(sg.omega())
            .map(|(z, w)| w.powf(2.0 * s) * z.norm_sqr())
            .sum();
        (s2 * self.grid.dk()).sqrt()
    }

    /// `⟨self, ω^{2s} other⟩`.
    pub fn weighted_inner(&self, sg: &SpectralGrid, other: &FieldK, s: f64) -> Complex64 {
        let acc: Complex64 = self
            .values
            .iter()
            .zip(&other.values)
            .zip(sg.omega())
            .map(|((a, b), w)| a.conj() * b * w.powf(2.0 * s))
            .sum();
        acc * self.grid.dk()
    }

    pub fn scale(&mut self, c: Complex64) {
        for z in &mut self.values {
            *z *= c;
        }
    }

    pub fn scaled(&self, c: Complex64) -> FieldK {
        let mut out = self.clone();
        out.scale(c);
        out
    }

    /// `self += a·other`.
    pub fn axpy(&mut self, a: Complex64, other: &FieldK) {
        for (z, w) in self.values.iter_mut().zip(&other.values) {
            *z += a * w;
        }
    }

    pub fn add(&self, other: &FieldK) -> FieldK {
        let mut out = self.clone();
        out.axpy(Complex64::new(1.0, 0.0), other);
        out
    }

    pub fn sub(&self, other: &FieldK) -> FieldK {
        let mut out = self.clone();
        out.axpy(Complex64::new(-1.0, 0.0), other);
        out
    }

    /// Multiplies every mode by `m(k)`.
    pub fn map_modes<F: Fn(usize, Complex64) -> Complex64>(&self, f: F) -> FieldK {
        let values = self.values.iter().enumerate().map(|(i, z)| f(i, *z)).collect();
        FieldK {
            grid: self.grid,
            values,
        }
    }

    /// `(T_y φ)(k) = e^{-iky} φ(k)`.
    pub fn translated(&self, y: [f64; 3]) -> FieldK {
        let g = self.grid;
        self.map_modes(|i, z| {
            let k = g.wave_vector(i);
            z * Complex64::from_polar(1.0, -(k[0] * y[0] + k[1] * y[1] + k[2] * y[2]))
        })
    }

    /// Free rotation `e^{-iωt} φ`.
    pub fn rotated(&self, sg: &SpectralGrid, t: f64) -> FieldK {
        let w = sg.omega();
        self.map_modes(|i, z| z * Complex64::from_polar(1.0, -w[i] * t))
    }

    pub fn is_finite(&self) -> bool {
        check_finite(&self.values, "").is_ok()
    }

    /// `max_k |φ(-k) - conj(φ(k))|` over modes whose negative lies on the lattice.
    pub fn reality_defect(&self) -> f64 {
        let g = self.grid;
        (0..g.len())
            .filter_map(|i| g.negated(i).map(|j| (self.values[j] - self.values[i].conj()).norm()))
            .fold(0.0, f64::max)
    }
}

/// Continuum-normalized forward transform `ψ̂(k) = Σ_x e^{-ikx} ψ(x) Δx³`.
pub fn to_momentum(sg: &SpectralGrid, psi: &WaveX) -> Result<FieldK> {
    sg.spec().ensure_same(&psi.grid)?;
    let mut values = psi.values.clone();
    sg.forward_in_place(&mut values);
    Ok(FieldK {
        grid: psi.grid,
        values,
    })
}

/// Continuum-normalized inverse transform `ψ(x) = Σ_k e^{ikx} ψ̂(k) Δk/(2π)³`.
pub fn to_position(sg: &SpectralGrid, spectrum: &FieldK) -> Result<WaveX> {
    sg.spec().ensure_same(&spectrum.grid)?;
    let mut values = spectrum.values.clone();
    sg.inverse_in_place(&mut values);
    Ok(WaveX {
        grid: spectrum.grid,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid(l: f64, n: usize) -> SpectralGrid {
        SpectralGrid::new(GridSpec::new(l, n).unwrap()).unwrap()
    }

    #[test]
    fn gaussian_pair() {
        let sg = grid(16.0, 48);
        let psi = WaveX::from_real_fn(*sg.spec(), |x| {
            (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / 2.0).exp()
        });
        let hat = to_momentum(&sg, &psi).unwrap();
        let g = *sg.spec();
        let mut err: f64 = 0.0;
        for (i, z) in hat.values.iter().enumerate() {
            let k = g.wave_vector(i);
            let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
            let exact = (2.0 * PI).powf(1.5) * (-k2 / 2.0).exp();
            err = err.max((z - exact).norm());
        }
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn round_trip_and_constant() {
        let sg = grid(3.0, 8);
        let psi = WaveX::from_fn(*sg.spec(), |x| Complex64::new(x[0].sin() + x[2], x[1] * x[0]));
        let back = to_position(&sg, &to_momentum(&sg, &psi).unwrap()).unwrap();
        let d = back.sub(&psi).norm_l2() / psi.norm_l2();
        assert!(d < 1e-12);

        let c = Complex64::new(0.3, -1.2);
        let flat = WaveX::from_fn(*sg.spec(), |_| c);
        let hat = to_momentum(&sg, &flat).unwrap();
        for (i, z) in hat.values.iter().enumerate() {
            if i != 0 {
                assert!(z.norm() < 1e-12 * c.norm());
            }
        }
        assert!((hat.values[0] - c * 27.0).norm() < 1e-12);
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let sg = grid(3.0, 8);
        let psi = WaveX::zeros(GridSpec::new(4.0, 8).unwrap());
        assert!(matches!(
            to_momentum(&sg, &psi),
            Err(NelsonError::GridMismatch { .. })
        ));
    }

    #[test]
    fn weighted_norm_examples() {
        let sg = grid(2.0 * PI, 8);
        let g = *sg.spec();
        assert_eq!(FieldK::zeros(g).weighted_norm(&sg, 0.5), 0.0);
        // |k0| = 2 with Δk = 1
        let mut phi = FieldK::zeros(g);
        let a = Complex64::new(0.6, 0.8) * 3.0;
        phi.values[g.flat(2, 0, 0)] = a;
        for s in [-1.0, -0.5, 0.0, 0.5, 1.0, 2.0] {
            let v = phi.weighted_norm(&sg, s);
            assert!((v - a.norm() * 2f64.powf(s) * g.dk().sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn reality_defect_of_real_density() {
        let sg = grid(4.0, 8);
        let psi = WaveX::from_real_fn(*sg.spec(), |x| (x[0] - 0.3 * x[1]).cos() + x[2]);
        let hat = to_momentum(&sg, &psi).unwrap();
        assert!(hat.reality_defect() < 1e-12);
    }

    #[test]
    fn lattice_shift_matches_phase_translation() {
        let sg = grid(4.0, 8);
        let g = *sg.spec();
        let psi = WaveX::from_fn(g, |x| Complex64::new((-x[0] * x[0]).exp(), x[1]));
        let shifted = psi.shifted([1, -2, 3]);
        let y = [g.dx(), -2.0 * g.dx(), 3.0 * g.dx()];
        let a = to_momentum(&sg, &shifted).unwrap();
        let b = to_momentum(&sg, &psi).unwrap().translated(y);
        assert!(a.sub(&b).norm_l2() < 1e-12 * b.norm_l2());
    }
}
