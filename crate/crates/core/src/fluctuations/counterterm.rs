//! Continuum growth of the normal-ordering constant,
//! `c(Λ) = ∫_{|k| ≤ Λ} ω(k)^{-1} ⟨e^{ik·}ψ, R e^{ik·}ψ⟩ dk`.
//!
//! Each node is a Bloch-shifted solve: with `U = e^{ikx}`, `U†(h − e)U = (p + k)² + V − e`
//! and the projector moves to `e^{-ikx}ψ`, so the right-hand side stays the smooth `ψ`.

use std::borrow::Cow;

use serde::Serialize;

use crate::config::Tolerances;
use crate::error::{NelsonError, Result};
use crate::fields::FieldK;
use crate::grid::SpectralGrid;
use crate::linalg::{self, least_squares_slope, C};
use crate::quadrature::{gauss_legendre_on, sphere_26};
use crate::schrodinger::{potential_values, GroundStateBundle, Hamiltonian, ReducedResolvent};

#[derive(Debug, Clone, Serialize)]
pub struct CountertermNode {
    pub radius: f64,
    pub direction: [f64; 3],
    /// `⟨e^{ik·}ψ, R e^{ik·}ψ⟩`.
    pub value: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CountertermReport {
    pub lambdas: Vec<f64>,
    pub values: Vec<f64>,
    /// Slope of `c` against `ln Λ` over the upper half of the list.
    pub slope_top_half: f64,
    /// Slope over the whole list.
    pub slope_all: f64,
    /// `c(Λ_{i+1}) − c(Λ_i)`.
    pub increments: Vec<f64>,
    pub nodes: Vec<CountertermNode>,
    pub solves: usize,
}

/// `⟨e^{ik·}ψ, R e^{ik·}ψ⟩` for a continuum momentum `k`.
pub fn bloch_expectation(
    sg: &SpectralGrid,
    potential: &[f64],
    b: &GroundStateBundle,
    k: [f64; 3],
    tol: &Tolerances,
) -> Result<(f64, usize)> {
    let g = sg.spec();
    let chi: Vec<C> = b
        .psi
        .values
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let x = g.position(i);
            p * C::from_polar(1.0, -(k[0] * x[0] + k[1] * x[1] + k[2] * x[2]))
        })
        .collect();
    let k_n = g.k_nyquist();
    let band: Vec<f64> = (0..g.len())
        .map(|idx| {
            let q = g.wave_vector(idx);
            let inside = (0..3).all(|a| (q[a] + k[a]).abs() < k_n);
            if inside { 1.0 } else { 0.0 }
        })
        .collect();
    let mut chi_band = chi.clone();
    sg.apply_fourier_multiplier(&mut chi_band, &band);
    let h = Hamiltonian::new(sg, Cow::Borrowed(potential)).with_kinetic(sg.shifted_k2(k));
    let mut rhs = b.psi.values.clone();
    let res = if linalg::norm(&chi_band).powi(2) >= 0.5 * linalg::norm(&chi).powi(2) {
        linalg::project_out(&mut rhs, &linalg::normalized(&chi_band));
        ReducedResolvent::new(h, b.e, &chi_band, tol.cg_tol, tol.cg_max_iter)
    } else {
        ReducedResolvent::unprojected(h, b.e, tol.cg_tol, tol.cg_max_iter)
    };
    let (u, _, it) = res.solve_raw(&b.psi.values)?;
    Ok((linalg::dot(&rhs, &u).re * g.dv(), it))
}

/// `c(Λ)` on radial Gauss–Legendre nodes (two per interval, in `ln r` above the first
/// cutoff) times the 26-direction sphere rule.
pub fn counterterm_growth(
    sg: &SpectralGrid,
    b: &GroundStateBundle,
    phi: &FieldK,
    lambdas: &[f64],
    tol: &Tolerances,
) -> Result<CountertermReport> {
    sg.spec().ensure_same(&phi.grid)?;
    b.ensure_gap(tol.gap_floor)?;
    if lambdas.is_empty() || lambdas.windows(2).any(|w| !(w[1] > w[0])) || !(lambdas[0] > 0.0) {
        return Err(NelsonError::Config(format!(
            "Λ list must be positive and increasing, got {lambdas:?}"
        )));
    }
    let potential = potential_values(sg, phi)?;
    let dirs = sphere_26();
    let mut nodes = Vec::new();
    let mut values = Vec::with_capacity(lambdas.len());
    let mut total = 0.0;
    let mut lo = 0.0;
    for &hi in lambdas {
        // radial measure r² dr with the ω^{-1} = r^{-1} weight: r dr, or r² d(ln r)
        let radial: Vec<(f64, f64)> = if lo == 0.0 {
            let (x, w) = gauss_legendre_on(2, 0.0, hi);
            x.into_iter().zip(w).map(|(r, w)| (r, w * r)).collect()
        } else {
            let (x, w) = gauss_legendre_on(2, f64::ln(lo), hi.ln());
            x.into_iter().zip(w).map(|(t, w)| (t.exp(), w * (2.0 * t).exp())).collect()
        };
        for (r, wr) in radial {
            for &(d, wd) in &dirs {
                let k = [r * d[0], r * d[1], r * d[2]];
                let (value, iterations) = bloch_expectation(sg, &potential, b, k, tol)?;
                total += wr * wd * value;
                nodes.push(CountertermNode {
                    radius: r,
                    direction: d,
                    value,
                    iterations,
                });
            }
        }
        values.push(total);
        lo = hi;
    }
    let ln: Vec<f64> = lambdas.iter().map(|l| l.ln()).collect();
    let half = lambdas.len() / 2;
    let slope_top_half = if lambdas.len() - half >= 2 {
        least_squares_slope(&ln[half..], &values[half..])
    } else {
        f64::NAN
    };
    Ok(CountertermReport {
        lambdas: lambdas.to_vec(),
        increments: values.windows(2).map(|w| w[1] - w[0]).collect(),
        slope_all: least_squares_slope(&ln, &values),
        slope_top_half,
        values,
        solves: nodes.len(),
        nodes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::WaveX;
    use crate::grid::GridSpec;
    use crate::pekar::slaved_field;
    use crate::schrodinger::{ground_state, WarmStart};

    fn fixture() -> (SpectralGrid, FieldK, GroundStateBundle) {
        let sg = SpectralGrid::new(GridSpec::new(2.0, 16).unwrap()).unwrap();
        let seed = WaveX::from_real_fn(*sg.spec(), |x| {
            (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / 0.32).exp()
        })
        .normalized()
        .unwrap();
        let phi = slaved_field(&sg, &seed).unwrap();
        let b = ground_state(&sg, &phi, WarmStart::Wave(&seed), &Tolerances::default()).unwrap();
        (sg, phi, b)
    }

    #[test]
    fn large_momentum_expectation_is_inverse_square() {
        let (sg, phi, b) = fixture();
        let v = potential_values(&sg, &phi).unwrap();
        let tol = Tolerances::default();
        // beyond twice the lattice cutoff the sampled plane wave aliases onto 1
        let k_alias = 2.0 * sg.spec().k_nyquist();
        for r in [40.0, k_alias, 300.0] {
            let (val, _) = bloch_expectation(&sg, &v, &b, [r, 0.0, 0.0], &tol).unwrap();
            let ratio = val * r * r;
            assert!((ratio - 1.0).abs() < 0.2, "r = {r}: {ratio}");
        }
    }

    #[test]
    fn growth_is_increasing_and_logarithmic() {
        let (sg, phi, b) = fixture();
        let r = counterterm_growth(&sg, &b, &phi, &[10.0, 20.0, 40.0], &Tolerances::default()).unwrap();
        assert!(r.values.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(r.solves, 6 * 26);
        assert!((r.slope_all / (4.0 * std::f64::consts::PI) - 1.0).abs() < 0.3, "{}", r.slope_all);
        assert!(counterterm_growth(&sg, &b, &phi, &[10.0, 5.0], &Tolerances::default()).is_err());
    }
}
