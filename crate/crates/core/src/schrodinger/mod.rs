//! The particle Hamiltonian `h_φ = p² + V_φ`, its field coupling, ground states and reduced
//! resolvent.
//!
//! The coupling is band-limited by the dealiasing mask `χ`:
//! `V_φ(x) = 2 Re Σ_k χ(k) ω(k)^{-1/2} e^{ikx} φ(k) Δk` and
//! `σ(ψ)(k) = χ(k) ω(k)^{-1/2} Σ_x e^{-ikx} |ψ(x)|² Δx³`,
//! so `⟨ψ, V_φ ψ⟩ = 2 Re⟨σ(ψ), φ⟩` holds exactly on the lattice.

mod eigen;
mod hamiltonian;
mod resolvent;

pub use eigen::{ground_state, ground_state_for_potential, GroundStateBundle, WarmStart};
pub use hamiltonian::Hamiltonian;
pub use resolvent::{
    apply_reduced_resolvent, apply_reduced_resolvent_for_potential, ReducedResolvent,
    ResolventSolve,
};

use num_complex::Complex64;

use crate::config::Tolerances;
use crate::error::Result;
use crate::fields::{FieldK, WaveX};
use crate::grid::SpectralGrid;

/// Real potential `V_φ` on the position lattice.
pub fn potential_values(sg: &SpectralGrid, phi: &FieldK) -> Result<Vec<f64>> {
    sg.spec().ensure_same(&phi.grid)?;
    let g = sg.spec();
    let scale = 2.0 * (2.0 * std::f64::consts::PI).powi(3);
    let mut buf: Vec<Complex64> = phi
        .values
        .iter()
        .zip(sg.omega())
        .zip(sg.dealias())
        .map(|((z, w), &keep)| if keep { z * w.powf(-0.5) } else { Complex64::default() })
        .collect();
    sg.inverse_in_place(&mut buf);
    debug_assert_eq!(buf.len(), g.len());
    Ok(buf.iter().map(|z| scale * z.re).collect())
}

/// `V_φ` as a real-valued wavefunction-shaped array.
pub fn potential_from_field(sg: &SpectralGrid, phi: &FieldK) -> Result<WaveX> {
    let v = potential_values(sg, phi)?;
    Ok(WaveX {
        grid: phi.grid,
        values: v.into_iter().map(|x| Complex64::new(x, 0.0)).collect(),
    })
}

/// Source `σ(ψ)` from a density array `|ψ|²`.
pub fn source_from_density(sg: &SpectralGrid, density: &[f64]) -> FieldK {
    let mut buf: Vec<Complex64> = density.iter().map(|&d| Complex64::new(d, 0.0)).collect();
    sg.forward_in_place(&mut buf);
    for ((z, w), &keep) in buf.iter_mut().zip(sg.omega()).zip(sg.dealias()) {
        *z = if keep { *z * w.powf(-0.5) } else { Complex64::default() };
    }
    FieldK {
        grid: *sg.spec(),
        values: buf,
    }
}

/// `σ(ψ)(k) = χ(k) ω(k)^{-1/2} (|ψ|²)^(k)`.
pub fn source_from_wave(sg: &SpectralGrid, psi: &WaveX) -> Result<FieldK> {
    sg.spec().ensure_same(&psi.grid)?;
    let n = psi.norm_l2();
    if (n - 1.0).abs() > 1e-8 {
        log::warn!("source_from_wave: input norm {n:.12} is not 1");
    }
    Ok(source_from_density(sg, &psi.density()))
}

/// `⟨ψ, V ψ⟩` for a real potential array.
pub fn potential_expectation(psi: &WaveX, potential: &[f64]) -> f64 {
    psi.values
        .iter()
        .zip(potential)
        .map(|(z, v)| v * z.norm_sqr())
        .sum::<f64>()
        * psi.grid.dv()
}

/// `⟨ψ, p² ψ⟩`.
pub fn kinetic_expectation(sg: &SpectralGrid, psi: &WaveX) -> f64 {
    let mut hat = psi.values.clone();
    sg.fft().forward(&mut hat);
    let s: f64 = hat.iter().zip(sg.k2()).map(|(z, k2)| k2 * z.norm_sqr()).sum();
    s / sg.len() as f64 * psi.grid.dv()
}

/// Hellmann–Feynman rate `⟨ψ_φ, V_{φ̇} ψ_φ⟩`.
pub fn hellmann_feynman_rate(
    sg: &SpectralGrid,
    bundle: &GroundStateBundle,
    phi_dot: &FieldK,
) -> Result<f64> {
    let v = potential_values(sg, phi_dot)?;
    Ok(potential_expectation(&bundle.psi, &v))
}

/// `∂_t ψ_{φ_t} = R_φ V_{iωφ} ψ_φ` along the free part of the field flow.
pub fn ground_state_velocity(
    sg: &SpectralGrid,
    phi: &FieldK,
    bundle: &GroundStateBundle,
    tol: &Tolerances,
) -> Result<WaveX> {
    let w = sg.omega();
    let iw_phi = phi.map_modes(|i, z| Complex64::new(0.0, w[i]) * z);
    let v = potential_values(sg, &iw_phi)?;
    let mut rhs = bundle.psi.clone();
    for (z, p) in rhs.values.iter_mut().zip(&v) {
        *z *= p;
    }
    Ok(apply_reduced_resolvent(sg, phi, bundle, &rhs, tol)?.solution)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use std::f64::consts::PI;

    fn grid(l: f64, n: usize) -> SpectralGrid {
        SpectralGrid::new(GridSpec::new(l, n).unwrap()).unwrap()
    }

    #[test]
    fn zero_field_gives_zero_potential() {
        let sg = grid(4.0, 8);
        let v = potential_values(&sg, &FieldK::zeros(*sg.spec())).unwrap();
        assert!(v.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn translation_covariance_on_lattice_shifts() {
        let sg = grid(4.0, 16);
        let g = *sg.spec();
        let phi = FieldK::from_fn(g, |k| {
            Complex64::new((-(k[0] * k[0] + 2.0 * k[1] * k[1]) / 10.0).exp(), 0.1 * k[2])
        });
        let shift = [2i64, -1, 3];
        let y = [2.0 * g.dx(), -g.dx(), 3.0 * g.dx()];
        let v = potential_values(&sg, &phi).unwrap();
        let vt = potential_values(&sg, &phi.translated(y)).unwrap();
        // V_{T_y φ}(x) = V_φ(x - y)
        for idx in 0..g.len() {
            let (i, j, l) = g.unflat(idx);
            let src = g.flat(
                g.slot(i as i64 - shift[0]),
                g.slot(j as i64 - shift[1]),
                g.slot(l as i64 - shift[2]),
            );
            assert!((vt[idx] - v[src]).abs() < 1e-12 * (1.0 + v[src].abs()));
        }
    }

    #[test]
    fn source_conjugation_symmetry_and_pairing() {
        let sg = grid(4.0, 16);
        let g = *sg.spec();
        let psi = WaveX::from_fn(g, |x| {
            Complex64::new((-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp(), 0.2 * x[0])
        })
        .normalized()
        .unwrap();
        let s = source_from_wave(&sg, &psi).unwrap();
        assert!(s.reality_defect() < 1e-12);
        let phi = FieldK::from_fn(g, |k| Complex64::new(1.0 / (1.0 + k[0] * k[0]), k[1] * 0.01));
        let v = potential_values(&sg, &phi).unwrap();
        let lhs = potential_expectation(&psi, &v);
        let rhs = 2.0 * s.inner(&phi).re;
        assert!((lhs - rhs).abs() < 1e-11 * lhs.abs().max(1.0));
    }

    #[test]
    fn gaussian_source_closed_form() {
        let sg = grid(14.0, 32);
        let g = *sg.spec();
        let psi = WaveX::from_real_fn(g, |x| {
            PI.powf(-0.75) * (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / 2.0).exp()
        });
        let s = source_from_wave(&sg, &psi).unwrap();
        let mut err: f64 = 0.0;
        for i in 0..g.len() {
            if !sg.dealias()[i] {
                continue;
            }
            let exact = sg.omega()[i].powf(-0.5) * (-sg.k2()[i] / 4.0).exp();
            err = err.max((s.values[i] - exact).norm());
        }
        assert!(err < 1e-6, "{err}");
    }
}
