//! Finite-difference checks of the adiabatic formulas along an aKG trajectory: the
//! Hellmann–Feynman rate `ė = ⟨ψ, V_{φ̇} ψ⟩` and the ground-state velocity `R V_{iωφ} ψ`.

use num_complex::Complex64;
use serde::Serialize;

use crate::akg::{akg_init, akg_step, AkgOptions, AkgState};
use crate::config::Tolerances;
use crate::error::{NelsonError, Result};
use crate::fields::FieldK;
use crate::grid::SpectralGrid;
use crate::schrodinger::{
    ground_state, ground_state_velocity, hellmann_feynman_rate, source_from_wave, WarmStart,
};

#[derive(Debug, Clone, Copy, Serialize)]
pub struct AdiabaticCheck {
    pub t: f64,
    pub hf_rate: f64,
    /// `(e(φ + hφ̇) − e(φ − hφ̇)) / 2h`.
    pub hf_difference: f64,
    pub hf_rel_err: f64,
    pub velocity_norm: f64,
    /// `‖v − (ψ(t+h) − ψ(t−h))/2h‖`.
    pub velocity_err: f64,
}

impl AdiabaticCheck {
    pub const HEADER: &'static str = "t,hf_rate,hf_difference,hf_rel_err,velocity_norm,velocity_err";
}

/// `φ̇ = −i(ωφ + σ(ψ_φ))` at a trajectory state.
pub fn field_velocity(sg: &SpectralGrid, s: &AkgState) -> Result<FieldK> {
    let src = source_from_wave(sg, &s.bundle.psi)?;
    let w = sg.omega();
    Ok(s.phi.map_modes(|i, z| Complex64::new(0.0, -1.0) * (w[i] * z + src.values[i])))
}

/// Checks at one trajectory state; `h_rate` perturbs the field along `φ̇`, `h_state` steps
/// the trajectory both ways.
pub fn check_state(
    sg: &SpectralGrid,
    s: &AkgState,
    h_rate: f64,
    h_state: f64,
    opts: &AkgOptions,
    tol: &Tolerances,
) -> Result<AdiabaticCheck> {
    let phi_dot = field_velocity(sg, s)?;
    let hf_rate = hellmann_feynman_rate(sg, &s.bundle, &phi_dot)?;
    let shifted = |sign: f64| -> Result<f64> {
        let mut phi = s.phi.clone();
        phi.axpy(Complex64::new(sign * h_rate, 0.0), &phi_dot);
        Ok(ground_state(sg, &phi, WarmStart::Bundle(&s.bundle), tol)?.e)
    };
    let hf_difference = (shifted(1.0)? - shifted(-1.0)?) / (2.0 * h_rate);
    let velocity = ground_state_velocity(sg, &s.phi, &s.bundle, tol)?;
    let fwd = akg_step(sg, s, h_state, opts, tol)?;
    let back = akg_step(sg, s, -h_state, opts, tol)?;
    let mut fd = fwd.bundle.psi.sub(&back.bundle.psi);
    fd.scale(Complex64::new(0.5 / h_state, 0.0));
    Ok(AdiabaticCheck {
        t: s.t,
        hf_rate,
        hf_difference,
        hf_rel_err: (hf_rate - hf_difference).abs() / hf_rate.abs(),
        velocity_norm: velocity.norm_l2(),
        velocity_err: velocity.sub(&fd).norm_l2(),
    })
}

/// Runs aKG from `φ0` with steps of at most `dt` and checks at each of `times`.
pub fn adiabatic_consistency(
    sg: &SpectralGrid,
    phi0: &FieldK,
    times: &[f64],
    dt: f64,
    h_rate: f64,
    h_state: f64,
    opts: &AkgOptions,
    tol: &Tolerances,
) -> Result<Vec<AdiabaticCheck>> {
    if times.iter().any(|t| *t < 0.0) || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(NelsonError::Config(format!(
            "check times must be nonnegative and increasing, got {times:?}"
        )));
    }
    let mut state = akg_init(sg, phi0, tol)?;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        let span = t - state.t;
        if span > 0.0 {
            let n = (span / dt).ceil() as usize;
            let step = span / n as f64;
            for _ in 0..n {
                state = akg_step(sg, &state, step, opts, tol)?;
            }
            state.t = t;
        }
        out.push(check_state(sg, &state, h_rate, h_state, opts, tol)?);
    }
    Ok(out)
}
