//! Adiabatic Klein–Gordon dynamics `i∂_t φ = ωφ + σ(ψ_φ)` with ground-state continuation.
//!
//! The stepper is an exponential midpoint rule on the Duhamel form. Both stages integrate
//! the source exactly against the free propagator,
//! `φ_{1/2} = E(dt/2) φ − i Φ(dt/2) σ(ψ_φ)`, `φ' = E(dt) φ − i Φ(dt) σ(ψ_{φ_{1/2}})`,
//! with `E(τ) = e^{-iωτ}` and `Φ(τ) = (1 − e^{-iωτ})/(iω)`, so fixed points of
//! `ωφ + σ(ψ_φ) = 0` are exactly stationary.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::error::{NelsonError, Result};
use crate::fields::FieldK;
use crate::grid::SpectralGrid;
use crate::schrodinger::{ground_state, source_from_wave, GroundStateBundle, WarmStart};

/// Stepper settings and test hooks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AkgOptions {
    pub dt_max: f64,
    /// Replace the source by zero (free rotation).
    pub force_free_field: bool,
    /// Extra fixed-point passes on the midpoint stage.
    pub midpoint_iterations: usize,
    /// Integrate the linear part of the source across the step with exact weights.
    pub linear_correction: bool,
}

impl Default for AkgOptions {
    fn default() -> Self {
        AkgOptions {
            dt_max: 1e-2,
            force_free_field: false,
            midpoint_iterations: 0,
            linear_correction: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AkgStatus {
    Running,
    GapCollapsed,
}

#[derive(Debug, Clone)]
pub struct AkgState {
    pub t: f64,
    pub phi: FieldK,
    pub bundle: GroundStateBundle,
    pub mu: f64,
    pub e_field: f64,
    pub status: AkgStatus,
}

/// `𝓔_field(φ) = e(φ) + ‖φ‖²_{𝔥_{1/2}}`.
pub fn field_energy(sg: &SpectralGrid, phi: &FieldK, bundle: &GroundStateBundle) -> f64 {
    bundle.e + phi.weighted_norm(sg, 0.5).powi(2)
}

/// `e^{-iωτ}` per mode.
pub fn free_propagator(sg: &SpectralGrid, tau: f64) -> Vec<Complex64> {
    sg.omega()
        .iter()
        .map(|w| Complex64::from_polar(1.0, -w * tau))
        .collect()
}

/// `(e^z − 1)/z`.
pub fn phi1(z: Complex64) -> Complex64 {
    if z.norm() < 0.5 {
        let mut term = Complex64::new(1.0, 0.0);
        let mut sum = term;
        for n in 1..20 {
            term *= z / (n as f64 + 1.0);
            sum += term;
        }
        sum
    } else {
        (z.exp() - 1.0) / z
    }
}

/// `(e^z (z − 1) + 1)/z² = ∫_0^1 u e^{zu} du`.
pub fn psi2(z: Complex64) -> Complex64 {
    if z.norm() < 0.5 {
        // Σ z^n / (n! (n + 2))
        let mut fact = Complex64::new(1.0, 0.0);
        let mut sum = Complex64::new(0.5, 0.0);
        for n in 1..22 {
            fact *= z / n as f64;
            sum += fact / (n as f64 + 2.0);
        }
        sum
    } else {
        (z.exp() * (z - 1.0) + 1.0) / (z * z)
    }
}

/// `∫_0^1 e^{z(1−τ)} τ^n dτ` for `n = 0, 1, 2`.
pub fn exp_moments(z: Complex64) -> [Complex64; 3] {
    let g = |m: usize| -> Complex64 {
        if z.norm() < 1.0 {
            let mut fact = Complex64::new(1.0, 0.0);
            let mut sum = Complex64::new(1.0 / (m as f64 + 1.0), 0.0);
            for n in 1..28 {
                fact *= z / n as f64;
                sum += fact / (n + m + 1) as f64;
            }
            sum
        } else {
            let ez = z.exp();
            let mut gm = (ez - 1.0) / z;
            for j in 1..=m {
                gm = (ez - gm * j as f64) / z;
            }
            gm
        }
    };
    let (g0, g1, g2) = (g(0), g(1), g(2));
    [g0, g0 - g1, g0 - g1 * 2.0 + g2]
}

/// Weights of `∫_0^h e^{-iω(h−s)} q(s) ds` for the quadratic `q` through three nodes.
/// `ahead` selects nodes at `0, h, 2h`; otherwise `−h, 0, h`.
fn quadratic_weights(w: f64, h: f64, ahead: bool) -> [Complex64; 3] {
    let [m0, m1, m2] = exp_moments(Complex64::new(0.0, -w * h));
    if ahead {
        [
            (m2 - m1 * 3.0 + m0 * 2.0) * (0.5 * h),
            (m1 * 2.0 - m2) * h,
            (m2 - m1) * (0.5 * h),
        ]
    } else {
        [(m2 - m1) * (0.5 * h), (m0 - m2) * h, (m2 + m1) * (0.5 * h)]
    }
}

/// `E(τ) φ − i Φ(τ) s`.
pub(crate) fn duhamel(sg: &SpectralGrid, phi: &FieldK, source: Option<&FieldK>, tau: f64) -> FieldK {
    let w = sg.omega();
    let mut out = phi.clone();
    for (i, z) in out.values.iter_mut().enumerate() {
        let arg = Complex64::new(0.0, -w[i] * tau);
        let e = arg.exp();
        *z *= e;
        if let Some(s) = source {
            // −i Φ(τ) = −i τ φ1(−iωτ)
            *z += Complex64::new(0.0, -tau) * phi1(arg) * s.values[i];
        }
    }
    out
}

/// Midpoint integrand of the phase `μ`: `Im⟨φ, ∂φ⟩ + ‖φ‖²_{𝔥_{1/2}} + e(φ)` with
/// `∂φ = −i(ωφ + σ)`, which reduces to `e(φ) − Re⟨φ, σ⟩`.
pub fn mu_integrand(phi: &FieldK, source: &FieldK, e: f64) -> f64 {
    e - phi.inner(source).re
}

pub fn akg_init(
    sg: &SpectralGrid,
    phi0: &FieldK,
    tol: &Tolerances,
) -> Result<AkgState> {
    sg.spec().ensure_same(&phi0.grid)?;
    let bundle = ground_state(sg, phi0, WarmStart::Cold, tol)?;
    bundle.ensure_bound(tol.e_tol)?;
    bundle.ensure_gap(tol.gap_floor)?;
    let e_field = field_energy(sg, phi0, &bundle);
    Ok(AkgState {
        t: 0.0,
        phi: phi0.clone(),
        bundle,
        mu: 0.0,
        e_field,
        status: AkgStatus::Running,
    })
}

fn source_of(sg: &SpectralGrid, b: &GroundStateBundle, opts: &AkgOptions) -> Result<Option<FieldK>> {
    if opts.force_free_field {
        Ok(None)
    } else {
        source_from_wave(sg, &b.psi).map(Some)
    }
}

pub fn akg_step(
    sg: &SpectralGrid,
    s: &AkgState,
    dt: f64,
    opts: &AkgOptions,
    tol: &Tolerances,
) -> Result<AkgState> {
    if s.status != AkgStatus::Running {
        return Err(NelsonError::Stopped(format!(
            "aKG state at t = {} has collapsed gap",
            s.t
        )));
    }
    if dt.abs() > opts.dt_max * (1.0 + 1e-12) {
        return Err(NelsonError::StepTooLarge {
            requested: dt.abs(),
            bound: opts.dt_max,
        });
    }
    let s0 = source_of(sg, &s.bundle, opts)?;
    let mut phi_mid = duhamel(sg, &s.phi, s0.as_ref(), 0.5 * dt);
    let mut b_mid = ground_state(sg, &phi_mid, WarmStart::Bundle(&s.bundle), tol)?;
    let mut s_mid = source_of(sg, &b_mid, opts)?;
    for _ in 0..opts.midpoint_iterations {
        // symmetric midpoint: average of the half-step forward from φ and back from φ'
        let phi_new = duhamel(sg, &s.phi, s_mid.as_ref(), dt);
        let back = duhamel(sg, &phi_new, s_mid.as_ref(), -0.5 * dt);
        let fwd = duhamel(sg, &s.phi, s_mid.as_ref(), 0.5 * dt);
        phi_mid = fwd.add(&back).scaled(Complex64::new(0.5, 0.0));
        b_mid = ground_state(sg, &phi_mid, WarmStart::Bundle(&b_mid), tol)?;
        s_mid = source_of(sg, &b_mid, opts)?;
    }
    let mut phi_new = duhamel(sg, &s.phi, s_mid.as_ref(), dt);
    let mut bundle = ground_state(sg, &phi_new, WarmStart::Bundle(&b_mid), tol)?;
    if let (true, Some(s0)) = (opts.linear_correction, s0.as_ref()) {
        // −i ∫ e^{−iω(dt−r)} (r − dt/2) dr · (σ₁ − σ₀)/dt
        let s1 = source_from_wave(sg, &bundle.psi)?;
        let w = sg.omega();
        for (i, z) in phi_new.values.iter_mut().enumerate() {
            let [m0, m1, _] = exp_moments(Complex64::new(0.0, -w[i] * dt));
            *z += Complex64::new(0.0, -dt) * (m1 - m0 * 0.5) * (s1.values[i] - s0.values[i]);
        }
        bundle = ground_state(sg, &phi_new, WarmStart::Bundle(&bundle), tol)?;
    }
    let true_mid_source = source_from_wave(sg, &b_mid.psi)?;
    let mu = s.mu + dt * mu_integrand(&phi_mid, &true_mid_source, b_mid.e);
    let e_field = field_energy(sg, &phi_new, &bundle);
    let status = if bundle.gap >= tol.gap_floor && b_mid.gap >= tol.gap_floor {
        AkgStatus::Running
    } else {
        AkgStatus::GapCollapsed
    };
    Ok(AkgState {
        t: s.t + dt,
        phi: phi_new,
        bundle,
        mu,
        e_field,
        status,
    })
}

/// One output row of a trajectory.
#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub phi_l2: f64,
    pub phi_h_half: f64,
    pub e: f64,
    pub lambda1: f64,
    pub gap: f64,
    pub e_field: f64,
    pub mu: f64,
    pub diagnostics: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct TrajectoryRecord {
    pub rows: Vec<TrajectoryRow>,
    pub collapse_time: Option<f64>,
}

impl TrajectoryRecord {
    pub const HEADER: &'static str = "t,phi_l2,phi_h_half,e,lambda1,gap,E_field,mu";

    pub fn push_state(&mut self, sg: &SpectralGrid, s: &AkgState) {
        let mut diagnostics = BTreeMap::new();
        diagnostics.insert("eig_residual".into(), s.bundle.residual);
        diagnostics.insert("eig_iterations".into(), s.bundle.iterations as f64);
        self.rows.push(TrajectoryRow {
            t: s.t,
            phi_l2: s.phi.norm_l2(),
            phi_h_half: s.phi.weighted_norm(sg, 0.5),
            e: s.bundle.e,
            lambda1: s.bundle.lambda1,
            gap: s.bundle.gap,
            e_field: s.e_field,
            mu: s.mu,
            diagnostics,
        });
    }

    pub fn min_gap(&self) -> f64 {
        self.rows.iter().map(|r| r.gap).fold(f64::INFINITY, f64::min)
    }

    /// Largest `|𝓔(t) − 𝓔(0)| / |𝓔(0)|`.
    pub fn energy_drift(&self) -> f64 {
        let e0 = match self.rows.first() {
            Some(r) => r.e_field,
            None => return 0.0,
        };
        self.rows
            .iter()
            .map(|r| (r.e_field - e0).abs() / e0.abs())
            .fold(0.0, f64::max)
    }
}

/// Output of [`run_akg`].
#[derive(Debug, Clone)]
pub struct AkgRun {
    pub record: TrajectoryRecord,
    pub final_state: AkgState,
    /// `(t, φ_t, ψ_t)` at every output row.
    pub snapshots: Vec<AkgState>,
}

/// Steps from `t = 0` to `T` recording every `output_every` steps; stops at gap collapse.
pub fn run_akg(
    sg: &SpectralGrid,
    start: AkgState,
    t_end: f64,
    dt: f64,
    output_every: usize,
    keep_snapshots: bool,
    opts: &AkgOptions,
    tol: &Tolerances,
) -> Result<AkgRun> {
    let steps = (t_end / dt).abs().round() as usize;
    if steps == 0 || ((steps as f64 * dt) - t_end).abs() > 1e-9 * t_end.abs().max(1.0) {
        return Err(NelsonError::Config(format!(
            "T = {t_end} is not a positive multiple of dt = {dt}"
        )));
    }
    let every = output_every.max(1);
    let mut record = TrajectoryRecord::default();
    let mut snapshots = Vec::new();
    let t0 = start.t;
    record.push_state(sg, &start);
    if keep_snapshots {
        snapshots.push(start.clone());
    }
    let mut state = start;
    for n in 1..=steps {
        let mut next = akg_step(sg, &state, dt, opts, tol)?;
        next.t = t0 + n as f64 * dt;
        state = next;
        let collapsed = state.status == AkgStatus::GapCollapsed;
        if n % every == 0 || n == steps || collapsed {
            record.push_state(sg, &state);
            if keep_snapshots {
                snapshots.push(state.clone());
            }
        }
        if collapsed {
            record.collapse_time = Some(state.t);
            log::warn!("gap collapsed at t = {}", state.t);
            break;
        }
    }
    Ok(AkgRun {
        record,
        final_state: state,
        snapshots,
    })
}

/// Settings for the contraction-map solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PicardOptions {
    pub dt: f64,
    pub tol: f64,
    pub max_sweeps: usize,
    pub t_max: f64,
}

impl Default for PicardOptions {
    fn default() -> Self {
        PicardOptions {
            dt: 1e-3,
            tol: 1e-9,
            max_sweeps: 40,
            t_max: 0.5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PicardResult {
    pub times: Vec<f64>,
    pub fields: Vec<FieldK>,
    pub bundles: Vec<GroundStateBundle>,
    /// `sup_t ‖u^{(n+1)}_t − u^{(n)}_t‖_{𝔥_{1/2}}` per sweep.
    pub residuals: Vec<f64>,
}

/// Iterates `(𝒯u)(t) = e^{-iωt}φ₀ − i∫_0^t e^{-iω(t−s)} σ(ψ_{u_s}) ds` on a uniform node grid.
///
/// The time integral uses product integration: `σ` is interpolated by quadratics through
/// neighbouring nodes and integrated exactly against the oscillatory kernel.
pub fn akg_picard_solve(
    sg: &SpectralGrid,
    phi0: &FieldK,
    t_end: f64,
    opts: &PicardOptions,
    tol: &Tolerances,
) -> Result<PicardResult> {
    sg.spec().ensure_same(&phi0.grid)?;
    if t_end > opts.t_max || t_end < 0.0 {
        return Err(NelsonError::Config(format!(
            "Picard horizon {t_end} outside [0, {}]",
            opts.t_max
        )));
    }
    let b0 = ground_state(sg, phi0, WarmStart::Cold, tol)?;
    if t_end == 0.0 {
        return Ok(PicardResult {
            times: vec![0.0],
            fields: vec![phi0.clone()],
            bundles: vec![b0],
            residuals: Vec::new(),
        });
    }
    let steps = (t_end / opts.dt).ceil().max(1.0) as usize;
    let h = t_end / steps as f64;
    let times: Vec<f64> = (0..=steps).map(|j| j as f64 * h).collect();
    let free: Vec<FieldK> = times.iter().map(|&t| phi0.rotated(sg, t)).collect();
    let w = sg.omega();
    let step_prop = free_propagator(sg, h);
    let ahead: Vec<[Complex64; 3]> = w.iter().map(|&wk| quadratic_weights(wk, h, true)).collect();
    let behind: Vec<[Complex64; 3]> = w.iter().map(|&wk| quadratic_weights(wk, h, false)).collect();
    let linear: Vec<[Complex64; 2]> = w
        .iter()
        .map(|wk| {
            let z = Complex64::new(0.0, -wk * h);
            let a = psi2(z) * h;
            [a, phi1(z) * h - a]
        })
        .collect();

    let mut u = free.clone();
    let mut bundles: Vec<GroundStateBundle> = Vec::with_capacity(steps + 1);
    bundles.push(b0);
    for j in 1..=steps {
        let b = ground_state(sg, &u[j], WarmStart::Bundle(&bundles[j - 1]), tol)?;
        bundles.push(b);
    }
    let mut residuals = Vec::new();
    for _sweep in 0..opts.max_sweeps {
        let sources: Vec<FieldK> = bundles
            .iter()
            .map(|b| source_from_wave(sg, &b.psi))
            .collect::<Result<_>>()?;
        let mut integral = FieldK::zeros(*sg.spec());
        let mut next = Vec::with_capacity(steps + 1);
        next.push(phi0.clone());
        for j in 1..=steps {
            for i in 0..integral.values.len() {
                let src = if steps == 1 {
                    let [a, b] = linear[i];
                    a * sources[0].values[i] + b * sources[1].values[i]
                } else if j < steps {
                    let [a, b, c] = ahead[i];
                    a * sources[j - 1].values[i] + b * sources[j].values[i] + c * sources[j + 1].values[i]
                } else {
                    let [a, b, c] = behind[i];
                    a * sources[j - 2].values[i] + b * sources[j - 1].values[i] + c * sources[j].values[i]
                };
                integral.values[i] = step_prop[i] * integral.values[i] + src;
            }
            let mut uj = free[j].clone();
            uj.axpy(Complex64::new(0.0, -1.0), &integral);
            next.push(uj);
        }
        let res = next
            .iter()
            .zip(&u)
            .map(|(a, b)| a.sub(b).weighted_norm(sg, 0.5))
            .fold(0.0, f64::max);
        residuals.push(res);
        u = next;
        for j in 1..=steps {
            let b = ground_state(sg, &u[j], WarmStart::Bundle(&bundles[j]), tol)?;
            bundles[j] = b;
        }
        if res <= opts.tol {
            return Ok(PicardResult {
                times,
                fields: u,
                bundles,
                residuals,
            });
        }
    }
    Err(NelsonError::NoContraction { history: residuals })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_functions_series_matches_closed_form() {
        for z in [
            Complex64::new(0.0, 0.49),
            Complex64::new(0.3, -0.2),
            Complex64::new(0.0, -0.5001),
        ] {
            let a = (z.exp() - 1.0) / z;
            let b = (z.exp() * (z - 1.0) + 1.0) / (z * z);
            assert!((phi1(z) - a).norm() < 1e-13);
            assert!((psi2(z) - b).norm() < 1e-12);
        }
        assert!((phi1(Complex64::default()) - 1.0).norm() < 1e-16);
        assert!((psi2(Complex64::default()) - 0.5).norm() < 1e-16);
    }

    #[test]
    fn quadratic_product_weights_are_exact_on_quadratics() {
        let q = |s: f64| 0.3 - 1.7 * s + 2.2 * s * s;
        for &(w, h) in &[(0.4, 0.1), (40.0, 0.05), (3.0, 1e-3)] {
            let reference = crate::quadrature::integrate(
                |s| (Complex64::new(0.0, -w * (h - s)).exp() * q(s)).re,
                0.0,
                h,
                4,
                16,
            );
            let reference_im = crate::quadrature::integrate(
                |s| (Complex64::new(0.0, -w * (h - s)).exp() * q(s)).im,
                0.0,
                h,
                4,
                16,
            );
            let a = quadratic_weights(w, h, true);
            let fa = a[0] * q(0.0) + a[1] * q(h) + a[2] * q(2.0 * h);
            let b = quadratic_weights(w, h, false);
            let fb = b[0] * q(-h) + b[1] * q(0.0) + b[2] * q(h);
            for f in [fa, fb] {
                assert!((f.re - reference).abs() < 1e-13 * (1.0 + h));
                assert!((f.im - reference_im).abs() < 1e-13 * (1.0 + h));
            }
        }
    }

    #[test]
    fn mu_integrand_reduces_to_energy_minus_overlap() {
        let g = crate::grid::GridSpec::new(4.0, 8).unwrap();
        let sg = SpectralGrid::new(g).unwrap();
        let phi = FieldK::from_fn(g, |k| Complex64::new(1.0 / (1.0 + k[0].abs()), k[1] * 0.1));
        let src = FieldK::from_fn(g, |k| Complex64::new((-k[2] * k[2]).exp(), 0.2));
        let w = sg.omega();
        let dphi = phi
            .map_modes(|i, z| Complex64::new(0.0, -1.0) * (w[i] * z + src.values[i]));
        let direct = phi.inner(&dphi).im + phi.weighted_norm(&sg, 0.5).powi(2) - 3.0;
        let m = mu_integrand(&phi, &src, -3.0);
        assert!((m - direct).abs() < 1e-12 * m.abs().max(1.0), "{m} {direct}");
    }
}
