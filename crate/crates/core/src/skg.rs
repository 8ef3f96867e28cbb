//! The ε-dependent Schrödinger–Klein–Gordon system on the slow time scale,
//! `i∂_s u = ε^{-2} h_{w_s} u`, `i∂_s w = ω w + σ(u)`, and its comparison with aKG.
//!
//! One step predicts `w_{1/2} = E(ds/2) w − i Φ(ds/2) σ(u)`, propagates `u` under the frozen
//! `h_{w_{1/2}}` (Strang splitting or a Lanczos exponential), and closes the field step with the
//! averaged source `½(σ(u_n) + σ(u_{n+1}))`. The adiabatic phase `∫ e(w_r) dr` is accumulated
//! from periodic ground-state refreshes with cubic Hermite interpolation, the slope being the
//! Hellmann–Feynman rate.

use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::akg::{duhamel, run_akg, AkgOptions, AkgState, AkgStatus};
use crate::config::Tolerances;
use crate::error::{NelsonError, Result};
use crate::fields::{FieldK, WaveX};
use crate::grid::SpectralGrid;
use crate::krylov::expm_krylov;
use crate::linalg::least_squares_slope;
use crate::schrodinger::{
    ground_state, hellmann_feynman_rate, kinetic_expectation, potential_expectation,
    potential_values, source_from_density, GroundStateBundle, Hamiltonian, WarmStart,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SkgScheme {
    /// Kinetic half steps exact in momentum space around a pointwise potential step.
    Strang,
    /// Lanczos exponential of the frozen midpoint Hamiltonian.
    Krylov,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SkgOptions {
    /// Largest micro-time step; the slow step is bounded by `ε² · micro_dt_max`.
    pub micro_dt_max: f64,
    /// Ground-state refresh cadence for the phase integral, in steps.
    pub refresh_every: usize,
    pub scheme: SkgScheme,
    /// Drop `σ` from the field equation and `V` from the particle equation.
    pub force_free_field: bool,
    pub krylov_tol: f64,
    pub krylov_max_dim: usize,
    /// Constant added to `h` and to the phase accumulator (gauge test hook).
    pub energy_shift: f64,
}

impl Default for SkgOptions {
    fn default() -> Self {
        SkgOptions {
            micro_dt_max: 2e-3,
            refresh_every: 25,
            scheme: SkgScheme::Krylov,
            force_free_field: false,
            krylov_tol: 1e-12,
            krylov_max_dim: 40,
            energy_shift: 0.0,
        }
    }
}

/// Ground-state data at the last refresh.
#[derive(Debug, Clone)]
pub struct PhaseAnchor {
    pub s: f64,
    /// `e(w_s)` plus the gauge shift.
    pub e: f64,
    /// `d e / ds` by Hellmann–Feynman.
    pub rate: f64,
    pub bundle: GroundStateBundle,
}

#[derive(Debug, Clone)]
pub struct SkgState {
    pub s: f64,
    pub eps: f64,
    pub psi: WaveX,
    pub phi: FieldK,
    pub mass: f64,
    pub e_semi: f64,
    /// `∫_0^s e(w_r) dr` up to the last refresh.
    pub phase_integral: f64,
    pub steps: u64,
    pub anchor: PhaseAnchor,
    source: FieldK,
}

/// `⟨ψ, p²ψ⟩ + ‖φ‖²_{𝔥_{1/2}} + ⟨ψ, V_φ ψ⟩`.
pub fn semiclassical_energy(sg: &SpectralGrid, psi: &WaveX, phi: &FieldK) -> Result<f64> {
    sg.spec().ensure_same(&psi.grid)?;
    let v = potential_values(sg, phi)?;
    Ok(kinetic_expectation(sg, psi)
        + phi.weighted_norm(sg, 0.5).powi(2)
        + potential_expectation(psi, &v))
}

fn source_of(sg: &SpectralGrid, psi: &WaveX, opts: &SkgOptions) -> FieldK {
    if opts.force_free_field {
        FieldK::zeros(*sg.spec())
    } else {
        source_from_density(sg, &psi.density())
    }
}

fn field_rate(sg: &SpectralGrid, phi: &FieldK, source: &FieldK) -> FieldK {
    let w = sg.omega();
    phi.map_modes(|i, z| Complex64::new(0.0, -1.0) * (w[i] * z + source.values[i]))
}

fn make_anchor(
    sg: &SpectralGrid,
    s: f64,
    phi: &FieldK,
    source: &FieldK,
    warm: WarmStart<'_>,
    opts: &SkgOptions,
    tol: &Tolerances,
) -> Result<PhaseAnchor> {
    let bundle = ground_state(sg, phi, warm, tol)?;
    bundle.ensure_gap(tol.gap_floor)?;
    let rate = hellmann_feynman_rate(sg, &bundle, &field_rate(sg, phi, source))?;
    Ok(PhaseAnchor {
        s,
        e: bundle.e + opts.energy_shift,
        rate,
        bundle,
    })
}

pub fn skg_init(
    sg: &SpectralGrid,
    psi0: &WaveX,
    phi0: &FieldK,
    eps: f64,
    opts: &SkgOptions,
    tol: &Tolerances,
) -> Result<SkgState> {
    sg.spec().ensure_same(&psi0.grid)?;
    sg.spec().ensure_same(&phi0.grid)?;
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(NelsonError::Config(format!("eps = {eps} outside (0, 1]")));
    }
    let source = source_of(sg, psi0, opts);
    let anchor = make_anchor(sg, 0.0, phi0, &source, WarmStart::Wave(psi0), opts, tol)?;
    Ok(SkgState {
        s: 0.0,
        eps,
        psi: psi0.clone(),
        phi: phi0.clone(),
        mass: psi0.norm_l2(),
        e_semi: semiclassical_energy(sg, psi0, phi0)?,
        phase_integral: 0.0,
        steps: 0,
        anchor,
        source,
    })
}

/// Re-solves the ground state at the current field and advances the phase integral to `s`.
pub fn skg_refresh(sg: &SpectralGrid, state: &mut SkgState, opts: &SkgOptions, tol: &Tolerances) -> Result<()> {
    if state.s == state.anchor.s {
        return Ok(());
    }
    let next = make_anchor(
        sg,
        state.s,
        &state.phi,
        &state.source,
        WarmStart::Bundle(&state.anchor.bundle),
        opts,
        tol,
    )?;
    let a = &state.anchor;
    let h = next.s - a.s;
    state.phase_integral += 0.5 * h * (a.e + next.e) + h * h / 12.0 * (a.rate - next.rate);
    state.anchor = next;
    Ok(())
}

fn propagate_particle(
    sg: &SpectralGrid,
    psi: &WaveX,
    potential: Vec<f64>,
    tau: f64,
    opts: &SkgOptions,
) -> Result<WaveX> {
    let values = match opts.scheme {
        SkgScheme::Strang => {
            let half: Vec<Complex64> = sg
                .k2()
                .iter()
                .map(|k2| Complex64::from_polar(1.0, -0.5 * tau * k2))
                .collect();
            let mut u = psi.values.clone();
            sg.apply_complex_multiplier(&mut u, &half);
            for (z, v) in u.iter_mut().zip(&potential) {
                *z *= Complex64::from_polar(1.0, -tau * v);
            }
            sg.apply_complex_multiplier(&mut u, &half);
            u
        }
        SkgScheme::Krylov => {
            let h = Hamiltonian::new(sg, potential.into());
            expm_krylov(|v| h.apply(v), &psi.values, tau, opts.krylov_tol, opts.krylov_max_dim)?.value
        }
    };
    Ok(WaveX {
        grid: psi.grid,
        values,
    })
}

pub fn skg_step(
    sg: &SpectralGrid,
    state: &SkgState,
    ds: f64,
    opts: &SkgOptions,
    tol: &Tolerances,
) -> Result<SkgState> {
    let bound = state.eps * state.eps * opts.micro_dt_max;
    if !(ds > 0.0) || ds > bound * (1.0 + 1e-12) {
        return Err(NelsonError::StepTooLarge {
            requested: ds,
            bound,
        });
    }
    let tau = ds / (state.eps * state.eps);
    let phi_half = duhamel(sg, &state.phi, Some(&state.source), 0.5 * ds);
    let mut potential = if opts.force_free_field {
        vec![0.0; sg.len()]
    } else {
        potential_values(sg, &phi_half)?
    };
    if opts.energy_shift != 0.0 {
        for v in potential.iter_mut() {
            *v += opts.energy_shift;
        }
    }
    let psi = propagate_particle(sg, &state.psi, potential, tau, opts)?;
    let source = source_of(sg, &psi, opts);
    let mut mid = state.source.clone();
    mid.axpy(Complex64::new(1.0, 0.0), &source);
    mid.scale(Complex64::new(0.5, 0.0));
    let phi = duhamel(sg, &state.phi, Some(&mid), ds);
    if !psi.is_finite() || !phi.is_finite() {
        return Err(NelsonError::Domain(format!("SKG state non-finite at s = {}", state.s + ds)));
    }
    let mut next = SkgState {
        s: state.s + ds,
        eps: state.eps,
        mass: psi.norm_l2(),
        e_semi: state.e_semi,
        psi,
        phi,
        phase_integral: state.phase_integral,
        steps: state.steps + 1,
        anchor: state.anchor.clone(),
        source,
    };
    if opts.refresh_every > 0 && next.steps % opts.refresh_every as u64 == 0 {
        skg_refresh(sg, &mut next, opts, tol)?;
    }
    Ok(next)
}

/// Conserved quantities and phase data at an output time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkgRow {
    pub s: f64,
    pub mass: f64,
    pub e_semi: f64,
    pub phase_integral: f64,
    pub e: f64,
    pub gap: f64,
}

impl SkgRow {
    pub const HEADER: &'static str = "s,mass,E_semi,phase_integral,e,gap";
}

#[derive(Debug, Clone)]
pub struct SkgRun {
    pub rows: Vec<SkgRow>,
    pub final_state: SkgState,
    pub snapshots: Vec<SkgState>,
}

impl SkgRun {
    pub fn mass_drift(&self) -> f64 {
        let m0 = self.rows[0].mass;
        self.rows.iter().map(|r| (r.mass - m0).abs()).fold(0.0, f64::max)
    }

    /// `max |E_s − E_0| / |E_0|`.
    pub fn energy_drift(&self) -> f64 {
        let e0 = self.rows[0].e_semi;
        self.rows
            .iter()
            .map(|r| (r.e_semi - e0).abs())
            .fold(0.0, f64::max)
            / e0.abs().max(f64::MIN_POSITIVE)
    }
}

fn row_of(sg: &SpectralGrid, state: &mut SkgState) -> Result<SkgRow> {
    state.e_semi = semiclassical_energy(sg, &state.psi, &state.phi)?;
    Ok(SkgRow {
        s: state.s,
        mass: state.mass,
        e_semi: state.e_semi,
        phase_integral: state.phase_integral,
        e: state.anchor.bundle.e,
        gap: state.anchor.bundle.gap,
    })
}

/// Integrates to `s_end` in steps of `ds`, refreshing and recording every `output_every` steps.
#[allow(clippy::too_many_arguments)]
pub fn run_skg(
    sg: &SpectralGrid,
    start: SkgState,
    s_end: f64,
    ds: f64,
    output_every: usize,
    keep_snapshots: bool,
    opts: &SkgOptions,
    tol: &Tolerances,
) -> Result<SkgRun> {
    let steps = (s_end / ds).round() as usize;
    if steps == 0 || ((steps as f64 * ds) - s_end).abs() > 1e-9 * s_end.abs().max(1.0) {
        return Err(NelsonError::Config(format!(
            "s = {s_end} is not a positive multiple of ds = {ds}"
        )));
    }
    let every = output_every.max(1);
    let s0 = start.s;
    let mut state = start;
    let mut rows = vec![row_of(sg, &mut state)?];
    let mut snapshots = Vec::new();
    if keep_snapshots {
        snapshots.push(state.clone());
    }
    for n in 1..=steps {
        let mut next = skg_step(sg, &state, ds, opts, tol)?;
        next.s = s0 + n as f64 * ds;
        state = next;
        if n % every == 0 || n == steps {
            skg_refresh(sg, &mut state, opts, tol)?;
            rows.push(row_of(sg, &mut state)?);
            if keep_snapshots {
                snapshots.push(state.clone());
            }
        }
    }
    Ok(SkgRun {
        rows,
        final_state: state,
        snapshots,
    })
}

/// `max_t ‖φ^ε_t − φ_t‖_{L²}` and `max_t ‖e^{iε^{-2}θ_t} ψ^ε_t − ψ_{φ_t}‖_{L²}` over paired checkpoints.
pub fn trajectory_errors(
    reference: &[AkgState],
    fields: &[FieldK],
    waves: &[WaveX],
    phases: &[f64],
    eps: f64,
) -> (f64, f64) {
    let mut field_err: f64 = 0.0;
    let mut particle_err: f64 = 0.0;
    for (((r, phi), psi), &theta) in reference.iter().zip(fields).zip(waves).zip(phases) {
        field_err = field_err.max(phi.sub(&r.phi).norm_l2());
        let rot = Complex64::from_polar(1.0, theta / (eps * eps));
        let d = psi
            .values
            .iter()
            .zip(&r.bundle.psi.values)
            .map(|(u, g)| (rot * u - g).norm_sqr())
            .sum::<f64>()
            * psi.grid.dv();
        particle_err = particle_err.max(d.sqrt());
    }
    (field_err, particle_err)
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareRow {
    pub eps: f64,
    pub t_end: f64,
    pub field_err: f64,
    pub particle_err: f64,
    pub steps: usize,
    pub mass_drift: f64,
    pub energy_drift: f64,
    pub wall_seconds: f64,
}

impl CompareRow {
    pub const HEADER: &'static str = "eps,T,field_err,particle_err";
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub checkpoints: Vec<f64>,
    pub rows: Vec<CompareRow>,
    pub field_order: f64,
    pub particle_order: f64,
    pub akg_wall_seconds: f64,
}

impl CompareReport {
    /// Both errors strictly decrease along the ε list sorted descending.
    pub fn strictly_decreasing(&self) -> bool {
        let mut rows: Vec<&CompareRow> = self.rows.iter().collect();
        rows.sort_by(|a, b| b.eps.total_cmp(&a.eps));
        rows.windows(2)
            .all(|w| w[1].field_err < w[0].field_err && w[1].particle_err < w[0].particle_err)
    }
}

/// Number of uniform checkpoints in `(0, T]` used by [`compare_to_akg`].
pub const CHECKPOINTS: usize = 8;

/// Runs aKG once, then SKG from `(ψ_{φ₀}, φ₀)` for each ε, measuring errors at the checkpoints.
///
/// `dt_max` bounds the aKG step, which is shortened so that every checkpoint is a step node.
pub fn compare_to_akg(
    sg: &SpectralGrid,
    phi0: &FieldK,
    eps_list: &[f64],
    t_end: f64,
    dt_max: f64,
    opts: &SkgOptions,
    akg_opts: &AkgOptions,
    tol: &Tolerances,
) -> Result<CompareReport> {
    if !(t_end > 0.0 && dt_max > 0.0) {
        return Err(NelsonError::Config(format!("need T > 0 and dt > 0, got {t_end}, {dt_max}")));
    }
    if eps_list.iter().any(|&e| !(e > 0.0 && e <= 1.0)) {
        return Err(NelsonError::Config(format!("eps values {eps_list:?} outside (0, 1]")));
    }
    let per_checkpoint = (t_end / CHECKPOINTS as f64 / dt_max * (1.0 - 1e-12)).ceil() as usize;
    let steps = per_checkpoint * CHECKPOINTS;
    let dt = t_end / steps as f64;
    let clock = Instant::now();
    let start = crate::akg::akg_init(sg, phi0, tol)?;
    let psi0 = start.bundle.psi.clone();
    let run = run_akg(sg, start, t_end, dt, steps / CHECKPOINTS, true, akg_opts, tol)?;
    if run.final_state.status == AkgStatus::GapCollapsed {
        return Err(NelsonError::GapTooSmall {
            gap: run.record.min_gap(),
            floor: tol.gap_floor,
        });
    }
    let akg_wall_seconds = clock.elapsed().as_secs_f64();
    let reference = &run.snapshots[1..];
    let checkpoints: Vec<f64> = reference.iter().map(|s| s.t).collect();
    let span = t_end / CHECKPOINTS as f64;

    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let clock = Instant::now();
        let per = (span / (eps * eps * opts.micro_dt_max)).ceil() as usize;
        let ds = span / per as f64;
        let state = skg_init(sg, &psi0, phi0, eps, opts, tol)?;
        let skg = run_skg(sg, state, t_end, ds, per, true, opts, tol)?;
        let snaps = &skg.snapshots[1..];
        let fields: Vec<FieldK> = snaps.iter().map(|s| s.phi.clone()).collect();
        let waves: Vec<WaveX> = snaps.iter().map(|s| s.psi.clone()).collect();
        let phases: Vec<f64> = snaps.iter().map(|s| s.phase_integral).collect();
        let (field_err, particle_err) = trajectory_errors(reference, &fields, &waves, &phases, eps);
        log::info!("eps {eps}: field_err {field_err:.3e} particle_err {particle_err:.3e}");
        rows.push(CompareRow {
            eps,
            t_end,
            field_err,
            particle_err,
            steps: per * CHECKPOINTS,
            mass_drift: skg.mass_drift(),
            energy_drift: skg.energy_drift(),
            wall_seconds: clock.elapsed().as_secs_f64(),
        });
    }
    let ln_eps: Vec<f64> = rows.iter().map(|r| r.eps.ln()).collect();
    let fe: Vec<f64> = rows.iter().map(|r| r.field_err.ln()).collect();
    let pe: Vec<f64> = rows.iter().map(|r| r.particle_err.ln()).collect();
    Ok(CompareReport {
        checkpoints,
        field_order: least_squares_slope(&ln_eps, &fe),
        particle_order: least_squares_slope(&ln_eps, &pe),
        rows,
        akg_wall_seconds,
    })
}
