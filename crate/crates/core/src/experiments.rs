//! Experiment drivers shared by the command-line tool and the acceptance checks.
//!
//! Each driver takes a [`RunConfig`] and returns an [`Outcome`]: named assertions, plot-ready
//! tables and any state worth persisting. Drivers never touch the filesystem.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::adiabatic::{adiabatic_consistency, AdiabaticCheck};
use crate::akg::{
    akg_init, akg_picard_solve, akg_step, run_akg, AkgOptions, PicardOptions, TrajectoryRecord,
};
use crate::config::{InitialKind, RunConfig, Tolerances};
use crate::dressing::{b_shell, dressing_scalar_identity, g_cutoff, CutoffPair};
use crate::error::{NelsonError, Result};
use crate::fields::{to_momentum, to_position, FieldK, WaveX};
use crate::fluctuations::{
    assemble_bog_kernel, assemble_dressed_kernel, compare_kernels, counterterm_growth,
    propagate_bogoliubov, BogoliubovFrame, FrameRow, FrameRun, KernelSource, ModeSet, QuadKernel,
};
use crate::grid::{GridSpec, SpectralGrid};
use crate::linalg;
use crate::pekar::{
    coercivity_probe, gaussian_seed, global_gap_experiment, pekar_minimize, slaved_field,
    PekarResult,
};
use crate::quadrature::unit_cube_inverse_radius;
use crate::schrodinger::{
    ground_state, ground_state_for_potential, potential_values, source_from_wave, Hamiltonian,
    WarmStart,
};
use crate::skg::{compare_to_akg, run_skg, skg_init, CompareRow, SkgOptions, SkgRow};

/// One checked quantity: passes when `value` is finite and on the right side of `bound`.
#[derive(Debug, Clone, Serialize)]
pub struct Assertion {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

impl Assertion {
    pub fn at_most(name: &str, value: f64, bound: f64) -> Self {
        Assertion {
            name: name.into(),
            value,
            bound,
            pass: value.is_finite() && value <= bound,
        }
    }

    pub fn at_least(name: &str, value: f64, bound: f64) -> Self {
        Assertion {
            name: name.into(),
            value,
            bound,
            pass: value.is_finite() && value >= bound,
        }
    }

    /// A yes/no property, recorded as value 1 or 0 against bound 1.
    pub fn holds(name: &str, ok: bool) -> Self {
        Assertion {
            name: name.into(),
            value: if ok { 1.0 } else { 0.0 },
            bound: 1.0,
            pass: ok,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Table {
    pub name: String,
    pub header: String,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: &str, header: &str) -> Self {
        Table {
            name: name.into(),
            header: header.into(),
            rows: Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct KernelArtifact {
    pub name: String,
    pub modes: ModeSet,
    pub kernel: QuadKernel,
    pub k: f64,
    pub lambda: f64,
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub assertions: Vec<Assertion>,
    pub tables: Vec<Table>,
    pub waves: Vec<(String, WaveX)>,
    pub fields: Vec<(String, FieldK)>,
    pub kernels: Vec<KernelArtifact>,
    pub metrics: BTreeMap<String, f64>,
    /// Time at which a trajectory lost its gap; the tables hold the partial run.
    pub gap_collapse: Option<f64>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.pass)
    }

    fn metric(&mut self, name: &str, v: f64) {
        self.metrics.insert(name.into(), v);
    }

    fn merge(&mut self, other: Outcome) {
        self.assertions.extend(other.assertions);
        self.tables.extend(other.tables);
        self.waves.extend(other.waves);
        self.fields.extend(other.fields);
        self.kernels.extend(other.kernels);
        self.metrics.extend(other.metrics);
        self.gap_collapse = self.gap_collapse.or(other.gap_collapse);
    }
}

fn grid(length: f64, points: usize) -> Result<SpectralGrid> {
    SpectralGrid::new(GridSpec::new(length, points)?)
}

pub fn config_grid(cfg: &RunConfig) -> Result<SpectralGrid> {
    SpectralGrid::new(cfg.grid_spec()?)
}

/// Initial field of the dynamics commands.
pub fn initial_field(sg: &SpectralGrid, cfg: &RunConfig) -> Result<FieldK> {
    match cfg.initial.kind {
        InitialKind::Gaussian => slaved_field(sg, &gaussian_seed(sg, cfg.initial.width, [0.0; 3])?),
        InitialKind::Pekar => Ok(pekar_minimize(sg, None, &cfg.pekar, &cfg.tolerances)?.phi_star),
    }
}

fn akg_options(cfg: &RunConfig, dt: f64) -> AkgOptions {
    AkgOptions {
        dt_max: dt.max(AkgOptions::default().dt_max),
        force_free_field: cfg.akg.force_free_field,
        midpoint_iterations: cfg.akg.midpoint_iterations,
        linear_correction: cfg.akg.linear_correction,
    }
}

fn skg_options(cfg: &RunConfig) -> SkgOptions {
    SkgOptions {
        micro_dt_max: cfg.integrators.micro_dt_max,
        refresh_every: cfg.skg.refresh_every,
        scheme: cfg.skg.scheme,
        ..Default::default()
    }
}

fn trajectory_table(name: &str, rec: &TrajectoryRecord) -> Table {
    let mut t = Table::new(name, TrajectoryRecord::HEADER);
    for r in &rec.rows {
        t.rows.push(vec![r.t, r.phi_l2, r.phi_h_half, r.e, r.lambda1, r.gap, r.e_field, r.mu]);
    }
    t
}

fn rel_err(value: f64, target: f64) -> f64 {
    (value - target).abs() / target.abs()
}

/// Spectral-core invariants on the configured grid with seeded random data.
pub fn selfcheck(cfg: &RunConfig) -> Result<Outcome> {
    let sg = config_grid(cfg)?;
    let g = *sg.spec();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
    let gauss = gaussian_seed(&sg, 0.1 * g.length, [0.0; 3])?;
    let mut psi = gauss.clone();
    for z in psi.values.iter_mut() {
        *z *= Complex64::new(1.0 + 0.1 * normal(), 0.1 * normal());
    }
    let psi = psi.normalized()?;
    let mut out = Outcome::default();

    let hat = to_momentum(&sg, &psi)?;
    let k_sum: f64 = hat.values.iter().map(|z| z.norm_sqr()).sum::<f64>() * g.dk() / (2.0 * PI).powi(3);
    out.assertions.push(Assertion::at_most("parseval", (k_sum - 1.0).abs(), 1e-12));
    let back = to_position(&sg, &hat)?;
    out.assertions.push(Assertion::at_most("transform_round_trip", back.sub(&psi).norm_l2(), 1e-12));

    let mut phi = FieldK::zeros(g);
    let kc = 0.25 * g.k_nyquist();
    for (i, z) in phi.values.iter_mut().enumerate() {
        let env = (-sg.k2()[i] / (2.0 * kc * kc)).exp();
        *z = Complex64::new(normal(), normal()) * env;
    }
    let v = potential_values(&sg, &phi)?;
    let lhs: f64 = psi.density().iter().zip(&v).map(|(d, p)| d * p).sum::<f64>() * g.dv();
    let rhs = 2.0 * source_from_wave(&sg, &psi)?.inner(&phi).re;
    out.assertions.push(Assertion::at_most("coupling_adjointness", rel_err(lhs, rhs), 1e-10));

    let h = Hamiltonian::new(&sg, std::borrow::Cow::Borrowed(&v));
    let hu = h.apply(&gauss.values);
    let hv = h.apply(&psi.values);
    let a = linalg::dot(&psi.values, &hu);
    let b = linalg::dot(&gauss.values, &hv).conj();
    out.assertions.push(Assertion::at_most("hamiltonian_hermitian", (a - b).norm() / a.norm(), 1e-12));

    let cut = CutoffPair::new(2.0, 0.9 * g.k_nyquist().min(8.0).max(2.0))?;
    let gk = g_cutoff(&sg, cut.k);
    let gl = g_cutoff(&sg, cut.lambda);
    let bs = b_shell(&sg, cut);
    let partition = (0..g.len())
        .map(|i| (gk[i] + sg.k2()[i] * bs[i] - gl[i]).abs())
        .fold(0.0, f64::max);
    out.assertions.push(Assertion::at_most("dressing_partition", partition, 1e-14));
    Ok(out)
}

/// `−z/|x|` on the lattice, with the cell average `−z C/Δx` at the origin.
pub fn coulomb_potential(g: &GridSpec, z: f64) -> Vec<f64> {
    let origin = -z * unit_cube_inverse_radius() / g.dx();
    (0..g.len())
        .map(|i| {
            let x = g.position(i);
            let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
            if r == 0.0 {
                origin
            } else {
                -z / r
            }
        })
        .collect()
}

/// Eigensolver oracles: Coulomb `−2/|x|` (e = −1) and `|x|²` (e = 3, gap = 2).
pub fn eig_bench(cfg: &RunConfig) -> Result<Outcome> {
    let tol = &cfg.tolerances;
    let mut out = Outcome::default();
    let mut table = Table::new("eig_bench", "potential,L,N,e,lambda1,gap");
    let mut last_e = f64::NAN;
    for &(l, n) in &cfg.eig_bench.coulomb_grids {
        let sg = grid(l, n)?;
        let b = ground_state_for_potential(&sg, &coulomb_potential(sg.spec(), 2.0), WarmStart::Cold, tol)?;
        log::info!("coulomb L = {l} N = {n}: e = {}", b.e);
        table.rows.push(vec![0.0, l, n as f64, b.e, b.lambda1, b.gap]);
        last_e = b.e;
    }
    out.assertions.push(Assertion::at_most("coulomb_e_rel_err", rel_err(last_e, -1.0), 0.01));
    let (l, n) = cfg.eig_bench.oscillator_grid;
    let sg = grid(l, n)?;
    let g = *sg.spec();
    let v: Vec<f64> = (0..g.len())
        .map(|i| {
            let x = g.position(i);
            x[0] * x[0] + x[1] * x[1] + x[2] * x[2]
        })
        .collect();
    let b = ground_state_for_potential(&sg, &v, WarmStart::Cold, tol)?;
    table.rows.push(vec![1.0, l, n as f64, b.e, b.lambda1, b.gap]);
    out.assertions.push(Assertion::at_most("oscillator_e_rel_err", rel_err(b.e, 3.0), 0.01));
    out.assertions.push(Assertion::at_most("oscillator_gap_rel_err", rel_err(b.gap, 2.0), 0.01));
    out.tables.push(table);
    Ok(out)
}

fn pekar_state(sg: &SpectralGrid, cfg: &RunConfig) -> Result<PekarResult> {
    pekar_minimize(sg, None, &cfg.pekar, &cfg.tolerances)
}

/// Pekar minimizer with its self-consistency checks.
pub fn pekar(cfg: &RunConfig) -> Result<Outcome> {
    let sg = config_grid(cfg)?;
    let p = pekar_state(&sg, cfg)?;
    let mut out = Outcome::default();
    let e_check = crate::akg::field_energy(&sg, &p.phi_star, &p.bundle);
    out.assertions.push(Assertion::at_most("fixed_point_residual", p.fixed_point_residual, cfg.tolerances.pekar_tol));
    out.assertions.push(Assertion::at_most("e_negative", p.bundle.e, -cfg.tolerances.e_tol));
    out.assertions.push(Assertion::at_most("e_star_consistency", (e_check - p.e_star).abs(), 1e-8));
    out.metric("e_star", p.e_star);
    out.metric("e_pekar", p.e_pekar);
    out.metric("e", p.bundle.e);
    out.metric("gap", p.bundle.gap);
    out.metric("iterations", p.iterations as f64);
    let mut trace = Table::new("pekar_trace", "iteration,residual");
    for (i, r) in p.residual_trace.iter().enumerate() {
        trace.rows.push(vec![i as f64, *r]);
    }
    out.tables.push(trace);
    out.waves.push(("psi_star".into(), p.psi_star));
    out.fields.push(("phi_star".into(), p.phi_star));
    Ok(out)
}

/// aKG trajectory with energy bookkeeping; optionally the contraction-map cross-check.
pub fn akg(cfg: &RunConfig) -> Result<Outcome> {
    let sg = config_grid(cfg)?;
    let phi0 = initial_field(&sg, cfg)?;
    let tol = &cfg.tolerances;
    let dt = cfg.integrators.dt;
    let opts = akg_options(cfg, dt);
    let start = akg_init(&sg, &phi0, tol)?;
    let run = run_akg(&sg, start, cfg.akg.t_end, dt, cfg.akg.output_every, false, &opts, tol)?;
    let mut out = Outcome::default();
    out.gap_collapse = run.record.collapse_time;
    if cfg.akg.force_free_field {
        let n0 = run.record.rows[0].phi_l2;
        let dev = run.record.rows.iter().map(|r| (r.phi_l2 - n0).abs() / n0).fold(0.0, f64::max);
        out.assertions.push(Assertion::at_most("free_field_norm_drift", dev, 1e-12));
    } else {
        out.assertions.push(Assertion::at_most("energy_drift", run.record.energy_drift(), 1e-6));
    }
    out.metric("min_gap", run.record.min_gap());
    out.tables.push(trajectory_table("trajectory", &run.record));
    out.fields.push(("phi_final".into(), run.final_state.phi.clone()));
    if cfg.akg.picard_check && out.gap_collapse.is_none() {
        out.merge(picard_crosscheck(cfg)?);
    }
    Ok(out)
}

/// Contraction-map solution against the exponential-midpoint stepper, sup over common nodes.
pub fn picard_crosscheck(cfg: &RunConfig) -> Result<Outcome> {
    let sg = config_grid(cfg)?;
    let phi0 = initial_field(&sg, cfg)?;
    let tol = &cfg.tolerances;
    let t_end = cfg.akg.picard_t_end;
    let dt = cfg.akg.picard_stepper_dt;
    let opts = akg_options(cfg, dt);
    let start = akg_init(&sg, &phi0, tol)?;
    let run = run_akg(&sg, start, t_end, dt, 1, true, &opts, tol)?;
    let popts = PicardOptions {
        dt: cfg.integrators.picard_dt,
        t_max: cfg.integrators.picard_t_max,
        ..Default::default()
    };
    let p = akg_picard_solve(&sg, &phi0, t_end, &popts, tol)?;
    let mut table = Table::new("picard", "t,diff_l2");
    let mut sup: f64 = 0.0;
    for (t, f) in p.times.iter().zip(&p.fields) {
        if let Some(s) = run.snapshots.iter().find(|s| (s.t - t).abs() < 1e-9) {
            let d = s.phi.sub(f).norm_l2();
            sup = sup.max(d);
            table.rows.push(vec![*t, d]);
        }
    }
    let mut out = Outcome::default();
    out.assertions.push(Assertion::at_least("picard_common_nodes", table.rows.len() as f64, 2.0));
    out.assertions.push(Assertion::at_most("picard_vs_stepper_sup_l2", sup, 1e-6));
    out.metric("picard_sweeps", p.residuals.len() as f64);
    let mut res = Table::new("picard_residuals", "sweep,residual");
    for (i, r) in p.residuals.iter().enumerate() {
        res.rows.push(vec![(i + 1) as f64, *r]);
    }
    out.tables.push(table);
    out.tables.push(res);
    Ok(out)
}

/// SKG run in slow time with mass and semiclassical-energy bookkeeping.
pub fn skg(cfg: &RunConfig) -> Result<Outcome> {
    let sg = config_grid(cfg)?;
    let phi0 = initial_field(&sg, cfg)?;
    let tol = &cfg.tolerances;
    let opts = skg_options(cfg);
    let psi0 = akg_init(&sg, &phi0, tol)?.bundle.psi;
    let eps = cfg.skg.eps;
    let s_end = cfg.skg.s_end;
    let steps = (s_end / (eps * eps * opts.micro_dt_max)).ceil();
    let ds = s_end / steps;
    let start = skg_init(&sg, &psi0, &phi0, eps, &opts, tol)?;
    let run = run_skg(&sg, start, s_end, ds, cfg.skg.output_every, false, &opts, tol)?;
    let mut out = Outcome::default();
    out.assertions.push(Assertion::at_most("mass_drift", run.mass_drift(), 1e-10));
    out.assertions.push(Assertion::at_most("semiclassical_energy_drift", run.energy_drift(), 1e-5));
    out.metric("steps", steps);
    let mut t = Table::new("skg", SkgRow::HEADER);
    for r in &run.rows {
        t.rows.push(vec![r.s, r.mass, r.e_semi, r.phase_integral, r.e, r.gap]);
    }
    out.tables.push(t);
    Ok(out)
}

/// ε-sweep of SKG against aKG with fitted orders.
pub fn compare(cfg: &RunConfig) -> Result<Outcome> {
    let sg = config_grid(cfg)?;
    let phi0 = initial_field(&sg, cfg)?;
    let tol = &cfg.tolerances;
    let dt = cfg.integrators.dt;
    let rep = compare_to_akg(
        &sg,
        &phi0,
        &cfg.compare.eps_list,
        cfg.compare.t_end,
        dt,
        &skg_options(cfg),
        &akg_options(cfg, dt),
        tol,
    )?;
    let mut out = Outcome::default();
    out.metric("akg_wall_seconds", rep.akg_wall_seconds);
    out.assertions.push(Assertion::holds("errors_strictly_decreasing", rep.strictly_decreasing()));
    out.assertions.push(Assertion::at_least("field_order", rep.field_order, 0.25));
    out.assertions.push(Assertion::at_least("particle_order", rep.particle_order, 0.25));
    let mut t = Table::new("sweep", CompareRow::HEADER);
    let mut d = Table::new("sweep_diagnostics", "eps,steps,mass_drift,energy_drift");
    for r in &rep.rows {
        t.rows.push(vec![r.eps, r.t_end, r.field_err, r.particle_err]);
        d.rows.push(vec![r.eps, r.steps as f64, r.mass_drift, r.energy_drift]);
        out.metric(&format!("wall_seconds_eps_{}", r.eps), r.wall_seconds);
    }
    out.tables.push(t);
    out.tables.push(d);
    Ok(out)
}

/// Growth of the normal-ordering constant on the Pekar state.
pub fn counterterm(cfg: &RunConfig) -> Result<Outcome> {
    let sg = config_grid(cfg)?;
    let p = pekar_state(&sg, cfg)?;
    let r = counterterm_growth(&sg, &p.bundle, &p.phi_star, &cfg.counterterm.lambda_list, &cfg.tolerances)?;
    let mut out = Outcome::default();
    let four_pi = 4.0 * PI;
    out.assertions.push(Assertion::at_most("slope_rel_err", rel_err(r.slope_all, four_pi), 0.15));
    out.assertions.push(Assertion::holds("c_increasing", r.values.windows(2).all(|w| w[1] > w[0])));
    if let Some(last) = r.increments.last() {
        let lam = &r.lambdas;
        let n = lam.len();
        let shell = four_pi * (lam[n - 1] / lam[n - 2]).ln();
        out.assertions.push(Assertion::at_most("top_shell_rel_err", rel_err(*last, shell), 0.2));
    }
    let second: Vec<f64> = r.increments.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    if second.len() >= 2 {
        let shrink = second[0] / second[second.len() - 1];
        out.assertions.push(Assertion::at_least("second_difference_shrink", shrink, 2.0));
    }
    out.metric("slope_all", r.slope_all);
    out.metric("slope_top_half", r.slope_top_half);
    out.metric("solves", r.solves as f64);
    let mut t = Table::new("counterterm", "Lambda,c");
    for (l, c) in r.lambdas.iter().zip(&r.values) {
        t.rows.push(vec![*l, *c]);
    }
    let mut nodes = Table::new("counterterm_nodes", "radius,dx,dy,dz,value,iterations");
    for n in &r.nodes {
        let d = n.direction;
        nodes.rows.push(vec![n.radius, d[0], d[1], d[2], n.value, n.iterations as f64]);
    }
    out.tables.push(t);
    out.tables.push(nodes);
    Ok(out)
}

/// Continuum scalar identity `‖kB‖² − 2Re⟨G_Λ, B⟩ = 4π(ln K − ln Λ)`.
pub fn dressing_check(cfg: &RunConfig) -> Result<Outcome> {
    let mut out = Outcome::default();
    let mut t = Table::new("dressing", "K,Lambda,kb_norm_sq,cross,combination,reference");
    for &(k, l) in &cfg.dressing.pairs {
        let s = dressing_scalar_identity(CutoffPair::new(k, l)?)?;
        t.rows.push(vec![k, l, s.kb_norm_sq, s.cross, s.combination, s.reference]);
        let name = format!("scalar_identity_rel_err_K{k}_L{l}");
        out.assertions.push(Assertion::at_most(&name, rel_err(s.combination, s.reference), 0.005));
    }
    out.tables.push(t);
    Ok(out)
}

/// Dressed against plain kernels over a lattice refinement.
pub fn kernel_identity(cfg: &RunConfig) -> Result<Outcome> {
    let kc = &cfg.kernel;
    let tol = Tolerances {
        eig_tol: kc.eig_tol.min(cfg.tolerances.eig_tol),
        ..cfg.tolerances
    };
    let cut = CutoffPair::new(kc.k, kc.lambda)?;
    let mut out = Outcome::default();
    let mut t = Table::new(
        "kernel_identity",
        "dk1,L,modes,h_deviation,b_deviation,relative_deviation,scalar_gap,lattice_gap,continuum_gap",
    );
    let mut gap_errors = Vec::new();
    for (j, &dk1) in kc.dk1_list.iter().enumerate() {
        let sg = grid(2.0 * PI / dk1, kc.points)?;
        let seed = gaussian_seed(&sg, cfg.initial.width, [0.0; 3])?;
        let phi = slaved_field(&sg, &seed)?;
        let b = ground_state(&sg, &phi, WarmStart::Wave(&seed), &tol)?;
        let modes = ModeSet::ball(*sg.spec(), kc.lambda, kc.mode_cap)?;
        let plain = assemble_bog_kernel(&sg, &b, &phi, &modes, kc.lambda, &tol)?;
        let dressed = assemble_dressed_kernel(&sg, &b, &phi, &modes, cut, &tol)?;
        let r = compare_kernels(&modes, cut, &plain, &dressed);
        log::info!("kernel identity dk1 = {dk1}: {r:?}");
        t.rows.push(vec![
            dk1,
            sg.spec().length,
            r.modes as f64,
            r.h_deviation,
            r.b_deviation,
            r.relative_deviation,
            r.scalar_gap,
            r.lattice_gap,
            r.continuum_gap,
        ]);
        out.assertions.push(Assertion::at_most(
            &format!("block_deviation_over_scale_dk1_{dk1:.4}"),
            r.relative_deviation,
            10.0 * tol.cg_tol,
        ));
        gap_errors.push(rel_err(r.scalar_gap, r.continuum_gap));
        if j + 1 == kc.dk1_list.len() {
            out.kernels.push(KernelArtifact {
                name: "kernel_dressed".into(),
                modes,
                kernel: dressed,
                k: kc.k,
                lambda: kc.lambda,
                tolerances: tol,
            });
        }
    }
    let last = *gap_errors.last().expect("non-empty list");
    out.assertions.push(Assertion::at_most("scalar_gap_rel_err_refined", last, 0.05));
    if gap_errors.len() >= 2 {
        out.assertions.push(Assertion::holds(
            "scalar_gap_error_decreases",
            gap_errors.windows(2).all(|w| w[1] < w[0]),
        ));
    }
    out.tables.push(t);
    Ok(out)
}

fn frame_table(name: &str, run: &FrameRun, every: usize) -> Table {
    let mut t = Table::new(name, FrameRow::HEADER);
    let n = run.rows.len();
    for (i, r) in run.rows.iter().enumerate() {
        if i % every.max(1) == 0 || i + 1 == n {
            t.rows.push(vec![r.t, r.n_expect, r.inv_drift]);
        }
    }
    t
}

/// Bogoliubov frame dynamics around the Pekar state.
pub fn fluct(cfg: &RunConfig) -> Result<Outcome> {
    let fc = cfg.fluct;
    let tol = &cfg.tolerances;
    let sg = config_grid(cfg)?;
    let p = pekar_state(&sg, cfg)?;
    let modes = ModeSet::ball(*sg.spec(), fc.mode_radius, fc.mode_cap)?;
    let kernel = assemble_bog_kernel(&sg, &p.bundle, &p.phi_star, &modes, fc.mode_radius, tol)?;
    let mut out = Outcome::default();
    let (dh, db) = kernel.structure_defects();
    let scale = crate::fluctuations::max_abs(&kernel.h);
    out.assertions.push(Assertion::at_most("h_hermitian", dh, 1e-10 * scale));
    out.assertions.push(Assertion::at_most("b_symmetric", db, 1e-10 * scale));
    let gram_floor = -10.0 * tol.cg_tol * crate::fluctuations::max_abs(&kernel.gram);
    out.assertions.push(Assertion::at_least("gram_min_eigenvalue", kernel.gram_min_eigenvalue(), gram_floor));
    out.metric("modes", modes.len() as f64);
    out.metric("hessian_min_eigenvalue", kernel.hessian_min_eigenvalue());
    let every = ((fc.t_end / fc.dt) / 200.0).ceil() as usize;

    let n = modes.len();
    let frozen = propagate_bogoliubov(BogoliubovFrame::vacuum(n), &KernelSource::Frozen(kernel.clone()), fc.dt, fc.t_end)?;
    let drift = frozen.rows.iter().map(|r| r.inv_drift).fold(0.0, f64::max);
    out.assertions.push(Assertion::at_most("frozen_invariant_drift", drift, 1e-8));
    out.metric("frozen_n_final", frozen.frame.number_expectation());
    out.tables.push(frame_table("fluct", &frozen, every));

    let free = propagate_bogoliubov(BogoliubovFrame::vacuum(n), &KernelSource::Frozen(QuadKernel::free(&modes)), fc.dt, fc.t_end)?;
    let free_n = free.rows.iter().map(|r| r.n_expect.abs()).fold(0.0, f64::max);
    out.assertions.push(Assertion::at_most("free_field_n_expect", free_n, 1e-12));

    if fc.refresh_nodes >= 2 {
        let eta = cfg.gap.eta_fraction * p.phi_star.weighted_norm(&sg, 0.5);
        let phi0 = p.phi_star.add(&crate::pekar::random_perturbation(&sg, cfg.seed, u64::MAX, eta));
        let opts = akg_options(cfg, fc.refresh_akg_dt);
        let mut state = akg_init(&sg, &phi0, tol)?;
        let mut times = Vec::new();
        let mut kernels = Vec::new();
        for j in 0..fc.refresh_nodes {
            let t = fc.t_end * j as f64 / (fc.refresh_nodes - 1) as f64;
            let span = t - state.t;
            if span > 0.0 {
                let steps = (span / fc.refresh_akg_dt).ceil() as usize;
                for _ in 0..steps {
                    state = akg_step(&sg, &state, span / steps as f64, &opts, tol)?;
                }
                state.t = t;
            }
            kernels.push(assemble_bog_kernel(&sg, &state.bundle, &state.phi, &modes, fc.mode_radius, tol)?);
            times.push(t);
        }
        let src = KernelSource::Interpolated { times, kernels };
        let run = propagate_bogoliubov(BogoliubovFrame::vacuum(n), &src, fc.dt, fc.t_end)?;
        let drift = run.rows.iter().map(|r| r.inv_drift).fold(0.0, f64::max);
        out.assertions.push(Assertion::at_most("refreshed_invariant_drift", drift, 1e-8));
        out.metric("refreshed_n_final", run.frame.number_expectation());
        out.tables.push(frame_table("fluct_refreshed", &run, every));
    }
    out.kernels.push(KernelArtifact {
        name: "kernel_plain".into(),
        modes,
        kernel,
        k: fc.mode_radius,
        lambda: fc.mode_radius,
        tolerances: *tol,
    });
    Ok(out)
}

/// Hellmann–Feynman rate and ground-state velocity against finite differences.
pub fn adiabatic(cfg: &RunConfig) -> Result<Outcome> {
    let sg = config_grid(cfg)?;
    let phi0 = initial_field(&sg, cfg)?;
    let ac = &cfg.adiabatic;
    let dt = cfg.integrators.dt;
    let checks = adiabatic_consistency(
        &sg,
        &phi0,
        &ac.times,
        dt,
        ac.h_rate,
        ac.h_state,
        &akg_options(cfg, dt.max(ac.h_state)),
        &cfg.tolerances,
    )?;
    let mut out = Outcome::default();
    let max_rel = checks.iter().map(|c| c.hf_rel_err).fold(0.0, f64::max);
    let max_vel = checks.iter().map(|c| c.velocity_err).fold(0.0, f64::max);
    out.assertions.push(Assertion::at_most("hf_rate_rel_err", max_rel, 1e-5));
    out.assertions.push(Assertion::at_most("velocity_l2_err", max_vel, 1e-4));
    let mut t = Table::new("adiabatic", AdiabaticCheck::HEADER);
    for c in &checks {
        t.rows.push(vec![c.t, c.hf_rate, c.hf_difference, c.hf_rel_err, c.velocity_norm, c.velocity_err]);
    }
    out.tables.push(t);
    Ok(out)
}

/// Coercivity probe and near-minimizer gap persistence.
pub fn gap(cfg: &RunConfig) -> Result<Outcome> {
    let gc = cfg.gap;
    let tol = &cfg.tolerances;
    let sg = config_grid(cfg)?;
    let p = pekar_state(&sg, cfg)?;
    let eta = gc.eta_fraction * p.phi_star.weighted_norm(&sg, 0.5);
    let probe = coercivity_probe(&sg, &p, gc.probe_samples, eta, cfg.seed, tol)?;
    let mut out = Outcome::default();
    out.assertions.push(Assertion::at_least("min_coercivity_ratio", probe.min_ratio, f64::MIN_POSITIVE));
    out.assertions.push(Assertion::at_most("max_coercivity_ratio", probe.max_ratio, 1.0 + 1e-6));
    let mut pt = Table::new("coercivity", "index,ratio,energy_excess,dist,resampled");
    for s in &probe.samples {
        pt.rows.push(vec![s.index as f64, s.ratio, s.energy_excess, s.dist, s.resampled as f64]);
    }
    out.tables.push(pt);
    let opts = akg_options(cfg, gc.dt);
    let r = global_gap_experiment(&sg, &p, eta, gc.t_end, gc.dt, gc.output_every, probe.min_ratio, cfg.seed, &opts, tol)?;
    out.gap_collapse = r.record.collapse_time;
    out.assertions.push(Assertion::at_least("min_gap_over_half_gap_star", r.min_gap / (0.5 * r.gap_star), 1.0));
    out.metric("eta", eta);
    out.metric("gap_star", r.gap_star);
    out.metric("min_gap", r.min_gap);
    out.metric("max_dist", r.max_dist);
    out.metric("dist_bound", r.dist_bound);
    out.metric("energy_drift", r.record.energy_drift());
    let mut t = trajectory_table("gap", &r.record);
    t.header.push_str(",dist");
    for (row, (_, d)) in t.rows.iter_mut().zip(&r.distances) {
        row.push(*d);
    }
    out.tables.push(t);
    Ok(out)
}

/// Command names accepted by [`run_command`].
pub const COMMANDS: [&str; 12] = [
    "selfcheck",
    "eig-bench",
    "pekar",
    "akg",
    "skg",
    "compare",
    "counterterm",
    "dressing-check",
    "kernel-identity",
    "fluct",
    "adiabatic",
    "gap",
];

pub fn run_command(command: &str, cfg: &RunConfig) -> Result<Outcome> {
    match command {
        "selfcheck" => selfcheck(cfg),
        "eig-bench" => eig_bench(cfg),
        "pekar" => pekar(cfg),
        "akg" => akg(cfg),
        "skg" => skg(cfg),
        "compare" => compare(cfg),
        "counterterm" => counterterm(cfg),
        "dressing-check" => dressing_check(cfg),
        "kernel-identity" => kernel_identity(cfg),
        "fluct" => fluct(cfg),
        "adiabatic" => adiabatic(cfg),
        "gap" => gap(cfg),
        other => Err(NelsonError::Config(format!("unknown command {other:?}"))),
    }
}
