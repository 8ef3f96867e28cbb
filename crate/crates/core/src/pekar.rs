//! Pekar minimizer, distance to the minimizer manifold, coercivity probing and the
//! near-minimizer gap experiment.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::akg::{akg_init, field_energy, run_akg, AkgOptions, TrajectoryRecord};
use crate::config::Tolerances;
use crate::error::{NelsonError, Result};
use crate::fields::{FieldK, WaveX};
use crate::grid::SpectralGrid;
use crate::schrodinger::{
    ground_state, kinetic_expectation, source_from_wave, GroundStateBundle, WarmStart,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PekarOptions {
    /// Mixing weight of the new field in each self-consistent update.
    pub damping: f64,
    /// Width of the default Gaussian seed, in units of the box length.
    pub seed_width: f64,
    pub polish_iterations: usize,
}

impl Default for PekarOptions {
    fn default() -> Self {
        PekarOptions {
            damping: 0.5,
            seed_width: 0.1,
            polish_iterations: 200,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PekarResult {
    pub psi_star: WaveX,
    pub phi_star: FieldK,
    pub bundle: GroundStateBundle,
    pub e_star: f64,
    pub e_pekar: f64,
    pub fixed_point_residual: f64,
    pub iterations: usize,
    pub residual_trace: Vec<f64>,
}

/// `−ω^{-1} σ(ψ)`.
pub fn slaved_field(sg: &SpectralGrid, psi: &WaveX) -> Result<FieldK> {
    let s = source_from_wave(sg, psi)?;
    let w = sg.omega();
    Ok(s.map_modes(|i, z| -z / w[i]))
}

/// `‖ωφ + σ(ψ_φ)‖_{L²}`.
pub fn fixed_point_residual(sg: &SpectralGrid, phi: &FieldK, psi: &WaveX) -> Result<f64> {
    let s = source_from_wave(sg, psi)?;
    let w = sg.omega();
    Ok(phi.map_modes(|i, z| w[i] * z + s.values[i]).norm_l2())
}

/// `𝓔_P(ψ) = ⟨ψ, p²ψ⟩ − ‖ω^{-1/2} σ(ψ)‖²`.
pub fn pekar_functional(sg: &SpectralGrid, psi: &WaveX) -> Result<f64> {
    let s = source_from_wave(sg, psi)?;
    Ok(kinetic_expectation(sg, psi) - s.weighted_norm(sg, -0.5).powi(2))
}

/// Periodic barycenter of a density (circular mean per axis).
pub fn barycenter(psi: &WaveX) -> [f64; 3] {
    let g = psi.grid;
    let mut acc = [Complex64::default(); 3];
    for (idx, z) in psi.values.iter().enumerate() {
        let x = g.position(idx);
        let d = z.norm_sqr();
        for a in 0..3 {
            acc[a] += d * Complex64::from_polar(1.0, 2.0 * PI * x[a] / g.length);
        }
    }
    let mut out = [0.0; 3];
    for a in 0..3 {
        out[a] = acc[a].arg() * g.length / (2.0 * PI);
    }
    out
}

/// Normalized Gaussian `exp(−|x − c|²/(2w²))`.
pub fn gaussian_seed(sg: &SpectralGrid, width: f64, center: [f64; 3]) -> Result<WaveX> {
    let g = *sg.spec();
    WaveX::from_real_fn(g, |x| {
        let r2: f64 = (0..3).map(|a| (x[a] - center[a]).powi(2)).sum();
        (-r2 / (2.0 * width * width)).exp()
    })
    .normalized()
}

struct ScfOutcome {
    phi: FieldK,
    bundle: GroundStateBundle,
    residual: f64,
    iterations: usize,
}

fn scf(
    sg: &SpectralGrid,
    mut phi: FieldK,
    mut bundle: GroundStateBundle,
    theta: f64,
    max_iter: usize,
    target: f64,
    trace: &mut Vec<f64>,
    tol: &Tolerances,
) -> Result<ScfOutcome> {
    for it in 0..=max_iter {
        let res = fixed_point_residual(sg, &phi, &bundle.psi)?;
        trace.push(res);
        if res <= target {
            return Ok(ScfOutcome {
                phi,
                bundle,
                residual: res,
                iterations: it,
            });
        }
        if it == max_iter {
            break;
        }
        let slaved = slaved_field(sg, &bundle.psi)?;
        let mut next = phi.scaled(Complex64::new(1.0 - theta, 0.0));
        next.axpy(Complex64::new(theta, 0.0), &slaved);
        phi = next;
        bundle = ground_state(sg, &phi, WarmStart::Bundle(&bundle), tol)?;
    }
    Err(NelsonError::NotConverged {
        solver: "pekar self-consistent iteration".into(),
        iterations: max_iter,
        residual: *trace.last().unwrap_or(&f64::NAN),
    })
}

/// Damped self-consistent iteration `φ ← (1−θ)φ + θ(−ω^{-1}σ(ψ_φ))`, recentred so that the
/// density barycenter sits at the origin, then polished.
pub fn pekar_minimize(
    sg: &SpectralGrid,
    seed_psi: Option<&WaveX>,
    opts: &PekarOptions,
    tol: &Tolerances,
) -> Result<PekarResult> {
    let g = *sg.spec();
    let seed = match seed_psi {
        Some(p) => {
            g.ensure_same(&p.grid)?;
            p.clone().normalized()?
        }
        None => gaussian_seed(sg, opts.seed_width * g.length, [0.0; 3])?,
    };
    let phi0 = slaved_field(sg, &seed)?;
    let b0 = ground_state(sg, &phi0, WarmStart::Cold, tol)?;
    b0.ensure_bound(tol.e_tol)?;
    let mut trace = Vec::new();
    let first = scf(
        sg,
        phi0,
        b0,
        opts.damping,
        tol.pekar_max_iter,
        tol.pekar_tol,
        &mut trace,
        tol,
    )?;

    // recentre: translate the field by the barycenter offset, re-solve, polish
    let c = barycenter(&first.bundle.psi);
    let phi_c = first.phi.translated([-c[0], -c[1], -c[2]]);
    let b_c = ground_state(sg, &phi_c, WarmStart::Cold, tol)?;
    let polished = scf(
        sg,
        phi_c,
        b_c,
        opts.damping,
        opts.polish_iterations,
        tol.pekar_tol,
        &mut trace,
        tol,
    )?;
    let psi_star = polished.bundle.psi.clone();
    let e_star = field_energy(sg, &polished.phi, &polished.bundle);
    let e_pekar = pekar_functional(sg, &psi_star)?;
    Ok(PekarResult {
        psi_star,
        phi_star: polished.phi,
        bundle: polished.bundle,
        e_star,
        e_pekar,
        fixed_point_residual: polished.residual,
        iterations: first.iterations + polished.iterations,
        residual_trace: trace,
    })
}

/// `‖u − T_y φ_*‖²_{𝔥_{1/2}}` with gradient and Hessian in `y`.
fn distance_model(
    sg: &SpectralGrid,
    u: &FieldK,
    p: &PekarResult,
    y: [f64; 3],
) -> (f64, Vector3<f64>, Matrix3<f64>) {
    let g = *sg.spec();
    let w = sg.omega();
    let dk = g.dk();
    let mut f = 0.0;
    let mut grad = Vector3::zeros();
    let mut hess = Matrix3::zeros();
    for i in 0..g.len() {
        let a = u.values[i];
        let b = p.phi_star.values[i];
        let k = g.wave_vector(i);
        let ph = Complex64::from_polar(1.0, -(k[0] * y[0] + k[1] * y[1] + k[2] * y[2]));
        let tb = b * ph;
        f += w[i] * (a - tb).norm_sqr() * dk;
        // d/dy_j of −2 Re(conj(a) tb) = −2 Re(conj(a) (−i k_j) tb)
        let c = a.conj() * tb;
        for j in 0..3 {
            grad[j] += -2.0 * w[i] * dk * (Complex64::new(0.0, -k[j]) * c).re;
            for l in 0..3 {
                hess[(j, l)] += 2.0 * w[i] * dk * k[j] * k[l] * c.re;
            }
        }
    }
    (f.max(0.0), grad, hess)
}

/// `dist_{𝔥_{1/2}}(u, 𝓜) = inf_y ‖u − T_y φ_*‖_{𝔥_{1/2}}`: lattice scan of the overlap by
/// one transform, then damped Newton refinement in `y`.
pub fn manifold_distance(sg: &SpectralGrid, u: &FieldK, p: &PekarResult) -> Result<(f64, [f64; 3])> {
    let g = *sg.spec();
    g.ensure_same(&u.grid)?;
    let w = sg.omega();
    // overlap(y) = Σ ω conj(u) φ_* e^{-iky} Δk; maximize Re over lattice y
    let mut buf: Vec<Complex64> = (0..g.len())
        .map(|i| w[i] * u.values[i].conj() * p.phi_star.values[i])
        .collect();
    sg.fft().forward(&mut buf);
    // FFT slot n corresponds to y = n Δx (mod L) since Σ_m c_m e^{-2πi m n/N}
    let (best, _) = buf
        .iter()
        .enumerate()
        .fold((0usize, f64::NEG_INFINITY), |acc, (i, z)| if z.re > acc.1 { (i, z.re) } else { acc });
    let (i, j, l) = g.unflat(best);
    let mut y = [
        g.wave_number(i) as f64 * g.dx(),
        g.wave_number(j) as f64 * g.dx(),
        g.wave_number(l) as f64 * g.dx(),
    ];
    let (mut f, mut grad, mut hess) = distance_model(sg, u, p, y);
    for _ in 0..60 {
        let step = match hess.try_inverse() {
            Some(inv) if (grad.transpose() * inv * grad)[(0, 0)] > 0.0 => -(inv * grad),
            _ => -grad * (g.dx() / grad.norm().max(1e-300)),
        };
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let cand = [y[0] + t * step[0], y[1] + t * step[1], y[2] + t * step[2]];
            let (fc, gc, hc) = distance_model(sg, u, p, cand);
            if fc <= f {
                let done = (f - fc) <= 1e-15 * f.max(1e-300) || step.norm() * t < 1e-13;
                y = cand;
                f = fc;
                grad = gc;
                hess = hc;
                accepted = true;
                if done {
                    return Ok((f.sqrt(), wrap_y(y, g.length)));
                }
                break;
            }
            t *= 0.5;
        }
        if !accepted || grad.norm() < 1e-14 {
            break;
        }
    }
    Ok((f.sqrt(), wrap_y(y, g.length)))
}

fn wrap_y(mut y: [f64; 3], l: f64) -> [f64; 3] {
    for v in y.iter_mut() {
        *v -= l * (*v / l).round();
    }
    y
}

#[derive(Debug, Clone, Serialize)]
pub struct CoercivitySample {
    pub index: usize,
    pub ratio: f64,
    pub energy_excess: f64,
    pub dist: f64,
    pub resampled: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoercivityReport {
    pub samples: Vec<CoercivitySample>,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub resampled: usize,
}

/// Smooth random perturbation with `‖δ‖_{𝔥_{1/2}} = radius`, supported on the coupled modes.
/// Deterministic in `(seed, index)`.
pub fn random_perturbation(sg: &SpectralGrid, seed: u64, index: u64, radius: f64) -> FieldK {
    let g = *sg.spec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let kc = 0.25 * g.k_nyquist();
    let mut d = FieldK::zeros(g);
    for i in 0..g.len() {
        if !sg.dealias()[i] {
            continue;
        }
        let env = (-sg.k2()[i] / (2.0 * kc * kc)).exp();
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        d.values[i] = Complex64::new(re, im) * env;
    }
    let n = d.weighted_norm(sg, 0.5);
    d.scaled(Complex64::new(radius / n, 0.0))
}

/// Samples `u = φ_* + δ` and returns `(𝓔_field(u) − E_*) / dist(u, 𝓜)²`.
pub fn coercivity_probe(
    sg: &SpectralGrid,
    p: &PekarResult,
    n_samples: usize,
    radius: f64,
    seed: u64,
    tol: &Tolerances,
) -> Result<CoercivityReport> {
    let mut samples = Vec::with_capacity(n_samples);
    let mut total_resampled = 0;
    for index in 0..n_samples {
        let mut resampled = 0;
        let mut attempt = 0u64;
        let sample = loop {
            let stream = (index as u64) << 16 | attempt;
            let delta = random_perturbation(sg, seed, stream, radius);
            let u = p.phi_star.add(&delta);
            let b = ground_state(sg, &u, WarmStart::Bundle(&p.bundle), tol)?;
            if b.e >= -tol.e_tol {
                resampled += 1;
                attempt += 1;
                if attempt > 20 {
                    return Err(NelsonError::Domain(format!(
                        "probe radius {radius} leaves the bound-state region"
                    )));
                }
                continue;
            }
            let excess = field_energy(sg, &u, &b) - p.e_star;
            let (dist, _) = manifold_distance(sg, &u, p)?;
            break CoercivitySample {
                index,
                ratio: excess / (dist * dist),
                energy_excess: excess,
                dist,
                resampled,
            };
        };
        total_resampled += sample.resampled;
        samples.push(sample);
    }
    let min_ratio = samples.iter().map(|s| s.ratio).fold(f64::INFINITY, f64::min);
    let max_ratio = samples.iter().map(|s| s.ratio).fold(f64::NEG_INFINITY, f64::max);
    Ok(CoercivityReport {
        samples,
        min_ratio,
        max_ratio,
        resampled: total_resampled,
    })
}

#[derive(Debug, Clone)]
pub struct GlobalGapReport {
    pub record: TrajectoryRecord,
    pub distances: Vec<(f64, f64)>,
    pub gap_star: f64,
    pub min_gap: f64,
    pub max_dist: f64,
    pub dist_bound: f64,
}

/// aKG from `φ_* + δ` with `‖δ‖_{𝔥_{1/2}} = η`, tracking the gap and `dist(φ_t, 𝓜)`.
#[allow(clippy::too_many_arguments)]
pub fn global_gap_experiment(
    sg: &SpectralGrid,
    p: &PekarResult,
    eta: f64,
    t_end: f64,
    dt: f64,
    output_every: usize,
    c_min: f64,
    seed: u64,
    opts: &AkgOptions,
    tol: &Tolerances,
) -> Result<GlobalGapReport> {
    let phi0 = if eta > 0.0 {
        p.phi_star.add(&random_perturbation(sg, seed, u64::MAX, eta))
    } else {
        p.phi_star.clone()
    };
    let start = akg_init(sg, &phi0, tol)?;
    let run = run_akg(sg, start, t_end, dt, output_every, true, opts, tol)?;
    let mut distances = Vec::with_capacity(run.snapshots.len());
    for s in &run.snapshots {
        distances.push((s.t, manifold_distance(sg, &s.phi, p)?.0));
    }
    let max_dist = distances.iter().map(|d| d.1).fold(0.0, f64::max);
    Ok(GlobalGapReport {
        min_gap: run.record.min_gap(),
        gap_star: p.bundle.gap,
        record: run.record,
        distances,
        max_dist,
        dist_bound: if c_min > 0.0 { eta / c_min.sqrt() } else { f64::INFINITY },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    fn small() -> (SpectralGrid, PekarResult) {
        let sg = SpectralGrid::new(GridSpec::new(4.0, 16).unwrap()).unwrap();
        let p = pekar_minimize(&sg, None, &PekarOptions::default(), &Tolerances::default()).unwrap();
        (sg, p)
    }

    #[test]
    fn minimizer_is_a_self_consistent_fixed_point() {
        let (sg, p) = small();
        let tol = Tolerances::default();
        assert!(p.fixed_point_residual <= tol.pekar_tol);
        assert!(p.e_star < 0.0 && p.bundle.gap > 0.0);
        let slaved = slaved_field(&sg, &p.psi_star).unwrap();
        assert!(slaved.sub(&p.phi_star).weighted_norm(&sg, 0.5) <= 1e-6 * p.phi_star.weighted_norm(&sg, 0.5));
        let e = field_energy(&sg, &p.phi_star, &p.bundle);
        assert!((e - p.e_star).abs() <= 1e-8 * p.e_star.abs());
    }

    #[test]
    fn distance_vanishes_on_translates() {
        let (sg, p) = small();
        let scale = p.phi_star.weighted_norm(&sg, 0.5);
        let dx = sg.spec().dx();
        for y in [[2.0 * dx, 0.0, -dx], [0.37 * dx, -1.2 * dx, 0.5 * dx]] {
            let u = p.phi_star.translated(y);
            let (d, _) = manifold_distance(&sg, &u, &p).unwrap();
            assert!(d <= 1e-7 * scale, "y = {y:?}: dist {d:e}");
        }
        let bump = random_perturbation(&sg, 3, 0, 0.01 * scale);
        let (d, _) = manifold_distance(&sg, &p.phi_star.add(&bump), &p).unwrap();
        assert!(d > 0.0 && d <= 0.01 * scale * (1.0 + 1e-12));
    }

    #[test]
    fn perturbations_are_reproducible_and_scaled() {
        let sg = SpectralGrid::new(GridSpec::new(4.0, 16).unwrap()).unwrap();
        let a = random_perturbation(&sg, 11, 2, 0.3);
        let b = random_perturbation(&sg, 11, 2, 0.3);
        let c = random_perturbation(&sg, 11, 3, 0.3);
        assert_eq!(a.values, b.values);
        assert_ne!(a.values, c.values);
        assert!((a.weighted_norm(&sg, 0.5) - 0.3).abs() < 1e-14);
        assert!(a.values.iter().zip(sg.dealias()).all(|(z, &m)| m || *z == Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn coercivity_ratios_are_positive_and_bounded() {
        let (sg, p) = small();
        let eta = 0.05 * p.phi_star.weighted_norm(&sg, 0.5);
        let r = coercivity_probe(&sg, &p, 3, eta, 5, &Tolerances::default()).unwrap();
        assert!(r.min_ratio > 0.0 && r.max_ratio <= 1.0 + 1e-6, "{r:?}");
    }
}
