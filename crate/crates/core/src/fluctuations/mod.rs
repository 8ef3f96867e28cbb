//! Mode-truncated quadratic fluctuation kernels around a ground state.
//!
//! Modes carry orthonormal operators `b_k = √Δk a_k`. A kernel is the quadratic Hamiltonian
//! `Σ h(k,ℓ) b_k† b_ℓ + ½ Σ (b(k,ℓ) b_k† b_ℓ† + h.c.) + c`.
//!
//! Both the plain and the dressed kernels have the form
//! `H_f + scalars + D − ⟨ψ, A R A ψ⟩` with `A = Σ_ℓ (α_ℓ b_ℓ + α_ℓ† b_ℓ†)`; writing
//! `g_ℓ = α_ℓ ψ` and `f_ℓ = α_ℓ† ψ` the resolvent part contributes
//! `h(k,ℓ) −= ⟨g_k, R g_ℓ⟩ + ⟨f_ℓ, R f_k⟩`, `b −= C + Cᵀ` with `C(k,ℓ) = ⟨g_k, R f_ℓ⟩`, and
//! `c −= Σ_k ⟨f_k, R f_k⟩`.

mod counterterm;
mod dump;
mod frame;

pub use counterterm::{counterterm_growth, CountertermNode, CountertermReport};
pub use dump::{read_kernel_dump, write_kernel_dump, KernelDumpHeader};
pub use frame::{
    propagate_bogoliubov, BogoliubovFrame, FrameRow, FrameRun, KernelSource,
};

use std::borrow::Cow;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::Tolerances;
use crate::dressing::CutoffPair;
use crate::error::{NelsonError, Result};
use crate::fields::FieldK;
use crate::grid::{GridSpec, SpectralGrid};
use crate::linalg::C;
use crate::schrodinger::{potential_values, GroundStateBundle, ReducedResolvent};

/// Lattice momenta `0 < |k| ≤ radius`, closed under `k ↦ −k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSet {
    pub grid: GridSpec,
    pub radius: f64,
    /// Flat lattice index per mode.
    pub indices: Vec<usize>,
    pub momenta: Vec<[f64; 3]>,
    pub integers: Vec<[i64; 3]>,
    /// Position of `−k` in the list.
    pub partner: Vec<usize>,
    /// `Δk` per mode.
    pub weight: f64,
}

impl ModeSet {
    /// All lattice modes in the closed ball, ordered by `|k|` then lexicographically.
    pub fn ball(grid: GridSpec, radius: f64, mode_cap: usize) -> Result<Self> {
        grid.validate()?;
        if !(radius > 0.0) || radius >= grid.k_nyquist() {
            return Err(NelsonError::Config(format!(
                "mode radius {radius} must lie in (0, {})",
                grid.k_nyquist()
            )));
        }
        let dk1 = grid.dk1();
        let m = (radius / dk1).floor() as i64;
        let r2 = radius * radius * (1.0 + 1e-12);
        let mut ints: Vec<[i64; 3]> = Vec::new();
        for a in -m..=m {
            for b in -m..=m {
                for c in -m..=m {
                    let q2 = ((a * a + b * b + c * c) as f64) * dk1 * dk1;
                    if q2 > 0.0 && q2 <= r2 {
                        ints.push([a, b, c]);
                    }
                }
            }
        }
        if ints.len() > mode_cap {
            return Err(NelsonError::Config(format!(
                "{} modes within |k| <= {radius} exceed mode_cap = {mode_cap}",
                ints.len()
            )));
        }
        ints.sort_by_key(|v| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2], *v));
        let indices: Vec<usize> = ints
            .iter()
            .map(|v| grid.flat(grid.slot(v[0]), grid.slot(v[1]), grid.slot(v[2])))
            .collect();
        let momenta = ints
            .iter()
            .map(|v| [v[0] as f64 * dk1, v[1] as f64 * dk1, v[2] as f64 * dk1])
            .collect();
        let partner = ints
            .iter()
            .map(|v| {
                let neg = [-v[0], -v[1], -v[2]];
                ints.binary_search_by_key(&(neg[0] * neg[0] + neg[1] * neg[1] + neg[2] * neg[2], neg), |w| {
                    (w[0] * w[0] + w[1] * w[1] + w[2] * w[2], *w)
                })
                .expect("ball is symmetric")
            })
            .collect();
        Ok(ModeSet {
            grid,
            radius,
            indices,
            momenta,
            integers: ints,
            partner,
            weight: grid.dk(),
        })
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn norm(&self, i: usize) -> f64 {
        let k = self.momenta[i];
        (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt()
    }

    /// Lattice index of `k_i ± k_j` as integer vectors.
    fn combined(&self, i: usize, j: usize, sign: i64) -> usize {
        let a = self.integers[i];
        let b = self.integers[j];
        let g = &self.grid;
        g.flat(
            g.slot(a[0] + sign * b[0]),
            g.slot(a[1] + sign * b[1]),
            g.slot(a[2] + sign * b[2]),
        )
    }
}

/// Blocks of a quadratic Hamiltonian over a [`ModeSet`].
#[derive(Debug, Clone)]
pub struct QuadKernel {
    /// Coefficient of `b_k† b_ℓ`, free energy `ω` included.
    pub h: DMatrix<C>,
    /// Coefficient of `½ b_k† b_ℓ†`.
    pub b: DMatrix<C>,
    pub c: f64,
    /// `⟨g_k, R g_ℓ⟩`.
    pub gram: DMatrix<C>,
    /// `⟨g_k, R f_ℓ⟩ / Δk`, the kernel `M(k,ℓ)` for the plain coupling.
    pub pair: DMatrix<C>,
    pub max_residual: f64,
    pub solves: usize,
}

impl QuadKernel {
    /// Kernel of the free field, `h = diag(ω)`, `b = 0`.
    pub fn free(modes: &ModeSet) -> Self {
        let n = modes.len();
        let mut h = DMatrix::<C>::zeros(n, n);
        for i in 0..n {
            h[(i, i)] = C::new(modes.norm(i), 0.0);
        }
        QuadKernel {
            h,
            b: DMatrix::zeros(n, n),
            c: 0.0,
            gram: DMatrix::zeros(n, n),
            pair: DMatrix::zeros(n, n),
            max_residual: 0.0,
            solves: 0,
        }
    }

    /// `(max |h − h†|, max |b − bᵀ|)`.
    pub fn structure_defects(&self) -> (f64, f64) {
        (
            max_abs(&(&self.h - self.h.adjoint())),
            max_abs(&(&self.b - self.b.transpose())),
        )
    }

    /// Smallest eigenvalue of `[[h, b], [b̄, h̄]]`; the quadratic form is bounded below and
    /// the frame flow stable when it is positive.
    pub fn hessian_min_eigenvalue(&self) -> f64 {
        let n = self.h.nrows();
        let mut m = DMatrix::<C>::zeros(2 * n, 2 * n);
        m.view_mut((0, 0), (n, n)).copy_from(&self.h);
        m.view_mut((0, n), (n, n)).copy_from(&self.b);
        m.view_mut((n, 0), (n, n)).copy_from(&self.b.map(|z| z.conj()));
        m.view_mut((n, n), (n, n)).copy_from(&self.h.map(|z| z.conj()));
        hermitian_min_eigenvalue(&m)
    }

    /// Smallest eigenvalue of the hermitian part of `gram`.
    pub fn gram_min_eigenvalue(&self) -> f64 {
        hermitian_min_eigenvalue(&self.gram)
    }
}

pub(crate) fn max_abs(m: &DMatrix<C>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Lowest eigenvalue of `(m + m†)/2` via the real symmetric embedding.
pub(crate) fn hermitian_min_eigenvalue(m: &DMatrix<C>) -> f64 {
    let n = m.nrows();
    let mut r = DMatrix::<f64>::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = 0.5 * (m[(i, j)] + m[(j, i)].conj());
            r[(i, j)] = z.re;
            r[(i + n, j + n)] = z.re;
            r[(i, j + n)] = -z.im;
            r[(i + n, j)] = z.im;
        }
    }
    nalgebra::SymmetricEigen::new(r)
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |a, &b| a.min(b))
}

/// `⟨a_i, b_j⟩` over the position lattice with weight `dv`, via real products.
fn cross_products(a: &[Vec<C>], b: &[Vec<C>], dv: f64) -> DMatrix<C> {
    let len = a.first().map_or(0, |v| v.len());
    let split = |vs: &[Vec<C>]| {
        let re = DMatrix::<f64>::from_fn(len, vs.len(), |i, j| vs[j][i].re);
        let im = DMatrix::<f64>::from_fn(len, vs.len(), |i, j| vs[j][i].im);
        (re, im)
    };
    let (ar, ai) = split(a);
    let (br, bi) = split(b);
    let re = ar.tr_mul(&br) + ai.tr_mul(&bi);
    let im = ar.tr_mul(&bi) - ai.tr_mul(&br);
    DMatrix::from_fn(a.len(), b.len(), |i, j| C::new(re[(i, j)], im[(i, j)]) * dv)
}

/// `e^{±ikx}` on the position lattice for a mode momentum.
fn plane_wave(grid: &GridSpec, k: [f64; 3], sign: f64) -> Vec<C> {
    (0..grid.len())
        .map(|i| {
            let x = grid.position(i);
            Complex64::from_polar(1.0, sign * (k[0] * x[0] + k[1] * x[1] + k[2] * x[2]))
        })
        .collect()
}

/// `p ψ` componentwise by spectral differentiation, Nyquist planes dropped.
fn momentum_components(sg: &SpectralGrid, psi: &[C]) -> [Vec<C>; 3] {
    let g = sg.spec();
    let half = (g.points / 2) as i64;
    let mut hat = psi.to_vec();
    sg.fft().forward(&mut hat);
    let scale = 1.0 / g.len() as f64;
    let mut out: [Vec<C>; 3] = Default::default();
    for (a, slot) in out.iter_mut().enumerate() {
        let mut v: Vec<C> = hat
            .iter()
            .enumerate()
            .map(|(idx, z)| {
                let (i, j, l) = g.unflat(idx);
                let m = [g.wave_number(i), g.wave_number(j), g.wave_number(l)];
                if m.iter().any(|&x| x == -half) {
                    C::default()
                } else {
                    z * g.wave_vector(idx)[a] * scale
                }
            })
            .collect();
        sg.fft().inverse(&mut v);
        *slot = v;
    }
    out
}

/// Resolvent images of the column vectors; `f = None` uses `f_ℓ = conj(g_ℓ)`.
struct Columns {
    g: Vec<Vec<C>>,
    f: Vec<Vec<C>>,
    rg: Vec<Vec<C>>,
    rf: Vec<Vec<C>>,
    max_residual: f64,
    solves: usize,
}

fn solve_columns(res: &ReducedResolvent<'_>, g: Vec<Vec<C>>, f: Option<Vec<Vec<C>>>) -> Result<Columns> {
    let solve_all = |vs: &[Vec<C>]| -> Result<Vec<(Vec<C>, f64, usize)>> {
        vs.par_iter()
            .enumerate()
            .map(|(i, v)| {
                res.solve_raw(v).map_err(|e| match e {
                    NelsonError::NotConverged {
                        solver,
                        iterations,
                        residual,
                    } => NelsonError::NotConverged {
                        solver: format!("{solver} (mode {i})"),
                        iterations,
                        residual,
                    },
                    other => other,
                })
            })
            .collect()
    };
    let rg_out = solve_all(&g)?;
    let mut max_residual = rg_out.iter().map(|r| r.1).fold(0.0, f64::max);
    let mut solves = rg_out.iter().filter(|r| r.2 > 0).count();
    let rg: Vec<Vec<C>> = rg_out.into_iter().map(|r| r.0).collect();
    let (f, rf) = match f {
        Some(f) => {
            let rf_out = solve_all(&f)?;
            max_residual = rf_out.iter().map(|r| r.1).fold(max_residual, f64::max);
            solves += rf_out.iter().filter(|r| r.2 > 0).count();
            (f, rf_out.into_iter().map(|r| r.0).collect())
        }
        None => {
            let conj = |vs: &[Vec<C>]| -> Vec<Vec<C>> {
                vs.iter().map(|v| v.iter().map(|z| z.conj()).collect()).collect()
            };
            (conj(&g), conj(&rg))
        }
    };
    Ok(Columns {
        g,
        f,
        rg,
        rf,
        max_residual,
        solves,
    })
}

fn kernel_from_columns(modes: &ModeSet, cols: &Columns, dv: f64) -> QuadKernel {
    let n = modes.len();
    let gram = cross_products(&cols.g, &cols.rg, dv);
    let ff = cross_products(&cols.f, &cols.rf, dv);
    let cpair = cross_products(&cols.g, &cols.rf, dv);
    let mut h = DMatrix::<C>::zeros(n, n);
    for k in 0..n {
        for l in 0..n {
            h[(k, l)] = -(gram[(k, l)] + ff[(l, k)]);
        }
        h[(k, k)] += modes.norm(k);
    }
    let b = -(&cpair + cpair.transpose());
    let c = -(0..n).map(|k| ff[(k, k)].re).sum::<f64>();
    QuadKernel {
        h,
        b,
        c,
        gram,
        pair: cpair / C::new(modes.weight, 0.0),
        max_residual: cols.max_residual,
        solves: cols.solves,
    }
}

fn check_inputs(sg: &SpectralGrid, b: &GroundStateBundle, phi: &FieldK, modes: &ModeSet, lambda: f64, tol: &Tolerances) -> Result<()> {
    sg.spec().ensure_same(&phi.grid)?;
    sg.spec().ensure_same(&b.psi.grid)?;
    sg.spec().ensure_same(&modes.grid)?;
    b.ensure_gap(tol.gap_floor)?;
    if lambda > modes.radius * (1.0 + 1e-12) {
        return Err(NelsonError::Config(format!(
            "Λ = {lambda} exceeds the mode radius {}",
            modes.radius
        )));
    }
    Ok(())
}

/// Plain kernel `H_f − ⟨ψ, φ(G_Λ) R φ(G_Λ) ψ⟩` with `G_Λ(x,k) = ω^{-1/2} e^{-ikx} 1_{|k| ≤ Λ}`.
pub fn assemble_bog_kernel(
    sg: &SpectralGrid,
    b: &GroundStateBundle,
    phi: &FieldK,
    modes: &ModeSet,
    lambda: f64,
    tol: &Tolerances,
) -> Result<QuadKernel> {
    check_inputs(sg, b, phi, modes, lambda, tol)?;
    let v = potential_values(sg, phi)?;
    let res = ReducedResolvent::for_bundle(sg, Cow::Owned(v), b, tol)?;
    let g = sg.spec();
    let s = modes.weight.sqrt();
    let cols: Vec<Vec<C>> = (0..modes.len())
        .map(|l| {
            let kl = modes.norm(l);
            let amp = if kl <= lambda * (1.0 + 1e-12) { s * kl.powf(-0.5) } else { 0.0 };
            plane_wave(g, modes.momenta[l], 1.0)
                .iter()
                .zip(&b.psi.values)
                .map(|(e, p)| e * p * amp)
                .collect()
        })
        .collect();
    let columns = solve_columns(&res, cols, None)?;
    Ok(kernel_from_columns(modes, &columns, g.dv()))
}

/// `ρ̂(q) = Σ_x e^{-iqx} |ψ|² Δx³` on the whole lattice.
fn density_transform(sg: &SpectralGrid, b: &GroundStateBundle) -> Vec<C> {
    let mut rho: Vec<C> = b.psi.density().into_iter().map(|d| C::new(d, 0.0)).collect();
    sg.forward_in_place(&mut rho);
    rho
}

/// `2 Re⟨σ(ψ), B_{K,Λ}⟩` over the mode set.
pub fn dressing_source_scalar(sg: &SpectralGrid, b: &GroundStateBundle, modes: &ModeSet, c: CutoffPair) -> f64 {
    let rho = density_transform(sg, b);
    (0..modes.len())
        .map(|i| {
            let kn = modes.norm(i);
            let bk = shell_value(kn, c);
            2.0 * kn.powf(-0.5) * bk * rho[modes.indices[i]].norm_sqr()
        })
        .sum::<f64>()
        * modes.weight
}

fn shell_value(kn: f64, c: CutoffPair) -> f64 {
    let eps = 1e-12;
    if kn > c.k * (1.0 + eps) && kn <= c.lambda * (1.0 + eps) {
        kn.powf(-2.5)
    } else {
        0.0
    }
}

fn ball_value(kn: f64, radius: f64) -> f64 {
    if kn <= radius * (1.0 + 1e-12) {
        kn.powf(-0.5)
    } else {
        0.0
    }
}

/// Dressed kernel `H_f + ⟨ψ, (D_{K,Λ} + 2Re⟨σ, B⟩ − A R A) ψ⟩` with
/// `A = φ(G_K) + 2p·a(kB) + 2a*(kB)·p`.
pub fn assemble_dressed_kernel(
    sg: &SpectralGrid,
    b: &GroundStateBundle,
    phi: &FieldK,
    modes: &ModeSet,
    cut: CutoffPair,
    tol: &Tolerances,
) -> Result<QuadKernel> {
    check_inputs(sg, b, phi, modes, cut.lambda, tol)?;
    let v = potential_values(sg, phi)?;
    let res = ReducedResolvent::for_bundle(sg, Cow::Owned(v), b, tol)?;
    let g = sg.spec();
    let s = modes.weight.sqrt();
    let psi = &b.psi.values;
    let p = momentum_components(sg, psi);
    let n = modes.len();
    let mut gcols = Vec::with_capacity(n);
    let mut fcols = Vec::with_capacity(n);
    for l in 0..n {
        let k = modes.momenta[l];
        let kn = modes.norm(l);
        let gk = ball_value(kn, cut.k);
        let bk = shell_value(kn, cut);
        let k2 = kn * kn;
        let up = plane_wave(g, k, 1.0);
        let mut gl = Vec::with_capacity(psi.len());
        let mut fl = Vec::with_capacity(psi.len());
        for i in 0..psi.len() {
            let kp = k[0] * p[0][i] + k[1] * p[1][i] + k[2] * p[2][i];
            gl.push(up[i] * s * (psi[i] * gk + 2.0 * bk * (kp + psi[i] * k2)));
            fl.push(up[i].conj() * s * (psi[i] * gk + 2.0 * bk * kp));
        }
        gcols.push(gl);
        fcols.push(fl);
    }
    let columns = solve_columns(&res, gcols, Some(fcols))?;
    let mut kernel = kernel_from_columns(modes, &columns, g.dv());

    let rho = density_transform(sg, b);
    let bvals: Vec<f64> = (0..n).map(|i| shell_value(modes.norm(i), cut)).collect();
    for k in 0..n {
        if bvals[k] == 0.0 {
            continue;
        }
        for l in 0..n {
            if bvals[l] == 0.0 {
                continue;
            }
            let a = modes.momenta[k];
            let c = modes.momenta[l];
            let dot = a[0] * c[0] + a[1] * c[1] + a[2] * c[2];
            let w = 2.0 * dot * bvals[k] * bvals[l] * modes.weight;
            kernel.h[(k, l)] += rho[modes.combined(k, l, -1)] * w;
            kernel.b[(k, l)] += rho[modes.combined(k, l, 1)] * w;
        }
    }
    kernel.c += 4.0 * PI * cut.k.ln() + dressing_source_scalar(sg, b, modes, cut);
    Ok(kernel)
}

/// Comparison of dressed and plain kernels.
#[derive(Debug, Clone, Serialize)]
pub struct KernelIdentityReport {
    pub modes: usize,
    pub k: f64,
    pub lambda: f64,
    pub h_deviation: f64,
    pub b_deviation: f64,
    /// Frobenius norm of the plain interaction blocks `[h − diag ω, b]`.
    pub scale: f64,
    /// `max(h_deviation, b_deviation) / scale`.
    pub relative_deviation: f64,
    /// `c_dressed − c_plain`.
    pub scalar_gap: f64,
    /// `4π ln K + Σ_{K<|k|≤Λ} |k|^{-3} Δk` over the mode set.
    pub lattice_gap: f64,
    /// `4π ln Λ`.
    pub continuum_gap: f64,
    pub max_residual: f64,
    pub solves: usize,
}

/// Expected lattice value of the scalar gap.
pub fn lattice_scalar_gap(modes: &ModeSet, cut: CutoffPair) -> f64 {
    4.0 * PI * cut.k.ln()
        + (0..modes.len())
            .map(|i| {
                let kn = modes.norm(i);
                if shell_value(kn, cut) > 0.0 {
                    kn.powi(-3)
                } else {
                    0.0
                }
            })
            .sum::<f64>()
            * modes.weight
}

pub fn compare_kernels(modes: &ModeSet, cut: CutoffPair, plain: &QuadKernel, dressed: &QuadKernel) -> KernelIdentityReport {
    let h_deviation = max_abs(&(&dressed.h - &plain.h));
    let b_deviation = max_abs(&(&dressed.b - &plain.b));
    let mut inter = plain.h.clone();
    for i in 0..modes.len() {
        inter[(i, i)] -= modes.norm(i);
    }
    let scale = (inter.norm_squared() + plain.b.norm_squared()).sqrt();
    KernelIdentityReport {
        modes: modes.len(),
        k: cut.k,
        lambda: cut.lambda,
        h_deviation,
        b_deviation,
        scale,
        relative_deviation: h_deviation.max(b_deviation) / scale,
        scalar_gap: dressed.c - plain.c,
        lattice_gap: lattice_scalar_gap(modes, cut),
        continuum_gap: 4.0 * PI * cut.lambda.ln(),
        max_residual: plain.max_residual.max(dressed.max_residual),
        solves: plain.solves + dressed.solves,
    }
}

/// Assembles both kernels and compares them.
pub fn verify_kernel_identity(
    sg: &SpectralGrid,
    b: &GroundStateBundle,
    phi: &FieldK,
    modes: &ModeSet,
    cut: CutoffPair,
    tol: &Tolerances,
) -> Result<KernelIdentityReport> {
    let plain = assemble_bog_kernel(sg, b, phi, modes, cut.lambda, tol)?;
    let dressed = assemble_dressed_kernel(sg, b, phi, modes, cut, tol)?;
    Ok(compare_kernels(modes, cut, &plain, &dressed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::WaveX;
    use crate::pekar::slaved_field;
    use crate::schrodinger::{ground_state, WarmStart};

    fn fixture() -> (SpectralGrid, FieldK, GroundStateBundle, ModeSet) {
        let sg = SpectralGrid::new(GridSpec::new(PI / 2.0, 16).unwrap()).unwrap();
        let seed = WaveX::from_real_fn(*sg.spec(), |x| {
            (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / 0.32).exp()
        })
        .normalized()
        .unwrap();
        let phi = slaved_field(&sg, &seed).unwrap();
        let b = ground_state(&sg, &phi, WarmStart::Wave(&seed), &tight()).unwrap();
        let modes = ModeSet::ball(*sg.spec(), 8.0, 128).unwrap();
        (sg, phi, b, modes)
    }

    fn tight() -> Tolerances {
        Tolerances {
            eig_tol: 1e-11,
            ..Default::default()
        }
    }

    #[test]
    fn mode_ball_is_symmetric_and_capped() {
        let g = GridSpec::new(PI / 2.0, 16).unwrap();
        let m = ModeSet::ball(g, 8.0, 128).unwrap();
        assert_eq!(m.len(), 32);
        for i in 0..m.len() {
            let j = m.partner[i];
            assert_eq!(m.partner[j], i);
            let (a, b) = (m.integers[i], m.integers[j]);
            assert_eq!([a[0] + b[0], a[1] + b[1], a[2] + b[2]], [0, 0, 0]);
            assert!(m.norm(i) > 0.0);
        }
        assert!(m.norm(0) <= m.norm(m.len() - 1));
        assert!(ModeSet::ball(g, 8.0, 31).is_err());
        assert!(ModeSet::ball(g, 40.0, 10_000).is_err());
    }

    #[test]
    fn plain_kernel_structure() {
        let (sg, phi, b, modes) = fixture();
        let tol = tight();
        let k = assemble_bog_kernel(&sg, &b, &phi, &modes, 8.0, &tol).unwrap();
        let (dh, db) = k.structure_defects();
        assert!(dh < 1e-10 && db < 1e-10, "{dh:e} {db:e}");
        assert!(k.gram_min_eigenvalue() > -1e-9);
        let m = &k.pair;
        let n = modes.len();
        let scale = max_abs(m);
        for i in 0..n {
            for j in 0..n {
                assert!((m[(i, j)] - m[(j, i)]).norm() < 1e-8 * scale);
                let (pi, pj) = (modes.partner[i], modes.partner[j]);
                assert!((m[(pi, pj)] - m[(i, j)].conj()).norm() < 1e-8 * scale);
            }
        }
        // ⟨e^{ik·}ψ, R e^{ik·}ψ⟩ ≈ |k|^{-2} on the outermost shell
        let top = modes.norm(n - 1);
        for i in (0..n).filter(|&i| (modes.norm(i) - top).abs() < 1e-9) {
            let r = m[(i, modes.partner[i])].re * top * top * top;
            assert!((0.5..=2.0).contains(&r), "{r}");
        }
    }

    #[test]
    fn degenerate_cutoff_shifts_only_the_scalar() {
        let (sg, phi, b, modes) = fixture();
        let tol = tight();
        let cut = CutoffPair::new(8.0, 8.0).unwrap();
        let plain = assemble_bog_kernel(&sg, &b, &phi, &modes, 8.0, &tol).unwrap();
        let dressed = assemble_dressed_kernel(&sg, &b, &phi, &modes, cut, &tol).unwrap();
        assert!(max_abs(&(&dressed.h - &plain.h)) < 1e-13);
        assert!(max_abs(&(&dressed.b - &plain.b)) < 1e-13);
        assert!((dressed.c - plain.c - 4.0 * PI * 8f64.ln()).abs() < 1e-11);
    }

    #[test]
    fn dressed_and_plain_kernels_agree() {
        let (sg, phi, b, modes) = fixture();
        let cut = CutoffPair::new(4.0, 8.0).unwrap();
        let mut devs = Vec::new();
        for cg in [1e-7, 1e-10] {
            let tol = Tolerances { cg_tol: cg, ..tight() };
            let r = verify_kernel_identity(&sg, &b, &phi, &modes, cut, &tol).unwrap();
            assert!(r.relative_deviation <= 10.0 * cg, "{r:?}");
            assert!((r.scalar_gap - r.lattice_gap).abs() < 1e-6, "{r:?}");
            devs.push(r.relative_deviation);
        }
        assert!(devs[1] < devs[0]);
    }

    #[test]
    fn dressing_scalar_matches_direct_sum() {
        let (sg, _, b, modes) = fixture();
        let cut = CutoffPair::new(4.0, 8.0).unwrap();
        let g = sg.spec();
        let rho = b.psi.density();
        let direct: f64 = (0..modes.len())
            .map(|i| {
                let k = modes.momenta[i];
                let kn = modes.norm(i);
                if kn <= 4.0 + 1e-9 {
                    return 0.0;
                }
                let hat: C = rho
                    .iter()
                    .enumerate()
                    .map(|(j, r)| {
                        let x = g.position(j);
                        C::from_polar(r * g.dv(), -(k[0] * x[0] + k[1] * x[1] + k[2] * x[2]))
                    })
                    .sum();
                2.0 * kn.powi(-3) * hat.norm_sqr()
            })
            .sum::<f64>()
            * modes.weight;
        let fast = dressing_source_scalar(&sg, &b, &modes, cut);
        assert!((fast - direct).abs() < 1e-8 * direct.abs().max(1.0), "{fast} {direct}");
    }

    #[test]
    fn lattice_gap_tends_to_the_continuum_gap() {
        let cut = CutoffPair::new(4.0, 8.0).unwrap();
        let coarse = ModeSet::ball(GridSpec::new(PI / 2.0, 16).unwrap(), 8.0, 512).unwrap();
        let fine = ModeSet::ball(GridSpec::new(2.0 * PI / 2.0, 16).unwrap(), 8.0, 512).unwrap();
        let exact = 4.0 * PI * 8f64.ln();
        let e0 = (lattice_scalar_gap(&coarse, cut) - exact).abs();
        let e1 = (lattice_scalar_gap(&fine, cut) - exact).abs();
        assert!(e1 < e0);
    }
}
