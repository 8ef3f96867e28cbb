use std::borrow::Cow;

use nalgebra::{DMatrix, SymmetricEigen};

use super::hamiltonian::Hamiltonian;
use super::potential_values;
use crate::config::Tolerances;
use crate::error::{NelsonError, Result};
use crate::fields::{FieldK, WaveX};
use crate::grid::SpectralGrid;
use crate::linalg::C;

const BLOCK: usize = 5;

/// Lowest eigenpairs of `h_φ` with the spectral gap.
#[derive(Debug, Clone)]
pub struct GroundStateBundle {
    pub psi: WaveX,
    pub e: f64,
    pub lambda1: f64,
    pub gap: f64,
    /// `‖(h − e)ψ‖_{L²}`
    pub residual: f64,
    pub lambda1_residual: f64,
    pub iterations: usize,
    /// Remaining block members (first excited cluster and one guard vector).
    pub excited: Vec<WaveX>,
    pub excited_values: Vec<f64>,
}

impl GroundStateBundle {
    pub fn ensure_bound(&self, e_tol: f64) -> Result<()> {
        if self.e < -e_tol {
            Ok(())
        } else {
            Err(NelsonError::NoBoundState { e: self.e, e_tol })
        }
    }

    pub fn ensure_gap(&self, floor: f64) -> Result<()> {
        if self.gap >= floor {
            Ok(())
        } else {
            Err(NelsonError::GapTooSmall {
                gap: self.gap,
                floor,
            })
        }
    }
}

/// Starting block for the eigensolver.
#[derive(Debug, Clone, Copy)]
pub enum WarmStart<'b> {
    Cold,
    Wave(&'b WaveX),
    Bundle(&'b GroundStateBundle),
}

pub fn ground_state(
    sg: &SpectralGrid,
    phi: &FieldK,
    warm: WarmStart<'_>,
    tol: &Tolerances,
) -> Result<GroundStateBundle> {
    let v = potential_values(sg, phi)?;
    ground_state_for_potential(sg, &v, warm, tol)
}

/// Ground state of `p² + V` for an explicit potential array.
pub fn ground_state_for_potential(
    sg: &SpectralGrid,
    potential: &[f64],
    warm: WarmStart<'_>,
    tol: &Tolerances,
) -> Result<GroundStateBundle> {
    if potential.len() != sg.len() || potential.iter().any(|v| !v.is_finite()) {
        return Err(NelsonError::Domain("potential must be finite on the grid".into()));
    }
    let h = Hamiltonian::new(sg, Cow::Borrowed(potential));
    let g = *sg.spec();
    let sqrt_dv = g.dv().sqrt();

    let (block, prev) = match warm {
        WarmStart::Cold => (imaginary_time_warmup(&h, cold_block(&h)), None),
        WarmStart::Wave(w) => {
            g.ensure_same(&w.grid)?;
            let mut b = vec![realify(&w.values)];
            b.extend(cold_block(&h).into_iter().skip(1));
            (b, Some(w))
        }
        WarmStart::Bundle(bd) => {
            g.ensure_same(&bd.psi.grid)?;
            let mut b = vec![realify(&bd.psi.values)];
            b.extend(bd.excited.iter().map(|w| realify(&w.values)));
            if b.len() < BLOCK {
                b.extend(cold_block(&h).into_iter().skip(b.len()));
            }
            b.truncate(BLOCK);
            (b, Some(&bd.psi))
        }
    };

    let tols = [tol.eig_tol, tol.lambda1_tol.max(tol.eig_tol)];
    let out = lobpcg(&h, block, tols, tol.eig_max_iter)?;

    let to_wave = |v: &[f64], prev: Option<&WaveX>| {
        let mut v = v.to_vec();
        fix_sign(&mut v, prev.map(|w| w.values.as_slice()));
        WaveX {
            grid: g,
            values: v.iter().map(|x| C::new(x / sqrt_dv, 0.0)).collect(),
        }
    };
    let psi = to_wave(&out.vectors[0], prev);
    let excited: Vec<WaveX> = out.vectors[1..].iter().map(|v| to_wave(v, None)).collect();
    Ok(GroundStateBundle {
        psi,
        e: out.values[0],
        lambda1: out.values[1],
        gap: out.values[1] - out.values[0],
        residual: out.residuals[0],
        lambda1_residual: out.residuals[1],
        iterations: out.iterations,
        excited,
        excited_values: out.values[1..].to_vec(),
    })
}

/// Flips the sign so that `Σ ψ > 0`; with a previous state, additionally enforces
/// `Re⟨ψ_prev, ψ⟩ > 0`.
fn fix_sign(v: &mut [f64], prev: Option<&[C]>) {
    let s: f64 = v.iter().sum();
    let flip = if s.abs() > 1e-8 * rnorm(v) {
        s < 0.0
    } else {
        let big = v.iter().fold(0.0f64, |a, &z| if z.abs() > a.abs() { z } else { a });
        big < 0.0
    };
    if flip {
        v.iter_mut().for_each(|z| *z = -*z);
    }
    if let Some(p) = prev {
        let o: f64 = p.iter().zip(v.iter()).map(|(a, b)| a.re * b).sum();
        if o < 0.0 {
            v.iter_mut().for_each(|z| *z = -*z);
        }
    }
}

/// Real start vector from a complex one: rotate so `Σ v` is real, keep the real part.
fn realify(v: &[C]) -> Vec<f64> {
    let s: C = v.iter().sum();
    let rot = if s.norm() > 0.0 { s.conj() / s.norm() } else { C::new(1.0, 0.0) };
    v.iter().map(|z| (z * rot).re).collect()
}

/// Gaussians `g, x g, y g, z g, x y g` centred at the potential minimum.
fn cold_block(h: &Hamiltonian<'_>) -> Vec<Vec<f64>> {
    let sg = h.grid();
    let g = *sg.spec();
    let (imin, vmin) = h.min_potential();
    let vmean = h.potential().iter().sum::<f64>() / g.len() as f64;
    let depth = (vmean - vmin).max(0.0);
    let w = (1.0 + depth).powf(-0.25).max(2.0 * g.dx()).min(g.length / 4.0);
    let c = g.position(imin);
    let half = g.length / 2.0;
    let wrap = |d: f64| {
        if d >= half {
            d - g.length
        } else if d < -half {
            d + g.length
        } else {
            d
        }
    };
    (0..BLOCK)
        .map(|kind| {
            (0..g.len())
                .map(|idx| {
                    let x = g.position(idx);
                    let d = [wrap(x[0] - c[0]), wrap(x[1] - c[1]), wrap(x[2] - c[2])];
                    let r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
                    let gauss = (-r2 / (2.0 * w * w)).exp();
                    let pre = match kind {
                        0 => 1.0,
                        1 => d[0] / w,
                        2 => d[1] / w,
                        3 => d[2] / w,
                        _ => d[0] * d[1] / (w * w),
                    };
                    pre * gauss
                })
                .collect()
        })
        .collect()
}

/// A few split-step imaginary-time sweeps with block re-orthonormalization.
fn imaginary_time_warmup(h: &Hamiltonian<'_>, mut block: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let (_, vmin) = h.min_potential();
    let dtau = (1.0 / (1.0 + vmin.abs())).min(0.1);
    let vmax = h.potential().iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let half: Vec<f64> = h
        .potential()
        .iter()
        .map(|v| (-0.5 * dtau * (v - vmax)).exp())
        .collect();
    let kin: Vec<f64> = h.kinetic().iter().map(|k| (-dtau * k).exp()).collect();
    for _ in 0..30 {
        for v in block.iter_mut() {
            for (z, f) in v.iter_mut().zip(&half) {
                *z *= f;
            }
        }
        block = multiplier_block(h, &block, &kin);
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(block.len());
        for v in block.iter_mut() {
            for (z, f) in v.iter_mut().zip(&half) {
                *z *= f;
            }
            let mut w = v.clone();
            if orthonormalize_real(&mut w, &basis, 1e-10) {
                *v = w.clone();
                basis.push(w);
            }
        }
    }
    block
}

fn rdot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn rnorm(a: &[f64]) -> f64 {
    rdot(a, a).sqrt()
}

fn raxpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (u, v) in y.iter_mut().zip(x) {
        *u += a * v;
    }
}

fn orthonormalize_real(v: &mut [f64], basis: &[Vec<f64>], drop_tol: f64) -> bool {
    let n0 = rnorm(v);
    if n0 == 0.0 {
        return false;
    }
    let mut before = n0;
    let mut n1 = n0;
    for _ in 0..3 {
        for u in basis {
            let c = rdot(u, v);
            raxpy(v, -c, u);
        }
        n1 = rnorm(v);
        // a second pass is only needed after heavy cancellation
        if n1 > 0.5 * before {
            break;
        }
        before = n1;
    }
    if n1 <= drop_tol * n0 {
        return false;
    }
    v.iter_mut().for_each(|z| *z /= n1);
    true
}

/// Applies a real-symmetric lattice operator to real vectors two at a time, packing each
/// pair as the real and imaginary parts of one complex array.
fn paired<F: Fn(&mut Vec<C>)>(vs: &[Vec<f64>], op: F) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(vs.len());
    for pair in vs.chunks(2) {
        let mut z: Vec<C> = match pair {
            [a, b] => a.iter().zip(b).map(|(x, y)| C::new(*x, *y)).collect(),
            [a] => a.iter().map(|x| C::new(*x, 0.0)).collect(),
            _ => unreachable!(),
        };
        op(&mut z);
        out.push(z.iter().map(|c| c.re).collect());
        if pair.len() == 2 {
            out.push(z.iter().map(|c| c.im).collect());
        }
    }
    out
}

fn apply_block(h: &Hamiltonian<'_>, vs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    paired(vs, |z| *z = h.apply(z))
}

fn multiplier_block(h: &Hamiltonian<'_>, vs: &[Vec<f64>], mult: &[f64]) -> Vec<Vec<f64>> {
    paired(vs, |z| h.grid().apply_fourier_multiplier(z, mult))
}

pub(crate) struct EigOutput {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
}

/// Block preconditioned eigensolver with basis `[X, T R, P]` and Rayleigh–Ritz on the span.
/// Only the first two columns are required to converge (to `tols[0]` and `tols[1]`).
///
/// Requires a real-symmetric Hamiltonian (real potential, even kinetic multiplier).
pub(crate) fn lobpcg(
    h: &Hamiltonian<'_>,
    start: Vec<Vec<f64>>,
    tols: [f64; 2],
    max_iter: usize,
) -> Result<EigOutput> {
    let m = start.len();
    let n = h.grid().len();
    let mut x: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut filler = 0usize;
    for mut v in start {
        if !orthonormalize_real(&mut v, &x, 1e-8) {
            // replace a dependent start vector by a deterministic pseudo-random one
            loop {
                filler += 1;
                let mut r: Vec<f64> = (0..n)
                    .map(|i| ((i * 7919 + filler * 104729) % 1009) as f64 / 1009.0 - 0.5)
                    .collect();
                if orthonormalize_real(&mut r, &x, 1e-8) {
                    v = r;
                    break;
                }
            }
        }
        x.push(v);
    }
    let hx0 = apply_block(h, &x);
    let (mut theta, xs, hxs, _) = rayleigh_ritz(&x, &hx0, m)?;
    x = xs;
    let mut hx = hxs;
    let mut p: Vec<Vec<f64>> = Vec::new();
    let mut residuals = vec![f64::INFINITY; m];
    let mut refreshed = true;

    for it in 0..=max_iter {
        let r: Vec<Vec<f64>> = (0..m)
            .map(|i| {
                let mut ri = hx[i].clone();
                raxpy(&mut ri, -theta[i], &x[i]);
                ri
            })
            .collect();
        for i in 0..m {
            residuals[i] = rnorm(&r[i]);
        }
        log::trace!("eig it {it} residuals {residuals:?} values {theta:?}");
        let converged = residuals[0] <= tols[0] && residuals[1] <= tols[1];
        if converged {
            if refreshed {
                return Ok(EigOutput {
                    values: theta,
                    vectors: x,
                    residuals,
                    iterations: it,
                });
            }
            hx = apply_block(h, &x);
            for i in 0..m {
                theta[i] = rdot(&x[i], &hx[i]);
            }
            refreshed = true;
            continue;
        }
        if it == max_iter {
            break;
        }
        refreshed = false;

        let prec = h.preconditioner(theta[0].abs() + 1.0);
        let active: Vec<Vec<f64>> = r
            .into_iter()
            .enumerate()
            .filter(|(i, _)| residuals[*i] > 0.1 * tols[(*i).min(1)])
            .map(|(_, ri)| ri)
            .collect();
        let w = multiplier_block(h, &active, &prec);
        let mut basis = x.clone();
        for mut wi in w {
            if orthonormalize_real(&mut wi, &basis, 1e-10) {
                basis.push(wi);
            }
        }
        for mut pi in p.drain(..) {
            if orthonormalize_real(&mut pi, &basis, 1e-8) {
                basis.push(pi);
            }
        }
        let mut hbasis = hx.clone();
        hbasis.extend(apply_block(h, &basis[m..]));
        let (t, xn, hxn, pn) = rayleigh_ritz(&basis, &hbasis, m)?;
        theta = t;
        x = xn;
        hx = hxn;
        p = pn;
        if (it + 1) % 20 == 0 {
            hx = apply_block(h, &x);
            refreshed = true;
        }
    }
    Err(NelsonError::NotConverged {
        solver: "eigensolver".into(),
        iterations: max_iter,
        residual: residuals[0].max(residuals[1]),
    })
}

type RitzOut = (Vec<f64>, Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<Vec<f64>>);

/// Rayleigh–Ritz on an orthonormal basis; returns the lowest `m` Ritz pairs, their images,
/// and the implicit search directions (Ritz vectors with the leading `m` block removed).
fn rayleigh_ritz(basis: &[Vec<f64>], hbasis: &[Vec<f64>], m: usize) -> Result<RitzOut> {
    let d = basis.len();
    let mut a = DMatrix::<f64>::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            let v = rdot(&basis[i], &hbasis[j]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    let eig = SymmetricEigen::new(a);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let n = basis[0].len();
    let mut theta = Vec::with_capacity(m);
    let mut xs = Vec::with_capacity(m);
    let mut hxs = Vec::with_capacity(m);
    let mut ps = Vec::new();
    for &col in order.iter().take(m) {
        theta.push(eig.eigenvalues[col]);
        let mut xv = vec![0.0; n];
        let mut hv = vec![0.0; n];
        let mut pv = vec![0.0; n];
        for i in 0..d {
            let c = eig.eigenvectors[(i, col)];
            raxpy(&mut xv, c, &basis[i]);
            raxpy(&mut hv, c, &hbasis[i]);
            if i >= m {
                raxpy(&mut pv, c, &basis[i]);
            }
        }
        xs.push(xv);
        hxs.push(hv);
        if d > m {
            ps.push(pv);
        }
    }
    if theta.iter().any(|t| !t.is_finite()) {
        return Err(NelsonError::Invariant("non-finite Ritz value".into()));
    }
    Ok((theta, xs, hxs, ps))
}
