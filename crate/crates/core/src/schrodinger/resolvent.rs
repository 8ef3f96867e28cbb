use std::borrow::Cow;

use super::eigen::GroundStateBundle;
use super::hamiltonian::Hamiltonian;
use super::potential_values;
use crate::config::Tolerances;
use crate::error::{NelsonError, Result};
use crate::fields::{FieldK, WaveX};
use crate::grid::SpectralGrid;
use crate::linalg::{self, C};

/// Output of one reduced-resolvent application.
#[derive(Debug, Clone)]
pub struct ResolventSolve {
    pub solution: WaveX,
    /// `‖Q(h − e)u − Q v‖ / ‖Q v‖`
    pub residual: f64,
    pub iterations: usize,
}

/// `R = Q (h − e)^{-1} Q` with `Q = 1 − |χ⟩⟨χ|`, solved by projected preconditioned CG.
///
/// `χ` is normally the ground state itself; Bloch-shifted problems pass `e^{-iqx}ψ` together
/// with the kinetic multiplier `|k + q|²`.
pub struct ReducedResolvent<'a> {
    h: Hamiltonian<'a>,
    e: f64,
    chi: Vec<C>,
    prec: Vec<f64>,
    tol: f64,
    max_iter: usize,
}

impl<'a> ReducedResolvent<'a> {
    pub fn new(h: Hamiltonian<'a>, e: f64, chi: &[C], tol: f64, max_iter: usize) -> Self {
        let mut chi = chi.to_vec();
        let n = linalg::norm(&chi);
        linalg::scale_re(&mut chi, 1.0 / n);
        let prec = h.preconditioner(e.abs() + 1.0);
        ReducedResolvent {
            h,
            e,
            chi,
            prec,
            tol,
            max_iter,
        }
    }

    /// `(h − e)^{-1}` without a projector, for operators positive on the whole space.
    pub fn unprojected(h: Hamiltonian<'a>, e: f64, tol: f64, max_iter: usize) -> Self {
        let prec = h.preconditioner(e.abs() + 1.0);
        ReducedResolvent {
            h,
            e,
            chi: Vec::new(),
            prec,
            tol,
            max_iter,
        }
    }

    pub fn for_bundle(
        sg: &'a SpectralGrid,
        potential: Cow<'a, [f64]>,
        bundle: &GroundStateBundle,
        tol: &Tolerances,
    ) -> Result<Self> {
        bundle.ensure_gap(tol.gap_floor)?;
        Ok(Self::new(
            Hamiltonian::new(sg, potential),
            bundle.e,
            &bundle.psi.values,
            tol.cg_tol,
            tol.cg_max_iter,
        ))
    }

    pub fn hamiltonian(&self) -> &Hamiltonian<'a> {
        &self.h
    }

    pub fn energy(&self) -> f64 {
        self.e
    }

    fn project(&self, v: &mut [C]) {
        if !self.chi.is_empty() {
            linalg::project_out(v, &self.chi);
        }
    }

    /// `Q (h − e) Q v` for `v` already in the range of `Q`.
    pub fn apply_shifted(&self, v: &[C]) -> Vec<C> {
        let mut out = self.h.apply(v);
        linalg::axpy(&mut out, C::new(-self.e, 0.0), v);
        self.project(&mut out);
        out
    }

    /// Solves on raw lattice arrays; returns `(u, relative residual, iterations)`.
    pub fn solve_raw(&self, v: &[C]) -> Result<(Vec<C>, f64, usize)> {
        let mut b = v.to_vec();
        self.project(&mut b);
        let bnorm = linalg::norm(&b);
        let n = b.len();
        if bnorm <= 1e-13 * linalg::norm(v) {
            return Ok((vec![C::default(); n], 0.0, 0));
        }
        let mut x = vec![C::default(); n];
        let mut r = b;
        let mut z = self.h.apply_multiplier(&r, &self.prec);
        self.project(&mut z);
        let mut p = z.clone();
        let mut rz = linalg::dot(&r, &z).re;
        let mut rel = 1.0;
        for it in 1..=self.max_iter {
            let ap = self.apply_shifted(&p);
            let pap = linalg::dot(&p, &ap).re;
            if !(pap > 0.0) {
                return Err(NelsonError::Invariant(format!(
                    "reduced operator not positive on search direction ({pap:.3e})"
                )));
            }
            let alpha = rz / pap;
            linalg::axpy(&mut x, C::new(alpha, 0.0), &p);
            linalg::axpy(&mut r, C::new(-alpha, 0.0), &ap);
            rel = linalg::norm(&r) / bnorm;
            if rel <= self.tol {
                // confirm with the true residual
                let mut b2 = v.to_vec();
                self.project(&mut b2);
                let ax = self.apply_shifted(&x);
                let true_rel = linalg::norm(&linalg::sub(&ax, &b2)) / bnorm;
                if true_rel <= self.tol {
                    self.project(&mut x);
                    return Ok((x, true_rel, it));
                }
                r = linalg::sub(&b2, &ax);
            }
            z = self.h.apply_multiplier(&r, &self.prec);
            self.project(&mut z);
            let rz_new = linalg::dot(&r, &z).re;
            let beta = rz_new / rz;
            rz = rz_new;
            for (pi, zi) in p.iter_mut().zip(&z) {
                *pi = zi + beta * *pi;
            }
        }
        Err(NelsonError::NotConverged {
            solver: "projected CG".into(),
            iterations: self.max_iter,
            residual: rel,
        })
    }

    pub fn solve(&self, v: &WaveX) -> Result<ResolventSolve> {
        let (u, residual, iterations) = self.solve_raw(&v.values)?;
        Ok(ResolventSolve {
            solution: WaveX {
                grid: v.grid,
                values: u,
            },
            residual,
            iterations,
        })
    }
}

/// `R_φ v` for the ground state bundle of `φ`.
pub fn apply_reduced_resolvent(
    sg: &SpectralGrid,
    phi: &FieldK,
    bundle: &GroundStateBundle,
    v: &WaveX,
    tol: &Tolerances,
) -> Result<ResolventSolve> {
    sg.spec().ensure_same(&v.grid)?;
    let pot = potential_values(sg, phi)?;
    ReducedResolvent::for_bundle(sg, Cow::Owned(pot), bundle, tol)?.solve(v)
}

/// `R v` for an explicit potential (oracle hooks).
pub fn apply_reduced_resolvent_for_potential(
    sg: &SpectralGrid,
    potential: &[f64],
    bundle: &GroundStateBundle,
    v: &WaveX,
    tol: &Tolerances,
) -> Result<ResolventSolve> {
    ReducedResolvent::for_bundle(sg, Cow::Borrowed(potential), bundle, tol)?.solve(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::schrodinger::{ground_state_for_potential, WarmStart};

    #[test]
    fn oscillator_excited_state_is_halved() {
        let sg = SpectralGrid::new(GridSpec::new(12.0, 32).unwrap()).unwrap();
        let g = *sg.spec();
        let v: Vec<f64> = (0..g.len())
            .map(|i| {
                let x = g.position(i);
                x[0] * x[0] + x[1] * x[1] + x[2] * x[2]
            })
            .collect();
        let tol = Tolerances::default();
        let b = ground_state_for_potential(&sg, &v, WarmStart::Cold, &tol).unwrap();
        let ex = &b.excited[0];
        let u = apply_reduced_resolvent_for_potential(&sg, &v, &b, ex, &tol).unwrap();
        let mut half = ex.clone();
        half.scale(C::new(0.5, 0.0));
        assert!(u.solution.sub(&half).norm_l2() < 1e-6);
        let z = apply_reduced_resolvent_for_potential(&sg, &v, &b, &b.psi, &tol).unwrap();
        assert!(z.solution.norm_l2() < 1e-10);
    }
}
