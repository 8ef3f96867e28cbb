//! Lanczos approximation of `e^{-iτH} v` for Hermitian `H` given as a matrix-free operator.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{NelsonError, Result};
use crate::linalg::{axpy, dot, norm, C};

/// Result of [`expm_krylov`].
#[derive(Debug, Clone)]
pub struct KrylovExp {
    pub value: Vec<C>,
    /// Operator applications spent, summed over substeps.
    pub applications: usize,
    pub substeps: usize,
}

/// `e^{-iτH} v` with a posteriori error below `tol·‖v‖`.
///
/// The Krylov basis is reorthogonalized in full, so the result has the norm of `v` up to
/// rounding whether or not the error estimate was met. Steps that do not reach `tol` within
/// `max_dim` vectors are halved.
pub fn expm_krylov<F>(apply: F, v: &[C], tau: f64, tol: f64, max_dim: usize) -> Result<KrylovExp>
where
    F: Fn(&[C]) -> Vec<C>,
{
    let mut out = KrylovExp {
        value: v.to_vec(),
        applications: 0,
        substeps: 0,
    };
    let mut pending = vec![tau];
    let mut depth_guard = 0;
    while let Some(t) = pending.pop() {
        match lanczos_step(&apply, &out.value, t, tol, max_dim) {
            Some((value, apps)) => {
                out.value = value;
                out.applications += apps;
                out.substeps += 1;
            }
            None => {
                depth_guard += 1;
                if depth_guard > 64 {
                    return Err(NelsonError::NotConverged {
                        solver: "krylov exponential".into(),
                        iterations: max_dim,
                        residual: f64::NAN,
                    });
                }
                out.applications += max_dim;
                pending.push(0.5 * t);
                pending.push(0.5 * t);
            }
        }
    }
    Ok(out)
}

fn lanczos_step<F>(apply: &F, v: &[C], tau: f64, tol: f64, max_dim: usize) -> Option<(Vec<C>, usize)>
where
    F: Fn(&[C]) -> Vec<C>,
{
    let beta0 = norm(v);
    if beta0 == 0.0 || tau == 0.0 {
        return Some((v.to_vec(), 0));
    }
    let mut basis: Vec<Vec<C>> = vec![v.iter().map(|z| z / beta0).collect()];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    for j in 0..max_dim {
        let mut w = apply(&basis[j]);
        let a = dot(&basis[j], &w).re;
        alpha.push(a);
        for q in &basis {
            let c = dot(q, &w);
            axpy(&mut w, -c, q);
        }
        for q in &basis {
            let c = dot(q, &w);
            axpy(&mut w, -c, q);
        }
        let b = norm(&w);
        let m = j + 1;
        let y = small_exp(&alpha, &beta, tau);
        let breakdown = b <= 1e-14 * alpha.iter().fold(1.0f64, |s, x| s.max(x.abs()));
        let estimate = b * y[m - 1].norm();
        if breakdown || estimate <= tol {
            let mut value = vec![C::default(); v.len()];
            for (q, c) in basis.iter().zip(&y) {
                axpy(&mut value, c * beta0, q);
            }
            return Some((value, m));
        }
        beta.push(b);
        basis.push(w.iter().map(|z| z / b).collect());
    }
    None
}

/// `exp(−iτT) e₁` for the tridiagonal `T` with diagonal `alpha` and off-diagonal `beta`.
fn small_exp(alpha: &[f64], beta: &[f64], tau: f64) -> Vec<C> {
    let m = alpha.len();
    let mut t = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    (0..m)
        .map(|i| {
            (0..m)
                .map(|l| {
                    let q = eig.eigenvectors[(i, l)] * eig.eigenvectors[(0, l)];
                    Complex64::from_polar(q, -tau * eig.eigenvalues[l])
                })
                .sum()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_operator_matches_exact_phases() {
        let d: Vec<f64> = (0..60).map(|i| (i as f64 * 0.37).sin() * 40.0).collect();
        let v: Vec<C> = (0..60).map(|i| C::new(1.0 / (1.0 + i as f64), 0.1 * i as f64)).collect();
        let apply = |x: &[C]| x.iter().zip(&d).map(|(z, a)| z * a).collect::<Vec<_>>();
        let tau = 0.3;
        let r = expm_krylov(apply, &v, tau, 1e-13, 30).unwrap();
        for ((z, a), x) in r.value.iter().zip(&d).zip(&v) {
            let exact = x * Complex64::from_polar(1.0, -tau * a);
            assert!((z - exact).norm() < 1e-11);
        }
        assert!((norm(&r.value) - norm(&v)).abs() < 1e-13);
    }

    #[test]
    fn invariant_subspace_terminates_early() {
        let v = vec![C::new(1.0, 0.0), C::default(), C::default()];
        let apply = |x: &[C]| vec![x[0] * 2.0, x[1], x[2] * 3.0];
        let r = expm_krylov(apply, &v, 1.0, 1e-14, 10).unwrap();
        assert_eq!(r.applications, 1);
        assert!((r.value[0] - Complex64::from_polar(1.0, -2.0)).norm() < 1e-14);
    }
}
