//! Small dense helpers on plain complex vectors (Euclidean inner product).

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type C = Complex64;

pub fn dot(a: &[C], b: &[C]) -> C {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(a: &[C]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn axpy(y: &mut [C], a: C, x: &[C]) {
    for (u, v) in y.iter_mut().zip(x) {
        *u += a * v;
    }
}

pub fn scale(y: &mut [C], a: C) {
    for u in y.iter_mut() {
        *u *= a;
    }
}

pub fn scale_re(y: &mut [C], a: f64) {
    for u in y.iter_mut() {
        *u *= a;
    }
}

pub fn sub(a: &[C], b: &[C]) -> Vec<C> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Removes the component along a unit vector `u`.
pub fn project_out(v: &mut [C], u: &[C]) {
    let c = dot(u, v);
    axpy(v, -c, u);
}

/// Orthonormalizes `v` against the orthonormal set `basis` (two Gram–Schmidt passes).
/// Returns `false` if `v` is numerically inside their span.
pub fn orthonormalize_against(v: &mut [C], basis: &[Vec<C>], drop_tol: f64) -> bool {
    let n0 = norm(v);
    if n0 == 0.0 {
        return false;
    }
    for _ in 0..2 {
        for u in basis {
            project_out(v, u);
        }
    }
    let n1 = norm(v);
    if n1 <= drop_tol * n0 {
        return false;
    }
    scale_re(v, 1.0 / n1);
    true
}

/// Least-squares slope of `y` against `x`; NaN for fewer than two distinct abscissae.
pub fn least_squares_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len()) as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        f64::NAN
    } else {
        sxy / sxx
    }
}

pub fn normalized(a: &[C]) -> Vec<C> {
    let n = norm(a);
    a.iter().map(|z| z / n).collect()
}

fn gemm(m: usize, k: usize, n: usize, a: (&[C], isize, isize), b: &DMatrix<C>) -> DMatrix<C> {
    let mut c = DMatrix::<C>::zeros(m, n);
    if m == 0 || n == 0 {
        return c;
    }
    // SAFETY: `Complex64` is `repr(C)` with layout `[f64; 2]`; the strides address
    // column-major buffers of the stated shapes.
    unsafe {
        matrixmultiply::zgemm(
            matrixmultiply::CGemmOption::Standard,
            matrixmultiply::CGemmOption::Standard,
            m,
            k,
            n,
            [1.0, 0.0],
            a.0.as_ptr() as *const [f64; 2],
            a.1,
            a.2,
            b.as_slice().as_ptr() as *const [f64; 2],
            1,
            b.nrows() as isize,
            [0.0, 0.0],
            c.as_mut_slice().as_mut_ptr() as *mut [f64; 2],
            1,
            m as isize,
        );
    }
    c
}

/// `A B` through a blocked kernel.
pub fn mat_mul(a: &DMatrix<C>, b: &DMatrix<C>) -> DMatrix<C> {
    assert_eq!(a.ncols(), b.nrows(), "inner dimensions");
    gemm(a.nrows(), a.ncols(), b.ncols(), (a.as_slice(), 1, a.nrows() as isize), b)
}

/// `Aᵀ B`.
pub fn tr_mul(a: &DMatrix<C>, b: &DMatrix<C>) -> DMatrix<C> {
    assert_eq!(a.nrows(), b.nrows(), "inner dimensions");
    gemm(a.ncols(), a.nrows(), b.ncols(), (a.as_slice(), a.nrows() as isize, 1), b)
}

/// `A† B`.
pub fn ad_mul(a: &DMatrix<C>, b: &DMatrix<C>) -> DMatrix<C> {
    tr_mul(&a.map(|z| z.conj()), b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(r: usize, c: usize, seed: f64) -> DMatrix<C> {
        DMatrix::from_fn(r, c, |i, j| C::new((seed + i as f64 * 1.3 + j as f64).sin(), (seed * i as f64 - j as f64).cos()))
    }

    #[test]
    fn blocked_products_match_reference() {
        let a = sample(7, 5, 0.4);
        let b = sample(5, 3, 1.1);
        let c = sample(7, 3, 2.0);
        assert!((mat_mul(&a, &b) - &a * &b).norm() < 1e-13);
        assert!((tr_mul(&a, &c) - a.tr_mul(&c)).norm() < 1e-13);
        assert!((ad_mul(&a, &c) - a.ad_mul(&c)).norm() < 1e-13);
    }
}
