//! Bogoliubov frames `[U; V]` driven by a quadratic kernel through
//! `i d/dt [U; V] = G [U; V]`, `G = [[h, b], [−b̄, −h̄]]`.
//!
//! Steps use the Cayley map of `G` at the step midpoint (the implicit midpoint rule), which
//! keeps `U†U − V†V = 1` and `UᵀV = VᵀU` up to rounding.

use nalgebra::DMatrix;
use serde::Serialize;

use super::{max_abs, QuadKernel};
use crate::error::{NelsonError, Result};
use crate::linalg::{ad_mul, mat_mul, tr_mul, C};

/// Drift above which [`propagate_bogoliubov`] stops.
pub const MAX_INVARIANT_DRIFT: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct BogoliubovFrame {
    pub u: DMatrix<C>,
    pub v: DMatrix<C>,
    pub t: f64,
}

impl BogoliubovFrame {
    pub fn vacuum(n: usize) -> Self {
        BogoliubovFrame {
            u: DMatrix::identity(n, n),
            v: DMatrix::zeros(n, n),
            t: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.u.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.u.nrows() == 0
    }

    /// `max(|U†U − V†V − 1|, |UᵀV − VᵀU|)`.
    pub fn invariant_defect(&self) -> f64 {
        let n = self.len();
        let a = ad_mul(&self.u, &self.u) - ad_mul(&self.v, &self.v) - DMatrix::<C>::identity(n, n);
        let b = tr_mul(&self.u, &self.v);
        max_abs(&a).max(max_abs(&(&b - b.transpose())))
    }

    /// `⟨N⟩ = ‖V‖_F²` for vacuum initial data.
    pub fn number_expectation(&self) -> f64 {
        self.v.iter().map(|z| z.norm_sqr()).sum()
    }
}

/// Time dependence of the generating kernel.
#[derive(Debug, Clone)]
pub enum KernelSource {
    Frozen(QuadKernel),
    /// Piecewise linear interpolation of `h` and `b` between kernels at the given times,
    /// constant outside the node range.
    Interpolated { times: Vec<f64>, kernels: Vec<QuadKernel> },
}

impl KernelSource {
    fn validate(&self, n: usize) -> Result<()> {
        let kernels: Vec<&QuadKernel> = match self {
            KernelSource::Frozen(k) => vec![k],
            KernelSource::Interpolated { times, kernels } => {
                if times.is_empty() || times.len() != kernels.len() {
                    return Err(NelsonError::Config(format!(
                        "{} interpolation times for {} kernels",
                        times.len(),
                        kernels.len()
                    )));
                }
                if times.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(NelsonError::Config("interpolation times must increase".into()));
                }
                kernels.iter().collect()
            }
        };
        if kernels.iter().any(|k| k.h.nrows() != n || k.b.nrows() != n) {
            return Err(NelsonError::Config(format!("kernel size differs from frame size {n}")));
        }
        Ok(())
    }

    /// `G(t)` as a `2n × 2n` matrix.
    pub fn generator(&self, t: f64) -> DMatrix<C> {
        match self {
            KernelSource::Frozen(k) => generator(&k.h, &k.b),
            KernelSource::Interpolated { times, kernels } => {
                let last = times.len() - 1;
                if t <= times[0] || last == 0 {
                    return generator(&kernels[0].h, &kernels[0].b);
                }
                if t >= times[last] {
                    return generator(&kernels[last].h, &kernels[last].b);
                }
                let j = times.partition_point(|&s| s <= t) - 1;
                let w = C::new((t - times[j]) / (times[j + 1] - times[j]), 0.0);
                let (a, c) = (&kernels[j], &kernels[j + 1]);
                let h = &a.h + (&c.h - &a.h) * w;
                let b = &a.b + (&c.b - &a.b) * w;
                generator(&h, &b)
            }
        }
    }
}

fn generator(h: &DMatrix<C>, b: &DMatrix<C>) -> DMatrix<C> {
    let n = h.nrows();
    let mut g = DMatrix::<C>::zeros(2 * n, 2 * n);
    g.view_mut((0, 0), (n, n)).copy_from(h);
    g.view_mut((0, n), (n, n)).copy_from(b);
    g.view_mut((n, 0), (n, n)).copy_from(&(-b.map(|z| z.conj())));
    g.view_mut((n, n), (n, n)).copy_from(&(-h.map(|z| z.conj())));
    g
}

/// `(1 + iτG/2)^{-1} (1 − iτG/2)`.
fn cayley(g: &DMatrix<C>, tau: f64) -> Result<DMatrix<C>> {
    let m = g.nrows();
    let half = C::new(0.0, 0.5 * tau);
    let lhs = DMatrix::<C>::identity(m, m) + g * half;
    let rhs = DMatrix::<C>::identity(m, m) - g * half;
    lhs.lu()
        .solve(&rhs)
        .ok_or_else(|| NelsonError::Domain("singular Cayley system".into()))
}

const MAX_FIXED_POINT: usize = 60;

/// `(1 + iτG/2)^{-1} (1 − iτG/2) s`, by fixed-point iteration when `τ‖G‖/2` is small.
fn cayley_apply(g: &DMatrix<C>, tau: f64, s: &DMatrix<C>) -> Result<DMatrix<C>> {
    let half = C::new(0.0, 0.5 * tau);
    let rate = 0.5 * tau * g.row_iter().map(|r| r.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max);
    if rate >= 0.25 {
        return Ok(mat_mul(&cayley(g, tau)?, s));
    }
    let rhs = s - mat_mul(g, s) * half;
    let mut x = rhs.clone();
    let mut change = f64::INFINITY;
    for _ in 0..MAX_FIXED_POINT {
        let next = &rhs - mat_mul(g, &x) * half;
        change = max_abs(&(&next - &x));
        x = next;
        if change <= f64::EPSILON * max_abs(&x) {
            return Ok(x);
        }
    }
    Err(NelsonError::NotConverged {
        solver: "Cayley fixed-point".into(),
        iterations: MAX_FIXED_POINT,
        residual: change,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct FrameRow {
    pub t: f64,
    pub n_expect: f64,
    pub inv_drift: f64,
}

impl FrameRow {
    pub const HEADER: &'static str = "t,N_expect,inv_drift";
}

#[derive(Debug, Clone)]
pub struct FrameRun {
    pub rows: Vec<FrameRow>,
    pub frame: BogoliubovFrame,
}

/// Propagates `frame` to `t_end` with steps of at most `dt`, recording every step.
pub fn propagate_bogoliubov(
    frame: BogoliubovFrame,
    source: &KernelSource,
    dt: f64,
    t_end: f64,
) -> Result<FrameRun> {
    let n = frame.len();
    source.validate(n)?;
    if !(dt > 0.0) || !(t_end >= frame.t) {
        return Err(NelsonError::Config(format!(
            "need dt > 0 and t_end ≥ t, got dt = {dt}, t_end = {t_end}, t = {}",
            frame.t
        )));
    }
    let steps = ((t_end - frame.t) / dt - 1e-9).ceil().max(0.0) as usize;
    let tau = if steps == 0 { 0.0 } else { (t_end - frame.t) / steps as f64 };
    let t0 = frame.t;
    let base = frame.invariant_defect();
    let mut s = DMatrix::<C>::zeros(2 * n, n);
    s.view_mut((0, 0), (n, n)).copy_from(&frame.u);
    s.view_mut((n, 0), (n, n)).copy_from(&frame.v);
    let frozen = match source {
        KernelSource::Frozen(_) => Some(cayley(&source.generator(t0), tau)?),
        _ => None,
    };
    let mut out = BogoliubovFrame { t: t0, ..frame };
    let mut rows = vec![FrameRow {
        t: t0,
        n_expect: out.number_expectation(),
        inv_drift: 0.0,
    }];
    for j in 0..steps {
        s = match &frozen {
            Some(p) => mat_mul(p, &s),
            None => cayley_apply(&source.generator(t0 + (j as f64 + 0.5) * tau), tau, &s)?,
        };
        out.u = s.view((0, 0), (n, n)).into_owned();
        out.v = s.view((n, 0), (n, n)).into_owned();
        out.t = t0 + (j + 1) as f64 * tau;
        let drift = (out.invariant_defect() - base).abs();
        rows.push(FrameRow {
            t: out.t,
            n_expect: out.number_expectation(),
            inv_drift: drift,
        });
        if drift > MAX_INVARIANT_DRIFT {
            return Err(NelsonError::Invariant(format!(
                "Bogoliubov invariant drift {drift:.3e} at t = {:.6}",
                out.t
            )));
        }
    }
    Ok(FrameRun { rows, frame: out })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_kernel(n: usize) -> QuadKernel {
        let mut h = DMatrix::<C>::zeros(n, n);
        let mut b = DMatrix::<C>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let x = (i * 7 + j * 3) as f64;
                let z = C::new(0.3 * (x * 0.37).sin(), 0.2 * (x * 0.11).cos());
                h[(i, j)] += z;
                h[(j, i)] += z.conj();
                b[(i, j)] += 0.5 * z;
                b[(j, i)] += 0.5 * z;
            }
            h[(i, i)] += C::new(2.0 + i as f64, 0.0);
        }
        QuadKernel {
            h,
            b,
            c: 0.0,
            gram: DMatrix::zeros(n, n),
            pair: DMatrix::zeros(n, n),
            max_residual: 0.0,
            solves: 0,
        }
    }

    #[test]
    fn free_kernel_rotates_without_pairing() {
        let mut k = toy_kernel(4);
        k.h = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(4, |i, _| C::new(1.0 + i as f64, 0.0)));
        k.b = DMatrix::zeros(4, 4);
        let run = propagate_bogoliubov(BogoliubovFrame::vacuum(4), &KernelSource::Frozen(k), 1e-3, 1.0).unwrap();
        assert!(run.rows.iter().all(|r| r.n_expect.abs() < 1e-12));
        let f = &run.frame;
        for i in 0..4 {
            let w = 1.0 + i as f64;
            // Cayley phase: 2 arctan(wτ/2) per step
            let phase = -2.0 * (0.5 * w * 1e-3f64).atan() * 1000.0;
            assert!((f.u[(i, i)] - C::from_polar(1.0, phase)).norm() < 1e-12);
            assert!((f.u[(i, i)] - C::from_polar(1.0, -w)).norm() < 1.1 * w.powi(3) * 1e-6 / 12.0);
        }
    }

    #[test]
    fn invariants_hold_and_pairs_are_created() {
        let run = propagate_bogoliubov(BogoliubovFrame::vacuum(6), &KernelSource::Frozen(toy_kernel(6)), 1e-3, 1.0).unwrap();
        let drift = run.rows.iter().map(|r| r.inv_drift).fold(0.0, f64::max);
        assert!(drift < 1e-8, "{drift:e}");
        assert!(run.frame.number_expectation() > 1e-4);
        assert_eq!(run.rows.len(), 1001);
    }

    #[test]
    fn number_expectation_converges_at_second_order() {
        let src = KernelSource::Frozen(toy_kernel(5));
        let n: Vec<f64> = [0.04, 0.02, 0.01]
            .iter()
            .map(|&dt| {
                propagate_bogoliubov(BogoliubovFrame::vacuum(5), &src, dt, 1.0)
                    .unwrap()
                    .frame
                    .number_expectation()
            })
            .collect();
        let order = ((n[0] - n[1]) / (n[1] - n[2])).abs().log2();
        assert!((order - 2.0).abs() < 0.1, "{order}");
    }

    #[test]
    fn propagation_commutes_with_constant_frames() {
        let src = KernelSource::Frozen(toy_kernel(4));
        let vac = propagate_bogoliubov(BogoliubovFrame::vacuum(4), &src, 1e-2, 0.5).unwrap().frame;
        // a constant Bogoliubov matrix from a short flow of another kernel
        let mut other = toy_kernel(4);
        other.b *= C::new(0.0, 1.5);
        let start = propagate_bogoliubov(BogoliubovFrame::vacuum(4), &KernelSource::Frozen(other), 1e-2, 0.3)
            .unwrap()
            .frame;
        let composed = propagate_bogoliubov(BogoliubovFrame { t: 0.0, ..start.clone() }, &src, 1e-2, 0.5)
            .unwrap()
            .frame;
        let conj = |m: &DMatrix<C>| m.map(|z| z.conj());
        let u = &vac.u * &start.u + conj(&vac.v) * &start.v;
        let v = &vac.v * &start.u + conj(&vac.u) * &start.v;
        assert!(max_abs(&(u - &composed.u)) < 1e-12);
        assert!(max_abs(&(v - &composed.v)) < 1e-12);
    }

    #[test]
    fn interpolated_source_reduces_to_frozen() {
        let k = toy_kernel(3);
        let frozen = propagate_bogoliubov(BogoliubovFrame::vacuum(3), &KernelSource::Frozen(k.clone()), 1e-2, 0.4).unwrap();
        let nodes = KernelSource::Interpolated {
            times: vec![0.0, 0.1, 0.2, 0.3, 0.4],
            kernels: vec![k; 5],
        };
        let interp = propagate_bogoliubov(BogoliubovFrame::vacuum(3), &nodes, 1e-2, 0.4).unwrap();
        assert!(max_abs(&(&frozen.frame.v - &interp.frame.v)) < 1e-13);
        let bad = KernelSource::Interpolated {
            times: vec![0.0, 0.0],
            kernels: vec![toy_kernel(3); 2],
        };
        assert!(propagate_bogoliubov(BogoliubovFrame::vacuum(3), &bad, 1e-2, 0.4).is_err());
    }
}
