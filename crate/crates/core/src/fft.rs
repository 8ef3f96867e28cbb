//! Unnormalized 3D FFT on an `N³` cube stored row-major with the last index fastest.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub struct Fft3 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Fft3 {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft3 {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn points(&self) -> usize {
        self.n
    }

    /// `X[k] = Σ_x e^{-2πi k·x/N} x[x]`.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(data, &*self.forward);
    }

    /// `x[x] = Σ_k e^{+2πi k·x/N} X[k]`, without the `1/N³` factor.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, &*self.inverse);
    }

    fn run(&self, data: &mut [Complex64], plan: &dyn Fft<f64>) {
        let n = self.n;
        assert_eq!(data.len(), n * n * n, "fft buffer has wrong length");
        let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];

        // z: contiguous lines
        plan.process_with_scratch(data, &mut scratch);

        // y: stride n inside each x-plane, batched over the plane
        let mut plane = vec![Complex64::default(); n * n];
        for i in 0..n {
            let base = i * n * n;
            for j in 0..n {
                for l in 0..n {
                    plane[l * n + j] = data[base + j * n + l];
                }
            }
            plan.process_with_scratch(&mut plane, &mut scratch);
            for j in 0..n {
                for l in 0..n {
                    data[base + j * n + l] = plane[l * n + j];
                }
            }
        }

        // x: stride n², batched over one y-row at a time
        let mut block = vec![Complex64::default(); n * n];
        for j in 0..n {
            for i in 0..n {
                let src = (i * n + j) * n;
                for l in 0..n {
                    block[l * n + i] = data[src + l];
                }
            }
            plan.process_with_scratch(&mut block, &mut scratch);
            for i in 0..n {
                let dst = (i * n + j) * n;
                for l in 0..n {
                    data[dst + l] = block[l * n + i];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn naive_dft(input: &[Complex64], n: usize, sign: f64) -> Vec<Complex64> {
        let mut out = vec![Complex64::default(); n * n * n];
        for k1 in 0..n {
            for k2 in 0..n {
                for k3 in 0..n {
                    let mut acc = Complex64::default();
                    for x1 in 0..n {
                        for x2 in 0..n {
                            for x3 in 0..n {
                                let arg = sign * 2.0 * PI * ((k1 * x1 + k2 * x2 + k3 * x3) as f64)
                                    / n as f64;
                                acc += input[(x1 * n + x2) * n + x3] * Complex64::from_polar(1.0, arg);
                            }
                        }
                    }
                    out[(k1 * n + k2) * n + k3] = acc;
                }
            }
        }
        out
    }

    #[test]
    fn matches_naive_dft() {
        let n = 6;
        let input: Vec<Complex64> = (0..n * n * n)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let fft = Fft3::new(n);
        let mut a = input.clone();
        fft.forward(&mut a);
        let b = naive_dft(&input, n, -1.0);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).norm() < 1e-10);
        }
        let mut c = input.clone();
        fft.inverse(&mut c);
        let d = naive_dft(&input, n, 1.0);
        for (x, y) in c.iter().zip(&d) {
            assert!((x - y).norm() < 1e-10);
        }
    }

    #[test]
    fn round_trip() {
        let n = 8;
        let input: Vec<Complex64> = (0..n * n * n)
            .map(|i| Complex64::new((i as f64).sqrt(), -(i as f64 * 0.3).sin()))
            .collect();
        let fft = Fft3::new(n);
        let mut a = input.clone();
        fft.forward(&mut a);
        fft.inverse(&mut a);
        let scale = 1.0 / (n * n * n) as f64;
        for (x, y) in a.iter().zip(&input) {
            assert!((x * scale - y).norm() < 1e-12);
        }
    }
}
