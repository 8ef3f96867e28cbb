//! Fixed quadrature rules: Gauss–Legendre, a 26-point sphere rule, and a few radial helpers.

use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss–Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let h = 0.5 * (b - a);
    let m = 0.5 * (b + a);
    (
        x.iter().map(|t| m + h * t).collect(),
        w.iter().map(|v| v * h).collect(),
    )
}

/// Composite Gauss–Legendre integral of `f` over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize, order: usize) -> f64 {
    let (x, w) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * h;
        let mid = lo + 0.5 * h;
        for (t, v) in x.iter().zip(&w) {
            total += v * 0.5 * h * f(mid + 0.5 * h * t);
        }
    }
    total
}

/// Integral of a radial function over the shell `a ≤ |k| ≤ b` in 3D, `4π ∫ r² f(r) dr`,
/// computed in the variable `ln r` (suited to power-law integrands).
pub fn radial_shell<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    assert!(a > 0.0 && b >= a);
    if b == a {
        return 0.0;
    }
    let panels = (((b / a).ln() / 0.25).ceil() as usize).max(4);
    4.0 * PI
        * integrate(
            |s| {
                let r = s.exp();
                r * r * r * f(r)
            },
            a.ln(),
            b.ln(),
            panels,
            16,
        )
}

/// Integral of a radial function over all of ℝ³, `4π ∫_0^rmax r² f(r) dr`.
pub fn radial_ball<F: Fn(f64) -> f64>(f: F, rmax: f64) -> f64 {
    4.0 * PI * integrate(|r| r * r * f(r), 0.0, rmax, 200, 16)
}

/// `∫_{[-1/2,1/2]³} |u|^{-1} du`.
///
/// Splits the cube into six pyramids with apex at the origin; the radial integral in each
/// pyramid is elementary and leaves `3 ∫_0^1∫_0^1 (1 + a² + b²)^{-1/2} da db`.
pub fn unit_cube_inverse_radius() -> f64 {
    let (x, w) = gauss_legendre_on(40, 0.0, 1.0);
    let mut s = 0.0;
    for (a, wa) in x.iter().zip(&w) {
        for (b, wb) in x.iter().zip(&w) {
            s += wa * wb / (1.0 + a * a + b * b).sqrt();
        }
    }
    3.0 * s
}

/// Symmetrized 26-direction sphere rule (6 faces, 12 edges, 8 corners of the cube).
///
/// Weights sum to `4π` and integrate spherical harmonics exactly up to degree 7.
pub fn sphere_26() -> Vec<([f64; 3], f64)> {
    let mut out = Vec::with_capacity(26);
    let face = 4.0 * PI / 21.0;
    let edge = 4.0 * PI * 4.0 / 105.0;
    let corner = 4.0 * PI * 9.0 / 280.0;
    for a in 0..3 {
        for s in [-1.0, 1.0] {
            let mut d = [0.0; 3];
            d[a] = s;
            out.push((d, face));
        }
    }
    let r2 = 1.0 / 2f64.sqrt();
    for (a, b) in [(0, 1), (0, 2), (1, 2)] {
        for sa in [-1.0, 1.0] {
            for sb in [-1.0, 1.0] {
                let mut d = [0.0; 3];
                d[a] = sa * r2;
                d[b] = sb * r2;
                out.push((d, edge));
            }
        }
    }
    let r3 = 1.0 / 3f64.sqrt();
    for sx in [-1.0, 1.0] {
        for sy in [-1.0, 1.0] {
            for sz in [-1.0, 1.0] {
                out.push(([sx * r3, sy * r3, sz * r3], corner));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        let (x, w) = gauss_legendre(7);
        for p in 0..14 {
            let q: f64 = x.iter().zip(&w).map(|(t, v)| v * t.powi(p)).sum();
            let exact = if p % 2 == 1 { 0.0 } else { 2.0 / (p as f64 + 1.0) };
            assert!((q - exact).abs() < 1e-14, "degree {p}: {q} vs {exact}");
        }
    }

    #[test]
    fn sphere_rule_moments() {
        let rule = sphere_26();
        let total: f64 = rule.iter().map(|(_, w)| w).sum();
        assert!((total - 4.0 * PI).abs() < 1e-13);
        let x2: f64 = rule.iter().map(|(d, w)| w * d[0] * d[0]).sum();
        assert!((x2 - 4.0 * PI / 3.0).abs() < 1e-13);
        let x4: f64 = rule.iter().map(|(d, w)| w * d[0].powi(4)).sum();
        assert!((x4 - 4.0 * PI / 5.0).abs() < 1e-13);
        let x2y2: f64 = rule.iter().map(|(d, w)| w * d[0].powi(2) * d[1].powi(2)).sum();
        assert!((x2y2 - 4.0 * PI / 15.0).abs() < 1e-13);
        let x6: f64 = rule.iter().map(|(d, w)| w * d[0].powi(6)).sum();
        assert!((x6 - 4.0 * PI / 7.0).abs() < 1e-13);
    }

    #[test]
    fn cube_inverse_radius_against_brute_force() {
        // midpoint sum on a staggered lattice avoids the origin
        let m = 120;
        let h = 1.0 / m as f64;
        let mut s = 0.0;
        for i in 0..m {
            for j in 0..m {
                for l in 0..m {
                    let u = [
                        (i as f64 + 0.5) * h - 0.5,
                        (j as f64 + 0.5) * h - 0.5,
                        (l as f64 + 0.5) * h - 0.5,
                    ];
                    s += h * h * h / (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
                }
            }
        }
        let c = unit_cube_inverse_radius();
        assert!((c - s).abs() < 2e-3, "{c} vs {s}");
        assert!((c - 2.3800773).abs() < 1e-6, "{c}");
    }

    #[test]
    fn radial_shell_power_law() {
        let v = radial_shell(|r| r.powi(-3), 2.0, 64.0);
        assert!((v - 4.0 * PI * 32f64.ln()).abs() < 1e-12);
    }
}
