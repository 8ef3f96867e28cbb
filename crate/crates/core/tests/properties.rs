//! Randomized invariants of the spectral core, couplings, dressing and frames.

use nalgebra::DMatrix;
use nelson_core::config::Tolerances;
use nelson_core::dressing::{b_shell, g_cutoff, CutoffPair};
use nelson_core::fluctuations::{propagate_bogoliubov, BogoliubovFrame, KernelSource, QuadKernel};
use nelson_core::schrodinger::{potential_values, source_from_wave, Hamiltonian, ReducedResolvent};
use nelson_core::{to_momentum, to_position, FieldK, GridSpec, SpectralGrid, WaveX};
use num_complex::Complex64 as C;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn grid(points: usize) -> SpectralGrid {
    SpectralGrid::new(GridSpec::new(4.0, points).unwrap()).unwrap()
}

fn random_wave(g: GridSpec, seed: u64) -> WaveX {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = WaveX::from_fn(g, |x| {
        let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
        C::new((-r2).exp(), 0.0)
    });
    let mut v = w.values.clone();
    for z in v.iter_mut() {
        *z *= C::new(1.0 + 0.2 * rng.random::<f64>(), 0.2 * rng.random::<f64>());
    }
    WaveX::from_values(g, v).unwrap().normalized().unwrap()
}

fn random_field(sg: &SpectralGrid, seed: u64) -> FieldK {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = *sg.spec();
    let mut f = FieldK::zeros(g);
    for (i, z) in f.values.iter_mut().enumerate() {
        let env = (-sg.k2()[i] / 20.0).exp();
        *z = C::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5) * env;
    }
    f
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn parseval_and_round_trip(seed in any::<u64>()) {
        let sg = grid(8);
        let psi = random_wave(*sg.spec(), seed);
        let hat = to_momentum(&sg, &psi).unwrap();
        let dk = sg.spec().dk();
        let k_norm = hat.values.iter().map(|z| z.norm_sqr()).sum::<f64>() * dk / (2.0 * std::f64::consts::PI).powi(3);
        prop_assert!((k_norm - 1.0).abs() < 1e-12);
        let back = to_position(&sg, &hat).unwrap();
        prop_assert!(back.sub(&psi).norm_l2() < 1e-12);
    }

    #[test]
    fn potential_is_real_linear(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let sg = grid(8);
        let f1 = random_field(&sg, seed);
        let f2 = random_field(&sg, seed ^ 0x5555);
        let mut comb = f1.scaled(C::new(a, 0.0));
        comb.axpy(C::new(b, 0.0), &f2);
        let v = potential_values(&sg, &comb).unwrap();
        let v1 = potential_values(&sg, &f1).unwrap();
        let v2 = potential_values(&sg, &f2).unwrap();
        let scale = v1.iter().chain(&v2).fold(0.0f64, |m, x| m.max(x.abs())) * (a.abs() + b.abs() + 1.0);
        for i in 0..v.len() {
            prop_assert!((v[i] - a * v1[i] - b * v2[i]).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn coupling_is_adjoint_to_the_source(seed in any::<u64>()) {
        let sg = grid(8);
        let psi = random_wave(*sg.spec(), seed);
        let phi = random_field(&sg, seed.wrapping_add(1));
        let v = potential_values(&sg, &phi).unwrap();
        let lhs: f64 = psi.density().iter().zip(&v).map(|(d, p)| d * p).sum::<f64>() * sg.spec().dv();
        let rhs = 2.0 * source_from_wave(&sg, &psi).unwrap().inner(&phi).re;
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (lhs.abs() + rhs.abs() + 1e-300));
    }

    #[test]
    fn lattice_shifts_translate_the_source(seed in any::<u64>(), m in prop::array::uniform3(-3i64..4)) {
        let sg = grid(8);
        let g = *sg.spec();
        let psi = random_wave(g, seed);
        let y = [m[0] as f64 * g.dx(), m[1] as f64 * g.dx(), m[2] as f64 * g.dx()];
        let a = source_from_wave(&sg, &psi.shifted(m)).unwrap();
        let b = source_from_wave(&sg, &psi).unwrap().translated(y);
        prop_assert!(a.sub(&b).norm_l2() <= 1e-12 * b.norm_l2());
    }

    #[test]
    fn free_rotation_keeps_weighted_norms(seed in any::<u64>(), t in -5.0f64..5.0, s in -1.0f64..1.0) {
        let sg = grid(8);
        let phi = random_field(&sg, seed);
        let r = phi.rotated(&sg, t);
        let (a, b) = (phi.weighted_norm(&sg, s), r.weighted_norm(&sg, s));
        prop_assert!((a - b).abs() <= 1e-13 * a);
    }

    #[test]
    fn dressing_partitions_the_cutoff(k in 2.0f64..6.0, extra in 0.0f64..10.0) {
        let sg = grid(16);
        let cut = CutoffPair::new(k, k + extra).unwrap();
        let gk = g_cutoff(&sg, cut.k);
        let gl = g_cutoff(&sg, cut.lambda);
        let bs = b_shell(&sg, cut);
        for i in 0..gk.len() {
            prop_assert!((gk[i] + sg.k2()[i] * bs[i] - gl[i]).abs() <= 1e-14 * (1.0 + gl[i].abs()));
        }
    }

    #[test]
    fn hamiltonian_is_hermitian(seed in any::<u64>()) {
        let sg = grid(8);
        let phi = random_field(&sg, seed);
        let v = potential_values(&sg, &phi).unwrap();
        let h = Hamiltonian::new(&sg, std::borrow::Cow::Borrowed(&v));
        let a = random_wave(*sg.spec(), seed ^ 1);
        let b = random_wave(*sg.spec(), seed ^ 2);
        let ab = nelson_core::linalg::dot(&a.values, &h.apply(&b.values));
        let ba = nelson_core::linalg::dot(&b.values, &h.apply(&a.values)).conj();
        prop_assert!((ab - ba).norm() <= 1e-12 * ab.norm().max(1.0));
    }

    #[test]
    fn frames_stay_symplectic(seed in any::<u64>(), n in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut h = DMatrix::<C>::zeros(n, n);
        let mut b = DMatrix::<C>::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let z = C::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
                let w = C::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
                h[(i, j)] = if i == j { C::new(2.0 + z.re, 0.0) } else { z };
                h[(j, i)] = h[(i, j)].conj();
                b[(i, j)] = 0.5 * w;
                b[(j, i)] = 0.5 * w;
            }
        }
        let k = QuadKernel {
            h,
            b,
            c: 0.0,
            gram: DMatrix::zeros(n, n),
            pair: DMatrix::zeros(n, n),
            max_residual: 0.0,
            solves: 0,
        };
        let run = propagate_bogoliubov(BogoliubovFrame::vacuum(n), &KernelSource::Frozen(k), 1e-2, 1.0).unwrap();
        prop_assert!(run.frame.invariant_defect() <= 1e-11);
    }
}

#[test]
fn reduced_resolvent_is_symmetric() {
    let sg = grid(8);
    let phi = random_field(&sg, 9);
    let tol = Tolerances::default();
    let b = nelson_core::schrodinger::ground_state(&sg, &phi, nelson_core::schrodinger::WarmStart::Cold, &tol).unwrap();
    let v = potential_values(&sg, &phi).unwrap();
    let h = Hamiltonian::new(&sg, std::borrow::Cow::Borrowed(&v));
    let r = ReducedResolvent::new(h, b.e, &b.psi.values, 1e-12, 2000);
    let mut f = random_wave(*sg.spec(), 1).values;
    let mut g = random_wave(*sg.spec(), 2).values;
    nelson_core::linalg::project_out(&mut f, &b.psi.values);
    nelson_core::linalg::project_out(&mut g, &b.psi.values);
    let rf = r.solve_raw(&f).unwrap().0;
    let rg = r.solve_raw(&g).unwrap().0;
    let a = nelson_core::linalg::dot(&g, &rf);
    let c = nelson_core::linalg::dot(&rg, &f);
    assert!((a - c).norm() <= 1e-9 * a.norm(), "{a} vs {c}");
}
