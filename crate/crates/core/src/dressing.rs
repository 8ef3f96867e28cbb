//! Ultraviolet cutoffs and the dressing kernels `G_K`, `B_{K,Λ}`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{NelsonError, Result};
use crate::grid::{GridSpec, SpectralGrid};
use crate::quadrature;

/// Infrared/ultraviolet split `K ≤ Λ`; `Λ = ∞` is encoded as `f64::INFINITY`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffPair {
    pub k: f64,
    pub lambda: f64,
}

impl CutoffPair {
    pub fn new(k: f64, lambda: f64) -> Result<Self> {
        if !(k >= 2.0) || !k.is_finite() {
            return Err(NelsonError::Domain(format!("K must be finite and >= 2, got {k}")));
        }
        if !(lambda >= k) {
            return Err(NelsonError::Domain(format!("need K <= Λ, got K={k} Λ={lambda}")));
        }
        Ok(CutoffPair { k, lambda })
    }

    /// Lattice kernels need `Λ` inside the Nyquist ball.
    pub fn check_grid(&self, grid: &GridSpec) -> Result<()> {
        let kmax = grid.k_nyquist();
        if self.lambda > kmax {
            return Err(NelsonError::Domain(format!(
                "Λ = {} exceeds the grid Nyquist radius {kmax}",
                self.lambda
            )));
        }
        Ok(())
    }
}

/// `G_K(k) = ω(k)^{-1/2} 1_{|k| ≤ K}` and `B_{K,Λ}(k) = |k|^{-5/2} 1_{K < |k| ≤ Λ}` on the lattice.
#[derive(Debug, Clone)]
pub struct DressingKernels {
    pub cutoffs: CutoffPair,
    pub g: Vec<f64>,
    pub b: Vec<f64>,
}

/// `ω^{-1/2}` restricted to the closed ball `|k| ≤ radius`.
pub fn g_cutoff(sg: &SpectralGrid, radius: f64) -> Vec<f64> {
    let r2 = radius * radius;
    sg.k2()
        .iter()
        .zip(sg.omega())
        .map(|(k2, w)| if *k2 <= r2 { w.powf(-0.5) } else { 0.0 })
        .collect()
}

/// `|k|^{-5/2}` on the half-open shell `K < |k| ≤ Λ`.
pub fn b_shell(sg: &SpectralGrid, c: CutoffPair) -> Vec<f64> {
    let (lo, hi) = (c.k * c.k, c.lambda * c.lambda);
    sg.k2()
        .iter()
        .map(|&k2| {
            if k2 > lo && k2 <= hi {
                k2.powf(-1.25)
            } else {
                0.0
            }
        })
        .collect()
}

pub fn dressing_kernels(sg: &SpectralGrid, c: CutoffPair) -> Result<DressingKernels> {
    c.check_grid(sg.spec())?;
    Ok(DressingKernels {
        cutoffs: c,
        g: g_cutoff(sg, c.k),
        b: b_shell(sg, c),
    })
}

/// Continuum values of the scalar dressing terms.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DressingScalars {
    /// `‖k B_{K,Λ}‖²_{L²}`
    pub kb_norm_sq: f64,
    /// `2 Re⟨G_Λ, B_{K,Λ}⟩`
    pub cross: f64,
    /// `‖k B_{K,Λ}‖² − 2 Re⟨G_Λ, B_{K,Λ}⟩`
    pub combination: f64,
    /// `4π (ln K − ln Λ)`
    pub reference: f64,
}

pub fn dressing_scalar_identity(c: CutoffPair) -> Result<DressingScalars> {
    if !(c.k < c.lambda) || !c.lambda.is_finite() {
        return Err(NelsonError::Domain(format!(
            "scalar identity needs K < Λ < ∞, got K={} Λ={}",
            c.k, c.lambda
        )));
    }
    let b = |r: f64| r.powf(-2.5);
    let kb_norm_sq = quadrature::radial_shell(|r| r * r * b(r) * b(r), c.k, c.lambda);
    let cross = 2.0 * quadrature::radial_shell(|r| r.powf(-0.5) * b(r), c.k, c.lambda);
    Ok(DressingScalars {
        kb_norm_sq,
        cross,
        combination: kb_norm_sq - cross,
        reference: 4.0 * PI * (c.k.ln() - c.lambda.ln()),
    })
}
