//! Solver tolerances and the run configuration file.

use serde::{Deserialize, Serialize};

use crate::error::{NelsonError, Result};

/// Convergence thresholds and iteration caps shared by all solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// `‖(h − e)ψ‖_{L²}` bound for ground states.
    pub eig_tol: f64,
    /// Residual bound for the first excited level.
    pub lambda1_tol: f64,
    /// Relative residual for reduced-resolvent solves.
    pub cg_tol: f64,
    pub pekar_tol: f64,
    pub gap_floor: f64,
    /// `e < -e_tol` counts as a bound state.
    pub e_tol: f64,
    pub eig_max_iter: usize,
    pub cg_max_iter: usize,
    pub pekar_max_iter: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            eig_tol: 1e-9,
            lambda1_tol: 1e-7,
            cg_tol: 1e-10,
            pekar_tol: 1e-7,
            gap_floor: 1e-3,
            e_tol: 1e-8,
            eig_max_iter: 2000,
            cg_max_iter: 2000,
            pekar_max_iter: 500,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("eig_tol", self.eig_tol),
            ("lambda1_tol", self.lambda1_tol),
            ("cg_tol", self.cg_tol),
            ("pekar_tol", self.pekar_tol),
            ("gap_floor", self.gap_floor),
            ("e_tol", self.e_tol),
        ];
        for (name, v) in all {
            if !(v > 0.0) || !v.is_finite() {
                return Err(NelsonError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Initial particle state for the dynamics commands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialKind {
    /// Slaved field of a centred Gaussian of standard deviation `width`.
    Gaussian,
    /// Pekar minimizer.
    Pekar,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialSection {
    pub kind: InitialKind,
    pub width: f64,
}

impl Default for InitialSection {
    fn default() -> Self {
        InitialSection {
            kind: InitialKind::Gaussian,
            width: 0.4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Integrators {
    pub dt: f64,
    pub micro_dt_max: f64,
    pub picard_t_max: f64,
    pub picard_dt: f64,
}

impl Default for Integrators {
    fn default() -> Self {
        Integrators {
            dt: 1e-3,
            micro_dt_max: 2e-3,
            picard_t_max: 0.5,
            picard_dt: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EigBenchSection {
    /// `(L, N)` pairs of the Coulomb convergence study; the last one is asserted.
    pub coulomb_grids: Vec<(f64, usize)>,
    pub oscillator_grid: (f64, usize),
}

impl Default for EigBenchSection {
    fn default() -> Self {
        EigBenchSection {
            coulomb_grids: vec![(12.0, 48), (12.0, 64), (16.0, 96), (12.0, 96)],
            oscillator_grid: (12.0, 32),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AkgSection {
    pub t_end: f64,
    pub output_every: usize,
    pub force_free_field: bool,
    pub midpoint_iterations: usize,
    /// Exact-weight correction for the source's linear variation across a step.
    pub linear_correction: bool,
    /// Also run the contraction-map solver over `picard_t_end` and compare.
    pub picard_check: bool,
    pub picard_t_end: f64,
    /// Stepper step used in the cross-check.
    pub picard_stepper_dt: f64,
}

impl Default for AkgSection {
    fn default() -> Self {
        AkgSection {
            t_end: 1.0,
            output_every: 10,
            force_free_field: false,
            midpoint_iterations: 0,
            linear_correction: true,
            picard_check: false,
            picard_t_end: 0.1,
            picard_stepper_dt: 5e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SkgSection {
    pub eps: f64,
    pub s_end: f64,
    pub output_every: usize,
    pub scheme: crate::skg::SkgScheme,
    pub refresh_every: usize,
}

impl Default for SkgSection {
    fn default() -> Self {
        SkgSection {
            eps: 0.3,
            s_end: 0.25,
            output_every: 250,
            scheme: crate::skg::SkgScheme::Krylov,
            refresh_every: 25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareSection {
    pub eps_list: Vec<f64>,
    pub t_end: f64,
}

impl Default for CompareSection {
    fn default() -> Self {
        CompareSection {
            eps_list: vec![0.4, 0.3, 0.2],
            t_end: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CountertermSection {
    pub lambda_list: Vec<f64>,
}

impl Default for CountertermSection {
    fn default() -> Self {
        CountertermSection {
            lambda_list: vec![20.0, 40.0, 80.0, 160.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DressingSection {
    /// `(K, Λ)` pairs.
    pub pairs: Vec<(f64, f64)>,
}

impl Default for DressingSection {
    fn default() -> Self {
        DressingSection {
            pairs: vec![(2.0, 8.0), (4.0, 16.0), (3.0, 50.0)],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelSection {
    pub k: f64,
    pub lambda: f64,
    pub mode_cap: usize,
    /// Lattice spacings `Δk₁` of the refinement study, coarse to fine; the box is `2π/Δk₁`.
    pub dk1_list: Vec<f64>,
    pub points: usize,
    /// Eigen residual for the kernel state; the identity is only as exact as `ψ`.
    pub eig_tol: f64,
}

impl Default for KernelSection {
    fn default() -> Self {
        KernelSection {
            k: 4.0,
            lambda: 8.0,
            mode_cap: 128,
            dk1_list: vec![4.0, 8.0 / 3.0],
            points: 32,
            eig_tol: 1e-11,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FluctSection {
    pub mode_radius: f64,
    pub mode_cap: usize,
    pub t_end: f64,
    pub dt: f64,
    /// Kernel nodes of the refreshed-kernel run; 0 skips it.
    pub refresh_nodes: usize,
    /// aKG step used to reach the refresh nodes.
    pub refresh_akg_dt: f64,
}

impl Default for FluctSection {
    fn default() -> Self {
        FluctSection {
            mode_radius: 4.0,
            mode_cap: 512,
            t_end: 1.0,
            dt: 1e-3,
            refresh_nodes: 5,
            refresh_akg_dt: 2.5e-2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdiabaticSection {
    pub times: Vec<f64>,
    pub h_rate: f64,
    pub h_state: f64,
}

impl Default for AdiabaticSection {
    fn default() -> Self {
        AdiabaticSection {
            times: vec![0.02, 0.04, 0.06, 0.08, 0.1],
            h_rate: 1e-4,
            h_state: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GapSection {
    /// `η / ‖φ_*‖_{𝔥_{1/2}}`.
    pub eta_fraction: f64,
    pub t_end: f64,
    pub dt: f64,
    pub output_every: usize,
    pub probe_samples: usize,
}

impl Default for GapSection {
    fn default() -> Self {
        GapSection {
            eta_fraction: 0.05,
            t_end: 2.0,
            dt: 5e-3,
            output_every: 10,
            probe_samples: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub length: f64,
    pub points: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            length: 4.0,
            points: 32,
        }
    }
}

/// Everything a command needs; every section and key is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub grid: GridSection,
    pub tolerances: Tolerances,
    pub integrators: Integrators,
    pub initial: InitialSection,
    pub pekar: crate::pekar::PekarOptions,
    pub eig_bench: EigBenchSection,
    pub akg: AkgSection,
    pub skg: SkgSection,
    pub compare: CompareSection,
    pub counterterm: CountertermSection,
    pub dressing: DressingSection,
    pub kernel: KernelSection,
    pub fluct: FluctSection,
    pub adiabatic: AdiabaticSection,
    pub gap: GapSection,
    pub seed: u64,
    pub output_dir: std::path::PathBuf,
    /// Worker threads; 0 uses all cores.
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            grid: GridSection::default(),
            tolerances: Tolerances::default(),
            integrators: Integrators::default(),
            initial: InitialSection::default(),
            pekar: Default::default(),
            eig_bench: EigBenchSection::default(),
            akg: AkgSection::default(),
            skg: SkgSection::default(),
            compare: CompareSection::default(),
            counterterm: CountertermSection::default(),
            dressing: DressingSection::default(),
            kernel: KernelSection::default(),
            fluct: FluctSection::default(),
            adiabatic: AdiabaticSection::default(),
            gap: GapSection::default(),
            seed: 7,
            output_dir: "out".into(),
            threads: 0,
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(NelsonError::Config(format!("{name} must be positive, got {v}")))
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| NelsonError::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| NelsonError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn grid_spec(&self) -> Result<crate::grid::GridSpec> {
        crate::grid::GridSpec::new(self.grid.length, self.grid.points)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid_spec()?;
        self.tolerances.validate()?;
        let i = &self.integrators;
        for (n, v) in [
            ("integrators.dt", i.dt),
            ("integrators.micro_dt_max", i.micro_dt_max),
            ("integrators.picard_t_max", i.picard_t_max),
            ("integrators.picard_dt", i.picard_dt),
            ("initial.width", self.initial.width),
            ("akg.t_end", self.akg.t_end),
            ("akg.picard_t_end", self.akg.picard_t_end),
            ("akg.picard_stepper_dt", self.akg.picard_stepper_dt),
            ("skg.s_end", self.skg.s_end),
            ("compare.t_end", self.compare.t_end),
            ("kernel.eig_tol", self.kernel.eig_tol),
            ("fluct.mode_radius", self.fluct.mode_radius),
            ("fluct.t_end", self.fluct.t_end),
            ("fluct.dt", self.fluct.dt),
            ("fluct.refresh_akg_dt", self.fluct.refresh_akg_dt),
            ("adiabatic.h_rate", self.adiabatic.h_rate),
            ("adiabatic.h_state", self.adiabatic.h_state),
            ("gap.eta_fraction", self.gap.eta_fraction),
            ("gap.t_end", self.gap.t_end),
            ("gap.dt", self.gap.dt),
        ] {
            positive(n, v)?;
        }
        let eps = std::iter::once(self.skg.eps).chain(self.compare.eps_list.iter().copied());
        for e in eps {
            if !(e > 0.0 && e <= 1.0) {
                return Err(NelsonError::Config(format!("eps values must lie in (0, 1], got {e}")));
            }
        }
        if self.kernel.k > self.kernel.lambda {
            return Err(NelsonError::Config(format!(
                "kernel.k = {} exceeds kernel.lambda = {}",
                self.kernel.k, self.kernel.lambda
            )));
        }
        for &(k, l) in &self.dressing.pairs {
            if k > l {
                return Err(NelsonError::Config(format!("dressing pair K = {k} exceeds Λ = {l}")));
            }
        }
        if self.kernel.dk1_list.is_empty() || self.counterterm.lambda_list.is_empty() {
            return Err(NelsonError::Config("kernel.dk1_list and counterterm.lambda_list must be non-empty".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
    }

    #[test]
    fn round_trip_and_unknown_keys() {
        let cfg = RunConfig::default();
        assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        assert!(RunConfig::from_toml("[grid]\nlenght = 3.0\n").is_err());
        assert!(RunConfig::from_toml("bogus = 1\n").is_err());
    }

    #[test]
    fn invariants_are_enforced() {
        assert!(RunConfig::from_toml("[grid]\npoints = 31\n").is_err());
        assert!(RunConfig::from_toml("[tolerances]\ncg_tol = 0.0\n").is_err());
        assert!(RunConfig::from_toml("[compare]\neps_list = [0.5, 1.5]\n").is_err());
        assert!(RunConfig::from_toml("[kernel]\nk = 9.0\nlambda = 8.0\n").is_err());
        let cfg = RunConfig::from_toml("seed = 3\n[skg]\neps = 0.25\nscheme = \"strang\"\n").unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.skg.scheme, crate::skg::SkgScheme::Strang);
    }
}
