//! Python bindings: grids, fields, ground states, Pekar minimizers, aKG trajectories and the
//! experiment drivers.

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use nelson_core::akg::{akg_init, run_akg, AkgOptions};
use nelson_core::config::{RunConfig, Tolerances};
use nelson_core::dressing::{dressing_scalar_identity, CutoffPair};
use nelson_core::experiments;
use nelson_core::pekar::{gaussian_seed, pekar_minimize, slaved_field, PekarOptions};
use nelson_core::schrodinger::{ground_state, WarmStart};
use nelson_core::{fgrid, FieldK, GridSpec, NelsonError, SpectralGrid, WaveX};

fn err(e: NelsonError) -> PyErr {
    match e {
        NelsonError::Config(_) | NelsonError::GridMismatch { .. } | NelsonError::Domain(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Periodic cube `[-L/2, L/2)³` with `N` points per axis.
#[pyclass(name = "Grid", module = "nelson")]
#[derive(Clone)]
struct PyGrid {
    spec: GridSpec,
}

impl PyGrid {
    fn spectral(&self) -> PyResult<SpectralGrid> {
        SpectralGrid::new(self.spec).map_err(err)
    }
}

#[pymethods]
impl PyGrid {
    #[new]
    fn new(length: f64, points: usize) -> PyResult<Self> {
        Ok(PyGrid {
            spec: GridSpec::new(length, points).map_err(err)?,
        })
    }

    #[getter]
    fn length(&self) -> f64 {
        self.spec.length
    }

    #[getter]
    fn points(&self) -> usize {
        self.spec.points
    }

    #[getter]
    fn dx(&self) -> f64 {
        self.spec.dx()
    }

    #[getter]
    fn dk(&self) -> f64 {
        self.spec.dk()
    }

    fn __len__(&self) -> usize {
        self.spec.len()
    }

    fn __repr__(&self) -> String {
        format!("Grid(length={}, points={})", self.spec.length, self.spec.points)
    }
}

/// Particle wave function sampled in position space.
#[pyclass(name = "Wave", module = "nelson")]
#[derive(Clone)]
struct PyWave {
    inner: WaveX,
}

#[pymethods]
impl PyWave {
    #[new]
    fn new(grid: &PyGrid, values: Vec<Complex64>) -> PyResult<Self> {
        Ok(PyWave {
            inner: WaveX::from_values(grid.spec, values).map_err(err)?,
        })
    }

    /// Normalized Gaussian of width `width` centred at `center`.
    #[staticmethod]
    #[pyo3(signature = (grid, width, center = [0.0, 0.0, 0.0]))]
    fn gaussian(grid: &PyGrid, width: f64, center: [f64; 3]) -> PyResult<Self> {
        Ok(PyWave {
            inner: gaussian_seed(&grid.spectral()?, width, center).map_err(err)?,
        })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(PyWave {
            inner: fgrid::load_wave(path).map_err(err)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        fgrid::save_wave(path, &self.inner).map_err(err)
    }

    #[getter]
    fn grid(&self) -> PyGrid {
        PyGrid { spec: self.inner.grid }
    }

    fn values(&self) -> Vec<Complex64> {
        self.inner.values.clone()
    }

    fn density(&self) -> Vec<f64> {
        self.inner.density()
    }

    fn norm(&self) -> f64 {
        self.inner.norm_l2()
    }

    fn inner(&self, other: &PyWave) -> Complex64 {
        self.inner.inner(&other.inner)
    }
}

/// Field amplitude on the momentum lattice.
#[pyclass(name = "Field", module = "nelson")]
#[derive(Clone)]
struct PyField {
    inner: FieldK,
}

#[pymethods]
impl PyField {
    #[new]
    fn new(grid: &PyGrid, values: Vec<Complex64>) -> PyResult<Self> {
        Ok(PyField {
            inner: FieldK::from_values(grid.spec, values).map_err(err)?,
        })
    }

    #[staticmethod]
    fn zeros(grid: &PyGrid) -> Self {
        PyField {
            inner: FieldK::zeros(grid.spec),
        }
    }

    /// The field `−ω^{-1}σ(ψ)` in equilibrium with `psi`.
    #[staticmethod]
    fn slaved(psi: &PyWave) -> PyResult<Self> {
        let sg = SpectralGrid::new(psi.inner.grid).map_err(err)?;
        Ok(PyField {
            inner: slaved_field(&sg, &psi.inner).map_err(err)?,
        })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(PyField {
            inner: fgrid::load_field(path).map_err(err)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        fgrid::save_field(path, &self.inner).map_err(err)
    }

    #[getter]
    fn grid(&self) -> PyGrid {
        PyGrid { spec: self.inner.grid }
    }

    fn values(&self) -> Vec<Complex64> {
        self.inner.values.clone()
    }

    fn norm(&self) -> f64 {
        self.inner.norm_l2()
    }

    /// `‖ω^s φ‖`.
    fn weighted_norm(&self, s: f64) -> PyResult<f64> {
        let sg = SpectralGrid::new(self.inner.grid).map_err(err)?;
        Ok(self.inner.weighted_norm(&sg, s))
    }

    fn __add__(&self, other: &PyField) -> PyField {
        PyField {
            inner: self.inner.add(&other.inner),
        }
    }

    fn __sub__(&self, other: &PyField) -> PyField {
        PyField {
            inner: self.inner.sub(&other.inner),
        }
    }
}

fn tolerances(cfg: Option<&str>) -> PyResult<Tolerances> {
    Ok(match cfg {
        Some(text) => RunConfig::from_toml(text).map_err(err)?.tolerances,
        None => Tolerances::default(),
    })
}

/// Lowest eigenpair of `−Δ + V_φ`: returns `(e, lambda1, gap, psi)`.
#[pyfunction]
#[pyo3(signature = (phi, config = None))]
fn ground_state_of(phi: &PyField, config: Option<&str>) -> PyResult<(f64, f64, f64, PyWave)> {
    let sg = SpectralGrid::new(phi.inner.grid).map_err(err)?;
    let b = ground_state(&sg, &phi.inner, WarmStart::Cold, &tolerances(config)?).map_err(err)?;
    Ok((b.e, b.lambda1, b.gap, PyWave { inner: b.psi }))
}

/// Pekar minimizer on `grid`: a dict with `e_star`, `e_pekar`, `e`, `gap`, `iterations`,
/// `psi` and `phi`.
#[pyfunction]
#[pyo3(signature = (grid, config = None))]
fn pekar<'py>(py: Python<'py>, grid: &PyGrid, config: Option<&str>) -> PyResult<Bound<'py, PyDict>> {
    let sg = grid.spectral()?;
    let (opts, tol) = match config {
        Some(text) => {
            let c = RunConfig::from_toml(text).map_err(err)?;
            (c.pekar, c.tolerances)
        }
        None => (PekarOptions::default(), Tolerances::default()),
    };
    let p = pekar_minimize(&sg, None, &opts, &tol).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("e_star", p.e_star)?;
    d.set_item("e_pekar", p.e_pekar)?;
    d.set_item("e", p.bundle.e)?;
    d.set_item("gap", p.bundle.gap)?;
    d.set_item("iterations", p.iterations)?;
    d.set_item("fixed_point_residual", p.fixed_point_residual)?;
    d.set_item("psi", PyWave { inner: p.psi_star })?;
    d.set_item("phi", PyField { inner: p.phi_star })?;
    Ok(d)
}

/// aKG trajectory from `phi`: returns `(header, rows, final_field)`.
#[pyfunction]
#[pyo3(signature = (phi, t_end, dt, output_every = 1, config = None))]
fn akg_trajectory(
    phi: &PyField,
    t_end: f64,
    dt: f64,
    output_every: usize,
    config: Option<&str>,
) -> PyResult<(String, Vec<Vec<f64>>, PyField)> {
    let sg = SpectralGrid::new(phi.inner.grid).map_err(err)?;
    let tol = tolerances(config)?;
    let opts = AkgOptions {
        dt_max: dt.max(AkgOptions::default().dt_max),
        ..Default::default()
    };
    let start = akg_init(&sg, &phi.inner, &tol).map_err(err)?;
    let run = run_akg(&sg, start, t_end, dt, output_every, false, &opts, &tol).map_err(err)?;
    let rows = run
        .record
        .rows
        .iter()
        .map(|r| vec![r.t, r.phi_l2, r.phi_h_half, r.e, r.lambda1, r.gap, r.e_field, r.mu])
        .collect();
    Ok((
        nelson_core::akg::TrajectoryRecord::HEADER.to_string(),
        rows,
        PyField {
            inner: run.final_state.phi,
        },
    ))
}

/// `(‖kB‖², 2Re⟨G_Λ, B⟩, combination, 4π ln(K/Λ))` for the continuum cutoff pair.
#[pyfunction]
fn dressing_scalars(k: f64, lambda: f64) -> PyResult<(f64, f64, f64, f64)> {
    let s = dressing_scalar_identity(CutoffPair::new(k, lambda).map_err(err)?).map_err(err)?;
    Ok((s.kb_norm_sq, s.cross, s.combination, s.reference))
}

/// Default configuration as TOML text.
#[pyfunction]
fn default_config() -> String {
    RunConfig::default().to_toml()
}

/// Runs an experiment command; returns a dict with `passed`, `assertions`, `metrics`,
/// `tables` and `gap_collapse`.
#[pyfunction]
#[pyo3(signature = (command, config = None))]
fn run_experiment<'py>(py: Python<'py>, command: &str, config: Option<&str>) -> PyResult<Bound<'py, PyDict>> {
    let cfg = match config {
        Some(text) => RunConfig::from_toml(text).map_err(err)?,
        None => RunConfig::default(),
    };
    let out = py.allow_threads(|| experiments::run_command(command, &cfg)).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("passed", out.passed())?;
    let asserts = out
        .assertions
        .iter()
        .map(|a| {
            let x = PyDict::new(py);
            x.set_item("name", &a.name)?;
            x.set_item("value", a.value)?;
            x.set_item("bound", a.bound)?;
            x.set_item("pass", a.pass)?;
            Ok(x)
        })
        .collect::<PyResult<Vec<_>>>()?;
    d.set_item("assertions", asserts)?;
    d.set_item("metrics", out.metrics.clone())?;
    let tables = PyDict::new(py);
    for t in &out.tables {
        tables.set_item(&t.name, (t.header.clone(), t.rows.clone()))?;
    }
    d.set_item("tables", tables)?;
    d.set_item("gap_collapse", out.gap_collapse)?;
    Ok(d)
}

#[pymodule]
fn nelson(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGrid>()?;
    m.add_class::<PyWave>()?;
    m.add_class::<PyField>()?;
    m.add_function(wrap_pyfunction!(ground_state_of, m)?)?;
    m.add_function(wrap_pyfunction!(pekar, m)?)?;
    m.add_function(wrap_pyfunction!(akg_trajectory, m)?)?;
    m.add_function(wrap_pyfunction!(dressing_scalars, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add("COMMANDS", experiments::COMMANDS.to_vec())?;
    Ok(())
}
