//! Python bindings: plant, noise and input types, covariance builds, verdicts
//! and transition searches.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use stationary_entanglement::boundary::{find_transition, InputSpec, SweepSpec};
use stationary_entanglement::covariance::{build_covariance, CovarianceMatrix, Engine, TemporalModeBasis};
use stationary_entanglement::entanglement::{ppt_verdict, EntanglementVerdict, PptTolerances};
use stationary_entanglement::output::spectra_table;
use stationary_entanglement::{Error, InputFieldState, NoiseModel, PlantParams};

fn err(e: Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(name = "PlantParams", frozen)]
struct PyPlant(PlantParams);

#[pymethods]
impl PyPlant {
    #[new]
    #[pyo3(signature = (omega_m, gamma_m, omega_q, eta = 1.0))]
    fn new(omega_m: f64, gamma_m: f64, omega_q: f64, eta: f64) -> PyResult<Self> {
        PlantParams::new(omega_m, gamma_m, omega_q, eta).map(PyPlant).map_err(err)
    }

    #[getter]
    fn omega_m(&self) -> f64 {
        self.0.omega_m
    }
    #[getter]
    fn gamma_m(&self) -> f64 {
        self.0.gamma_m
    }
    #[getter]
    fn omega_q(&self) -> f64 {
        self.0.omega_q
    }
    #[getter]
    fn eta(&self) -> f64 {
        self.0.eta
    }

    fn __repr__(&self) -> String {
        let p = &self.0;
        format!(
            "PlantParams(omega_m={}, gamma_m={}, omega_q={}, eta={})",
            p.omega_m, p.gamma_m, p.omega_q, p.eta
        )
    }
}

/// White force and sensing noise with corners `Ω_F`, `Ω_S` (`inf` for no sensing noise).
#[pyclass(name = "NoiseModel", frozen)]
struct PyNoise(NoiseModel);

#[pymethods]
impl PyNoise {
    #[staticmethod]
    #[pyo3(signature = (omega_f, omega_s, omega_m = 1.0))]
    fn white(omega_f: f64, omega_s: f64, omega_m: f64) -> PyResult<Self> {
        NoiseModel::white(omega_f, omega_s, omega_m).map(PyNoise).map_err(err)
    }

    fn with_sensing_scale(&self, beta_s: f64) -> PyResult<Self> {
        self.0.with_sensing_scale(beta_s).map(PyNoise).map_err(err)
    }

    #[getter]
    fn omega_f(&self) -> Option<f64> {
        self.0.omega_f
    }
    #[getter]
    fn omega_s(&self) -> Option<f64> {
        self.0.omega_s
    }
}

#[pyclass(name = "InputFieldState", frozen)]
struct PyInput(InputFieldState);

#[pymethods]
impl PyInput {
    #[staticmethod]
    fn vacuum() -> Self {
        PyInput(InputFieldState::Vacuum)
    }

    #[staticmethod]
    fn fis(r: f64, theta: f64) -> PyResult<Self> {
        InputFieldState::fis(r, theta).map(PyInput).map_err(err)
    }

    #[staticmethod]
    fn fds(r: f64, theta: f64, gamma_f: f64, delta: f64) -> PyResult<Self> {
        InputFieldState::fds(r, theta, gamma_f, delta).map(PyInput).map_err(err)
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.0.kind()
    }
    #[getter]
    fn r(&self) -> f64 {
        self.0.r()
    }
    #[getter]
    fn theta(&self) -> f64 {
        self.0.theta()
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.0)
    }
}

#[pyclass(name = "TemporalModeBasis", frozen)]
struct PyBasis(TemporalModeBasis);

#[pymethods]
impl PyBasis {
    #[new]
    fn new(n: usize, tau: f64) -> PyResult<Self> {
        TemporalModeBasis::new(n, tau).map(PyBasis).map_err(err)
    }

    #[staticmethod]
    fn auto(n: usize, plant: &PyPlant, noise: &PyNoise) -> PyResult<Self> {
        TemporalModeBasis::auto(n, &plant.0, &noise.0).map(PyBasis).map_err(err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n
    }
    #[getter]
    fn tau(&self) -> f64 {
        self.0.tau
    }
}

/// Covariance of `(b₁, b₂, mode 1 amplitude, mode 1 phase, …)`.
#[pyclass(name = "CovarianceMatrix", frozen)]
struct PyCovariance(CovarianceMatrix);

#[pymethods]
impl PyCovariance {
    #[getter]
    fn dim(&self) -> usize {
        self.0.v.nrows()
    }

    /// Rows as nested lists.
    fn to_list(&self) -> Vec<Vec<f64>> {
        let v = &self.0.v;
        (0..v.nrows()).map(|i| v.row(i).iter().copied().collect()).collect()
    }

    fn to_text(&self) -> String {
        self.0.to_text()
    }
}

#[pyclass(name = "EntanglementVerdict", frozen)]
struct PyVerdict(EntanglementVerdict);

#[pymethods]
impl PyVerdict {
    #[getter]
    fn nu_min(&self) -> f64 {
        self.0.nu_min
    }
    #[getter]
    fn log_negativity(&self) -> f64 {
        self.0.log_negativity
    }
    #[getter]
    fn schur_indicator(&self) -> f64 {
        self.0.schur_indicator
    }
    #[getter]
    fn entangled(&self) -> bool {
        self.0.entangled
    }
    #[getter]
    fn indeterminate(&self) -> bool {
        self.0.indeterminate
    }
    #[getter]
    fn status(&self) -> &'static str {
        self.0.status()
    }

    fn __repr__(&self) -> String {
        format!(
            "EntanglementVerdict(nu_min={}, entangled={}, status={})",
            self.0.nu_min,
            self.0.entangled,
            self.0.status()
        )
    }
}

#[pyfunction]
#[pyo3(name = "build_covariance")]
fn py_build_covariance(plant: &PyPlant, noise: &PyNoise, input: &PyInput, basis: &PyBasis) -> PyResult<PyCovariance> {
    build_covariance(&plant.0, &noise.0, &input.0, &basis.0, &Engine::Exact)
        .map(PyCovariance)
        .map_err(err)
}

#[pyfunction]
#[pyo3(name = "ppt_verdict")]
fn py_ppt_verdict(cov: &PyCovariance) -> PyResult<PyVerdict> {
    ppt_verdict(&cov.0, &PptTolerances::default()).map(PyVerdict).map_err(err)
}

/// Transition `Ω_S*` on the sensing-corner ray at fixed `Ω_F`.
///
/// Returns `(value, verified, doubled)`; `doubled` is the 2N value when requested.
#[pyfunction]
#[pyo3(name = "find_transition", signature = (plant, omega_f, input = None, bracket = None, modes = 128, check_doubled = false))]
fn py_find_transition(
    plant: &PyPlant,
    omega_f: f64,
    input: Option<&PyInput>,
    bracket: Option<(f64, f64)>,
    modes: usize,
    check_doubled: bool,
) -> PyResult<(f64, bool, Option<f64>)> {
    let input = InputSpec::Fixed(input.map_or(InputFieldState::Vacuum, |i| i.0));
    let mut spec = SweepSpec::corner_ray(plant.0, input, omega_f);
    if let Some(b) = bracket {
        spec.bracket = b;
    }
    spec.modes = modes;
    spec.check_doubled = check_doubled;
    let b = find_transition(&spec).map_err(err)?;
    Ok((b.value, b.verified, b.doubled))
}

/// SQL-referred `(Ω, force, sensing, quantum vacuum, quantum input)` rows.
#[pyfunction]
#[pyo3(name = "spectra", signature = (plant, noise, omegas, input = None))]
fn py_spectra(
    plant: &PyPlant,
    noise: &PyNoise,
    omegas: Vec<f64>,
    input: Option<&PyInput>,
) -> PyResult<Vec<(f64, f64, f64, f64, f64)>> {
    let s = input.map_or(InputFieldState::Vacuum, |i| i.0);
    let rows = spectra_table(&plant.0, &noise.0, &s, &omegas).map_err(err)?;
    Ok(rows
        .iter()
        .map(|r| (r.omega, r.force, r.sensing, r.quantum_vacuum, r.quantum_input))
        .collect())
}

#[pymodule]
fn stationary_entanglement_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPlant>()?;
    m.add_class::<PyNoise>()?;
    m.add_class::<PyInput>()?;
    m.add_class::<PyBasis>()?;
    m.add_class::<PyCovariance>()?;
    m.add_class::<PyVerdict>()?;
    m.add_function(wrap_pyfunction!(py_build_covariance, m)?)?;
    m.add_function(wrap_pyfunction!(py_ppt_verdict, m)?)?;
    m.add_function(wrap_pyfunction!(py_find_transition, m)?)?;
    m.add_function(wrap_pyfunction!(py_spectra, m)?)?;
    Ok(())
}
