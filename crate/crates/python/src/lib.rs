//! Python bindings: configuration, half-line solver, eigenvalues and the
//! main experiments. Results come back as plain Python values and dicts.

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use dampwave::cap::{neumann_ground_default, CapSolver};
use dampwave::eigen::{self, EigenSolution as CoreSolution};
use dampwave::experiments::{self, Geometry};
use dampwave::model::{self, BoundaryCondition, UniformDamping};
use dampwave::quasimode::ansatz_params;
use dampwave::{resolvent, wave, Error};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::Domain(_) | Error::Inadmissible { .. } | Error::Precondition(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn parse_bc(bc: &str) -> PyResult<BoundaryCondition> {
    match bc.to_ascii_lowercase().as_str() {
        "dirichlet" => Ok(BoundaryCondition::Dirichlet),
        "neumann" => Ok(BoundaryCondition::Neumann),
        other => Err(PyValueError::new_err(format!("unknown boundary condition {other:?}"))),
    }
}

/// Run configuration; defaults match the command-line driver.
#[pyclass(name = "RunConfig", from_py_object)]
#[derive(Clone)]
struct RunConfig {
    inner: model::RunConfig,
}

#[pymethods]
impl RunConfig {
    #[new]
    fn new() -> Self {
        Self {
            inner: model::RunConfig::default(),
        }
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: model::RunConfig::from_toml_str(text).map_err(py_err)?,
        })
    }

    fn to_toml(&self) -> String {
        self.inner.to_toml_string()
    }

    fn validate(&self) -> PyResult<()> {
        self.inner.validate().map_err(py_err)
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.inner.beta
    }
    #[setter]
    fn set_beta(&mut self, v: f64) {
        self.inner.beta = v;
    }
    #[getter]
    fn a(&self) -> f64 {
        self.inner.a
    }
    #[setter]
    fn set_a(&mut self, v: f64) {
        self.inner.a = v;
    }
    #[getter]
    fn sigma(&self) -> f64 {
        self.inner.sigma
    }
    #[setter]
    fn set_sigma(&mut self, v: f64) {
        self.inner.sigma = v;
    }
    #[getter]
    fn b(&self) -> f64 {
        self.inner.b
    }
    #[setter]
    fn set_b(&mut self, v: f64) {
        self.inner.b = v;
    }
    #[getter]
    fn delta(&self) -> f64 {
        self.inner.delta
    }
    #[setter]
    fn set_delta(&mut self, v: f64) {
        self.inner.delta = v;
    }
    #[getter]
    fn l(&self) -> f64 {
        self.inner.l
    }
    #[setter]
    fn set_l(&mut self, v: f64) {
        self.inner.l = v;
    }
    #[getter]
    fn m_list(&self) -> Vec<u64> {
        self.inner.m_list.clone()
    }
    #[setter]
    fn set_m_list(&mut self, v: Vec<u64>) {
        self.inner.m_list = v;
    }

    fn __repr__(&self) -> String {
        let c = &self.inner;
        format!(
            "RunConfig(beta={}, a={}, sigma={}, b={}, delta={}, l={}, m_list={:?})",
            c.beta, c.a, c.sigma, c.b, c.delta, c.l, c.m_list
        )
    }
}

/// One root of the compatibility condition.
#[pyclass(name = "EigenSolution", frozen)]
struct EigenSolution {
    inner: CoreSolution,
}

#[pymethods]
impl EigenSolution {
    #[getter]
    fn h(&self) -> f64 {
        self.inner.h
    }
    #[getter]
    fn mu(&self) -> Complex64 {
        self.inner.mu
    }
    #[getter]
    fn lambda_(&self) -> Complex64 {
        self.inner.lambda
    }
    #[getter]
    fn c_h(&self) -> Complex64 {
        self.inner.c_h
    }
    #[getter]
    fn iterations(&self) -> usize {
        self.inner.iterations
    }

    /// Complex frequency `q` for strip half-width `b`; `h` must come from an integer `m`.
    fn q(&self, b: f64) -> PyResult<Complex64> {
        ansatz_params(&self.inner, b).map(|p| p.0).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!("EigenSolution(h={}, lambda={})", self.inner.h, self.inner.lambda)
    }
}

#[pyclass(name = "EigenProblem", frozen)]
struct EigenProblem {
    inner: eigen::EigenProblem,
}

#[pymethods]
impl EigenProblem {
    #[new]
    #[pyo3(signature = (beta, a = 1.0, l = 1.0, bc = "dirichlet", cap_points = 8000))]
    fn new(beta: f64, a: f64, l: f64, bc: &str, cap_points: usize) -> PyResult<Self> {
        let cap = CapSolver::new(beta, None, cap_points).map_err(py_err)?;
        Ok(Self {
            inner: eigen::EigenProblem::new(cap, a, l, parse_bc(bc)?).map_err(py_err)?,
        })
    }

    fn find(&self, h: f64) -> PyResult<EigenSolution> {
        Ok(EigenSolution {
            inner: self.inner.find(h).map_err(py_err)?,
        })
    }

    fn sweep(&self, hs: Vec<f64>) -> PyResult<Vec<EigenSolution>> {
        let rows = self.inner.sweep(&hs).map_err(py_err)?;
        Ok(rows.into_iter().map(|inner| EigenSolution { inner }).collect())
    }

    fn admissible_h0(&self) -> PyResult<f64> {
        experiments::admissible_h0(&self.inner).map_err(py_err)
    }

    fn c_bound(&self) -> f64 {
        self.inner.c_bound()
    }
}

/// Closed-form `F(0)` at `beta = 1`, `eta = 0`.
#[pyfunction]
fn airy_f0() -> Complex64 {
    experiments::airy_f0()
}

/// `F(0, eta)` of the half-line problem.
#[pyfunction]
#[pyo3(signature = (beta, eta = Complex64::new(0.0, 0.0), n = 8000))]
fn cap_f0(beta: f64, eta: Complex64, n: usize) -> PyResult<Complex64> {
    CapSolver::new(beta, None, n).and_then(|s| s.f0(eta)).map_err(py_err)
}

/// Lowest Neumann level of `-d^2/dx^2 + x^beta` on the half-line.
#[pyfunction]
fn neumann_ground(beta: f64) -> PyResult<f64> {
    neumann_ground_default(beta).map(|s| s.lambda_tilde_1).map_err(py_err)
}

/// Quasimodes for every configured `m`, with the residual fit.
#[pyfunction]
fn quasimode_sweep<'py>(py: Python<'py>, config: &RunConfig) -> PyResult<Bound<'py, PyDict>> {
    let sweep = experiments::quasimode_sweep(&config.inner).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("residual_slope", sweep.residual_fit.slope)?;
    d.set_item("m", sweep.rows.iter().map(|r| r.m).collect::<Vec<_>>())?;
    d.set_item("h", sweep.rows.iter().map(|r| r.h).collect::<Vec<_>>())?;
    d.set_item("q", sweep.rows.iter().map(|r| Complex64::new(r.re_q, r.im_q)).collect::<Vec<_>>())?;
    d.set_item("residual", sweep.rows.iter().map(|r| r.residual).collect::<Vec<_>>())?;
    d.set_item("tail", sweep.rows.iter().map(|r| r.tail).collect::<Vec<_>>())?;
    Ok(d)
}

/// Real-axis resolvent scan on the configured frequency grid.
#[pyfunction]
fn resolvent_scan<'py>(py: Python<'py>, config: &RunConfig) -> PyResult<Bound<'py, PyDict>> {
    let fit = experiments::resolvent_scan(&config.inner).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("exponent", fit.exponent())?;
    d.set_item("r2", fit.fit.r2)?;
    d.set_item("q", fit.samples.iter().map(|s| s.q).collect::<Vec<_>>())?;
    d.set_item("norm", fit.samples.iter().map(|s| s.norm).collect::<Vec<_>>())?;
    d.set_item("m", fit.samples.iter().map(|s| s.m).collect::<Vec<_>>())?;
    Ok(d)
}

/// `||(-d^2 + k_m^2 + i q W - q^2)^{-1}||` on `n` intervals; `W = 0` when `beta` is `None`.
#[pyfunction]
#[pyo3(signature = (q, m, beta = None, a = 1.0, sigma = 0.5, b = 2.0, n = 4000))]
fn resolvent_norm(q: f64, m: u64, beta: Option<f64>, a: f64, sigma: f64, b: f64, n: usize) -> PyResult<f64> {
    let sample = match beta {
        Some(beta) => {
            let p = Geometry { a, sigma, b, delta: 0.1 }.profile(beta).map_err(py_err)?;
            resolvent::resolvent_norm(q, m, &p, n)
        }
        None => resolvent::resolvent_norm(q, m, &UniformDamping { level: 0.0, b }, n),
    };
    sample.map(|s| s.norm).map_err(py_err)
}

/// Self-adjoint reference `1 / dist(q^2 - k_m^2, spectrum)`.
#[pyfunction]
fn undamped_norm(q: f64, m: u64, b: f64) -> f64 {
    resolvent::undamped_norm(q, m, b)
}

/// Evolves quasimode data and compares the energy decay rate with `2 Im q`.
#[pyfunction]
#[pyo3(signature = (beta, h, a = 2.0, sigma = 1.0, b = 4.0, delta = 0.2, n = 600, phase = 0.2, fraction = 0.1))]
#[allow(clippy::too_many_arguments)]
fn quasimode_decay<'py>(
    py: Python<'py>,
    beta: f64,
    h: f64,
    a: f64,
    sigma: f64,
    b: f64,
    delta: f64,
    n: usize,
    phase: f64,
    fraction: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let run = experiments::quasimode_decay(beta, Geometry { a, sigma, b, delta }, h, n, phase, fraction).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("h", run.h)?;
    d.set_item("q", run.q)?;
    d.set_item("measured_rate", run.measured_rate)?;
    d.set_item("expected_rate", run.expected_rate)?;
    d.set_item("relative_error", run.relative_error())?;
    d.set_item("times", run.trace.times)?;
    d.set_item("energies", run.trace.energies)?;
    Ok(d)
}

/// Power-law fit of `E ~ t^{-2 alpha}` over the last decade of `times`.
#[pyfunction]
fn fit_decay<'py>(py: Python<'py>, times: Vec<f64>, energies: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
    let trace = wave::EnergyTrace {
        m: 0,
        dt: 0.0,
        times,
        energies,
        dissipation_defect: 0.0,
    };
    let fit = wave::fit_decay(&trace).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("exponent", fit.exponent)?;
    d.set_item("window", fit.window)?;
    d.set_item("r2", fit.r2)?;
    d.set_item("exponential_r2", fit.exponential_r2)?;
    d.set_item("inconclusive", fit.inconclusive)?;
    Ok(d)
}

#[pymodule]
fn pydampwave(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", dampwave::VERSION)?;
    m.add_class::<RunConfig>()?;
    m.add_class::<EigenProblem>()?;
    m.add_class::<EigenSolution>()?;
    m.add_function(wrap_pyfunction!(airy_f0, m)?)?;
    m.add_function(wrap_pyfunction!(cap_f0, m)?)?;
    m.add_function(wrap_pyfunction!(neumann_ground, m)?)?;
    m.add_function(wrap_pyfunction!(quasimode_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(resolvent_scan, m)?)?;
    m.add_function(wrap_pyfunction!(resolvent_norm, m)?)?;
    m.add_function(wrap_pyfunction!(undamped_norm, m)?)?;
    m.add_function(wrap_pyfunction!(quasimode_decay, m)?)?;
    m.add_function(wrap_pyfunction!(fit_decay, m)?)?;
    Ok(())
}
