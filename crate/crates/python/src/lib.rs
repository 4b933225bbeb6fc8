//! Python bindings for the nlhodge solvers and checks.

use nlhodge::cli::{self, Command};
use nlhodge::complex::ComplexBuilder;
use nlhodge::config::parse_config_str;
use nlhodge::density::{certify_condition2, DensityModel};
use nlhodge::flow::{solve_flow, FlowOptions, FlowProblem};
use nlhodge::gauge::{self, Group, LatticeConnection, MinimizeOptions};
use nlhodge::verify::{sibner_decomposition, SamplePoint};
use nlhodge::{io, ops, MetricSpec};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::Path;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("serializable")
}

#[pyclass(name = "Complex", module = "nlhodge_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyComplex {
    inner: nlhodge::Complex,
}

#[pymethods]
impl PyComplex {
    #[new]
    #[pyo3(signature = (dims, spacing=None, origin=None, periodic=None, metric="identity"))]
    fn new(
        dims: Vec<usize>,
        spacing: Option<Vec<f64>>,
        origin: Option<Vec<f64>>,
        periodic: Option<Vec<bool>>,
        metric: &str,
    ) -> PyResult<Self> {
        let h = spacing.unwrap_or_else(|| dims.iter().map(|&d| 1.0 / d as f64).collect());
        let mut b = ComplexBuilder::new(&dims).spacings(&h);
        if let Some(o) = origin {
            b = b.origin(&o);
        }
        if let Some(p) = periodic {
            b = b.periodic(&p);
        }
        b = match metric {
            "identity" => b,
            "round-sphere" => b.metric(MetricSpec::RoundSphere),
            other => return Err(value_err(format!("unknown metric {other:?}"))),
        };
        Ok(PyComplex { inner: b.build().map_err(value_err)? })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn dims(&self) -> Vec<usize> {
        self.inner.dims().to_vec()
    }

    #[getter]
    fn spacing(&self) -> Vec<f64> {
        self.inner.spacing().to_vec()
    }

    fn num_cells(&self, p: usize) -> usize {
        self.inner.num_cells(p)
    }

    fn cell_center(&self, p: usize, index: usize) -> Vec<f64> {
        self.inner.cell_center(p, index)
    }

    /// Primal cochain of degree `p` with the given values.
    fn cochain(&self, p: usize, values: Vec<f64>) -> PyResult<PyCochain> {
        let c = nlhodge::Cochain::from_values(&self.inner, p, values).map_err(value_err)?;
        Ok(PyCochain { cx: self.inner.clone(), inner: c })
    }

    fn zeros(&self, p: usize) -> PyCochain {
        PyCochain { cx: self.inner.clone(), inner: nlhodge::Cochain::zeros(&self.inner, p) }
    }

    fn __repr__(&self) -> String {
        format!("Complex(dims={:?}, spacing={:?})", self.inner.dims(), self.inner.spacing())
    }
}

#[pyclass(name = "Cochain", module = "nlhodge_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyCochain {
    cx: nlhodge::Complex,
    inner: nlhodge::Cochain,
}

impl PyCochain {
    fn wrap(&self, c: nlhodge::Cochain) -> Self {
        PyCochain { cx: self.cx.clone(), inner: c }
    }
}

#[pymethods]
impl PyCochain {
    #[getter]
    fn degree(&self) -> usize {
        self.inner.degree()
    }

    #[getter]
    fn dual(&self) -> bool {
        self.inner.layout() == nlhodge::Layout::Dual
    }

    #[getter]
    fn ncomp(&self) -> usize {
        self.inner.ncomp()
    }

    fn values(&self) -> Vec<f64> {
        self.inner.values().to_vec()
    }

    fn __len__(&self) -> usize {
        self.inner.values().len()
    }

    fn max_abs(&self) -> f64 {
        self.inner.max_abs()
    }

    fn d(&self) -> PyResult<Self> {
        Ok(self.wrap(ops::d(&self.cx, &self.inner).map_err(value_err)?))
    }

    fn star(&self) -> Self {
        self.wrap(ops::star(&self.cx, &self.inner))
    }

    fn codifferential(&self) -> PyResult<Self> {
        Ok(self.wrap(ops::codifferential(&self.cx, &self.inner).map_err(value_err)?))
    }

    fn inner(&self, other: &PyCochain) -> PyResult<f64> {
        ops::inner(&self.cx, &self.inner, &other.inner).map_err(value_err)
    }

    fn norm(&self) -> f64 {
        ops::norm(&self.cx, &self.inner)
    }

    /// Q = |c|^2 on every top cell, for a primal 1-cochain.
    fn pointwise_q(&self) -> PyResult<Vec<f64>> {
        Ok(ops::pointwise_q(&self.cx, &self.inner).map_err(value_err)?.values)
    }

    fn to_csv(&self) -> String {
        io::cochain_to_csv(&self.cx, &self.inner)
    }

    fn to_bytes<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &io::cochain_to_bytes(&self.cx, &self.inner))
    }

    #[staticmethod]
    fn from_csv(cx: &PyComplex, text: &str) -> PyResult<Self> {
        let c = io::cochain_from_csv(&cx.inner, text).map_err(value_err)?;
        Ok(PyCochain { cx: cx.inner.clone(), inner: c })
    }

    #[staticmethod]
    fn from_bytes(cx: &PyComplex, data: &[u8]) -> PyResult<Self> {
        let c = io::cochain_from_bytes(&cx.inner, data).map_err(value_err)?;
        Ok(PyCochain { cx: cx.inner.clone(), inner: c })
    }

    fn __repr__(&self) -> String {
        format!("Cochain(degree={}, len={})", self.inner.degree(), self.inner.values().len())
    }
}

#[pyclass(name = "Density", module = "nlhodge_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyDensity {
    inner: DensityModel,
}

#[pymethods]
impl PyDensity {
    #[staticmethod]
    fn constant() -> Self {
        PyDensity { inner: DensityModel::Constant }
    }

    #[staticmethod]
    fn polytropic(gamma: f64) -> PyResult<Self> {
        Ok(PyDensity { inner: DensityModel::polytropic(gamma).map_err(value_err)? })
    }

    #[staticmethod]
    fn minimal_surface() -> Self {
        PyDensity { inner: DensityModel::MinimalSurface }
    }

    #[staticmethod]
    fn tabulated(q: Vec<f64>, rho: Vec<f64>) -> PyResult<Self> {
        Ok(PyDensity { inner: DensityModel::tabulated(q, rho).map_err(value_err)? })
    }

    #[getter]
    fn q_max(&self) -> f64 {
        self.inner.q_max()
    }

    #[getter]
    fn q_crit(&self) -> Option<f64> {
        self.inner.q_crit()
    }

    fn rho(&self, q: f64) -> PyResult<f64> {
        self.inner.rho(q).map_err(value_err)
    }

    fn drho(&self, q: f64) -> PyResult<f64> {
        self.inner.drho(q).map_err(value_err)
    }

    fn stored_energy(&self, q: f64) -> PyResult<f64> {
        self.inner.stored_energy(q).map_err(value_err)
    }

    fn ellipticity_margin(&self, q: f64) -> PyResult<f64> {
        self.inner.ellipticity_margin(q).map_err(value_err)
    }

    /// Ellipticity certificate over [lo, hi] as a JSON string.
    #[pyo3(signature = (lo, hi, q=0.0, k=0.0, samples=1000))]
    fn certify(&self, lo: f64, hi: f64, q: f64, k: f64, samples: usize) -> PyResult<String> {
        Ok(to_json(&certify_condition2(&self.inner, (lo, hi), q, k, samples).map_err(value_err)?))
    }
}

#[pyclass(name = "FlowSolution", module = "nlhodge_py", frozen, get_all)]
struct PyFlowSolution {
    phi: PyCochain,
    omega: PyCochain,
    q: Vec<f64>,
    max_q: f64,
    energy: f64,
    residual: f64,
    iterations: usize,
}

/// Dirichlet flow with boundary data slope . x and optional constant
/// circulation per axis.
#[pyfunction]
#[pyo3(signature = (complex, density, slope, circulation=None, tol=None, max_iters=100))]
fn solve_linear_flow(
    complex: &PyComplex,
    density: &PyDensity,
    slope: Vec<f64>,
    circulation: Option<Vec<f64>>,
    tol: Option<f64>,
    max_iters: usize,
) -> PyResult<PyFlowSolution> {
    let cx = &complex.inner;
    if slope.len() != cx.dim() {
        return Err(value_err(format!("slope needs {} entries", cx.dim())));
    }
    let mut problem = FlowProblem::dirichlet(cx.clone(), density.inner.clone(), |x| {
        slope.iter().zip(x).map(|(a, b)| a * b).sum()
    })
    .map_err(value_err)?;
    if let Some(c) = circulation {
        let lambda = nlhodge::Cochain::from_fn(cx, 1, |m, _| c.get(m.trailing_zeros() as usize).copied().unwrap_or(0.0));
        problem = FlowProblem::new(cx.clone(), density.inner.clone(), problem.faces, problem.boundary_values, Some(lambda))
            .map_err(value_err)?;
    }
    let opts = FlowOptions { tol, max_iters, ..Default::default() };
    let sol = solve_flow(&problem, &opts).map_err(runtime_err)?;
    Ok(PyFlowSolution {
        phi: PyCochain { cx: cx.clone(), inner: sol.phi },
        omega: PyCochain { cx: cx.clone(), inner: sol.omega },
        q: sol.q.values,
        max_q: sol.max_q,
        energy: sol.energy,
        residual: sol.residual,
        iterations: sol.iterations,
    })
}

fn parse_group(name: &str) -> PyResult<Group> {
    Group::parse(name).map_err(value_err)
}

#[pyclass(name = "Connection", module = "nlhodge_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyConnection {
    inner: LatticeConnection,
}

#[pymethods]
impl PyConnection {
    #[staticmethod]
    #[pyo3(signature = (complex, group="su2"))]
    fn identity(complex: &PyComplex, group: &str) -> PyResult<Self> {
        Ok(PyConnection { inner: LatticeConnection::identity(&complex.inner, parse_group(group)?) })
    }

    #[staticmethod]
    #[pyo3(signature = (complex, group="su2", amplitude=0.1, seed=0))]
    fn random(complex: &PyComplex, group: &str, amplitude: f64, seed: u64) -> PyResult<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(PyConnection { inner: LatticeConnection::random(&complex.inner, parse_group(group)?, amplitude, &mut rng) })
    }

    #[staticmethod]
    fn from_bytes(data: &[u8]) -> PyResult<Self> {
        Ok(PyConnection { inner: io::connection_from_bytes(data).map_err(value_err)? })
    }

    fn to_bytes<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &io::connection_to_bytes(&self.inner))
    }

    #[getter]
    fn group(&self) -> &'static str {
        self.inner.group().name()
    }

    #[getter]
    fn num_links(&self) -> usize {
        self.inner.num_links()
    }

    #[pyo3(signature = (density=None))]
    fn energy(&self, density: Option<&PyDensity>) -> PyResult<f64> {
        let model = density.map_or(DensityModel::Constant, |d| d.inner.clone());
        gauge::gauge_energy(&self.inner, &model).map_err(value_err)
    }

    fn q(&self) -> PyResult<Vec<f64>> {
        Ok(gauge::gauge_q(&self.inner).map_err(value_err)?.values)
    }

    fn curvature(&self) -> PyResult<PyCochain> {
        let f = gauge::curvature(&self.inner).map_err(value_err)?;
        Ok(PyCochain { cx: self.inner.complex().clone(), inner: f })
    }

    /// Largest exact cube defect and log-level residual.
    fn bianchi(&self) -> PyResult<(f64, f64)> {
        let r = gauge::bianchi_residual(&self.inner).map_err(value_err)?;
        Ok((r.max_exact_defect, r.max_log_residual))
    }

    /// Apply a random gauge transformation.
    #[pyo3(signature = (amplitude=1.0, seed=0))]
    fn transformed(&self, amplitude: f64, seed: u64) -> PyResult<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = gauge::GaugeTransform::random(self.inner.complex(), self.inner.group(), amplitude, &mut rng);
        Ok(PyConnection { inner: gauge::apply_gauge(&self.inner, &g).map_err(value_err)? })
    }

    /// Energy minimization; returns the minimizer and a JSON report.
    #[pyo3(signature = (density=None, tol=1e-8, max_iters=20000, free_boundary=false))]
    fn minimize(
        &self,
        density: Option<&PyDensity>,
        tol: f64,
        max_iters: usize,
        free_boundary: bool,
    ) -> PyResult<(Self, String)> {
        let model = density.map_or(DensityModel::Constant, |d| d.inner.clone());
        let opts = MinimizeOptions { tol, max_iters, free_boundary, ..Default::default() };
        let (conn, rep) = gauge::minimize(&self.inner, &model, &opts).map_err(runtime_err)?;
        Ok((PyConnection { inner: conn }, to_json(&rep)))
    }

    #[pyo3(signature = (tol=1e-10, max_sweeps=5000))]
    fn coulomb_gauge(&self, tol: f64, max_sweeps: usize) -> PyResult<(Self, String)> {
        let opts = gauge::CoulombOptions { tol, max_sweeps, ..Default::default() };
        let (conn, _, rep) = gauge::coulomb_gauge_fix(&self.inner, &opts).map_err(runtime_err)?;
        Ok((PyConnection { inner: conn }, to_json(&rep)))
    }

    fn exponential_gauge(&self, origin: usize) -> PyResult<(Self, String)> {
        let (conn, _, rep) = gauge::exponential_gauge_fix(&self.inner, origin).map_err(runtime_err)?;
        Ok((PyConnection { inner: conn }, to_json(&rep)))
    }
}

/// Mean-value decomposition between two flat points, as JSON.
#[pyfunction]
fn mean_value_decomposition(
    density: &PyDensity,
    degree: usize,
    xi: Vec<f64>,
    eta: Vec<f64>,
    mu: Vec<f64>,
    tau: Vec<f64>,
) -> PyResult<String> {
    let s = sibner_decomposition(&density.inner, degree, &SamplePoint::flat(xi), &SamplePoint::flat(eta), &mu, &tau)
        .map_err(value_err)?;
    Ok(to_json(&s))
}

/// Run one CLI mode from INI text and return the manifest as JSON.
#[pyfunction]
#[pyo3(signature = (config, mode, out, seed=None))]
fn run(config: &str, mode: &str, out: &str, seed: Option<u64>) -> PyResult<(bool, String)> {
    let mut cfg = parse_config_str(config, None).map_err(value_err)?;
    if let Some(s) = seed {
        cfg.set_seed(s);
    }
    let command = match mode {
        "solve-flow" => Command::SolveFlow,
        "solve-gauge" => Command::SolveGauge,
        "gauge-fix" => Command::GaugeFix { mode: None, input: None },
        "verify" => Command::Verify { checks: None, input: None },
        other => return Err(value_err(format!("unknown mode {other:?}"))),
    };
    let digest = nlhodge::verify::digest_f64s(&[]);
    let outcome = cli::run_config(&cfg, &command, &digest, Path::new(out)).map_err(runtime_err)?;
    Ok((outcome.pass, outcome.manifest.to_string()))
}

#[pymodule]
fn nlhodge_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyComplex>()?;
    m.add_class::<PyCochain>()?;
    m.add_class::<PyDensity>()?;
    m.add_class::<PyFlowSolution>()?;
    m.add_class::<PyConnection>()?;
    m.add_function(wrap_pyfunction!(solve_linear_flow, m)?)?;
    m.add_function(wrap_pyfunction!(mean_value_decomposition, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}
