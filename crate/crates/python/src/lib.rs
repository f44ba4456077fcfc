//! Python bindings for the `contraflow` crate.

use ::contraflow as core;
use core::analysis;
use core::cli::ExperimentConfig;
use core::contraction::{self, CertifyConfig};
use core::flows::{self, VectorField};
use core::integrators::{self, Scheme, StepConfig, StepVariant};
use core::objectives::ObjectiveSpec;
use core::Error;
use nalgebra::{DMatrix, DVector};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Convergence { .. } | Error::StepFailed { .. } | Error::Io(_) => PyRuntimeError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn vec(xs: Vec<f64>) -> DVector<f64> {
    DVector::from_vec(xs)
}

fn matrix(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let n = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("matrix rows must have equal length"));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(DMatrix::from_row_slice(rows.len(), n, &flat))
}

fn json_to_py(py: Python<'_>, text: &str) -> PyResult<Py<PyAny>> {
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

/// A strongly convex, smooth objective.
#[pyclass(name = "Objective", module = "contraflow", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyObjective {
    inner: ObjectiveSpec,
}

#[pymethods]
impl PyObjective {
    /// `½(x − c)ᵀ diag(eigs) (x − c)`.
    #[staticmethod]
    #[pyo3(signature = (eigs, center=None))]
    fn quadratic(eigs: Vec<f64>, center: Option<Vec<f64>>) -> PyResult<Self> {
        let c = center.unwrap_or_else(|| vec![0.0; eigs.len()]);
        Ok(Self {
            inner: ObjectiveSpec::diagonal_quadratic(&eigs, vec(c)).map_err(to_py)?,
        })
    }

    /// Quadratic with a full symmetric positive-definite Hessian.
    #[staticmethod]
    fn dense_quadratic(q: Vec<Vec<f64>>, center: Vec<f64>) -> PyResult<Self> {
        Ok(Self {
            inner: ObjectiveSpec::quadratic(matrix(&q)?, vec(center)).map_err(to_py)?,
        })
    }

    /// Quadratic whose minimizer moves on a circle of radius `r` at angular speed `omega`.
    #[staticmethod]
    fn rotating(r: f64, omega: f64, eigs: Vec<f64>) -> PyResult<Self> {
        Ok(Self {
            inner: ObjectiveSpec::rotating_quadratic(r, omega, DMatrix::from_diagonal(&vec(eigs))).map_err(to_py)?,
        })
    }

    /// `log Σ exp(Ax + b) + (ridge/2)‖x‖²`.
    #[staticmethod]
    fn logsumexp(a: Vec<Vec<f64>>, b: Vec<f64>, ridge: f64) -> PyResult<Self> {
        Ok(Self {
            inner: ObjectiveSpec::logsumexp_ridge(matrix(&a)?, vec(b), ridge).map_err(to_py)?,
        })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn mu(&self) -> f64 {
        self.inner.mu()
    }

    #[getter]
    fn lip(&self) -> f64 {
        self.inner.lip()
    }

    #[getter]
    fn kappa(&self) -> f64 {
        self.inner.kappa()
    }

    #[getter]
    fn time_varying(&self) -> bool {
        self.inner.is_time_varying()
    }

    #[pyo3(signature = (x, t=0.0))]
    fn value(&self, x: Vec<f64>, t: f64) -> PyResult<f64> {
        self.check(&x)?;
        Ok(self.inner.value(&vec(x), t))
    }

    #[pyo3(signature = (x, t=0.0))]
    fn grad(&self, x: Vec<f64>, t: f64) -> PyResult<Vec<f64>> {
        self.check(&x)?;
        Ok(self.inner.grad(&vec(x), t).as_slice().to_vec())
    }

    #[pyo3(signature = (t=0.0))]
    fn minimizer(&self, t: f64) -> Option<Vec<f64>> {
        self.inner.known_minimizer(t).map(|x| x.as_slice().to_vec())
    }

    fn __repr__(&self) -> String {
        format!(
            "Objective(kind={}, dim={}, mu={}, lip={})",
            self.inner.kind_name(),
            self.inner.dim(),
            self.inner.mu(),
            self.inner.lip()
        )
    }
}

impl PyObjective {
    fn check(&self, x: &[f64]) -> PyResult<()> {
        if x.len() != self.inner.dim() {
            return Err(to_py(Error::DimensionMismatch {
                expected: self.inner.dim(),
                got: x.len(),
            }));
        }
        Ok(())
    }
}

/// Weighted norm `‖v‖_P` with `P = block ⊗ Iₙ`.
#[pyclass(name = "Metric", module = "contraflow", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyMetric {
    inner: contraction::Metric,
}

#[pymethods]
impl PyMetric {
    #[new]
    fn new(p_a: f64, p_b: f64, p_c: f64, n: usize) -> PyResult<Self> {
        Ok(Self {
            inner: contraction::Metric::new(p_a, p_b, p_c, n).map_err(to_py)?,
        })
    }

    /// The accelerated-flow metric for condition number `kappa`.
    #[staticmethod]
    #[pyo3(signature = (kappa, n, gamma=None, sign=None))]
    fn accelerated(kappa: f64, n: usize, gamma: Option<f64>, sign: Option<f64>) -> PyResult<Self> {
        let gamma = gamma.unwrap_or_else(|| flows::default_gamma(kappa));
        Ok(Self {
            inner: contraction::metric_matrix(kappa, gamma, sign.unwrap_or(contraction::METRIC_SIGN), n).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn identity(n: usize) -> PyResult<Self> {
        Ok(Self {
            inner: contraction::Metric::identity(n).map_err(to_py)?,
        })
    }

    #[getter]
    fn entries(&self) -> (f64, f64, f64) {
        self.inner.entries()
    }

    #[getter]
    fn lambda_min(&self) -> f64 {
        self.inner.lambda_min()
    }

    #[getter]
    fn lambda_max(&self) -> f64 {
        self.inner.lambda_max()
    }

    fn weighted_norm(&self, v: Vec<f64>) -> PyResult<f64> {
        self.inner.weighted_norm(&vec(v)).map_err(to_py)
    }

    /// Largest eigenvalue of the symmetric part of `P^{1/2} A P^{-1/2}`.
    fn matrix_measure(&self, a: Vec<Vec<f64>>) -> PyResult<f64> {
        self.inner.matrix_measure(&matrix(&a)?).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        let (a, b, c) = self.inner.entries();
        format!("Metric(p_a={a}, p_b={b}, p_c={c}, n={})", self.inner.n())
    }
}

/// Vector field of a momentum optimization flow on the stacked state `(x1, x2)`.
#[pyclass(name = "Flow", module = "contraflow", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyFlow {
    inner: flows::FlowField,
}

#[pymethods]
impl PyFlow {
    /// The accelerated flow in barred coordinates.
    #[staticmethod]
    fn acconest(objective: &PyObjective) -> PyResult<Self> {
        Ok(Self {
            inner: flows::acconest_field(&objective.inner).map_err(to_py)?,
        })
    }

    /// The general momentum family with parameters `(a, b, c, d, e)`.
    #[staticmethod]
    fn momentum(objective: &PyObjective, a: f64, b: f64, c: f64, d: f64, e: f64) -> PyResult<Self> {
        let p = flows::MomentumParams::new(a, b, c, d, e).map_err(to_py)?;
        Ok(Self {
            inner: flows::general_momentum_field(p, &objective.inner).map_err(to_py)?,
        })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn id(&self) -> String {
        self.inner.id()
    }

    #[getter]
    fn claimed_rate(&self) -> Option<f64> {
        self.inner.claimed_rate()
    }

    #[getter]
    fn beta(&self) -> Option<f64> {
        self.inner.beta()
    }

    #[getter]
    fn objective(&self) -> PyObjective {
        PyObjective {
            inner: self.inner.objective().clone(),
        }
    }

    #[pyo3(signature = (y, t=0.0))]
    fn eval(&self, y: Vec<f64>, t: f64) -> PyResult<Vec<f64>> {
        if y.len() != self.inner.dim() {
            return Err(to_py(Error::DimensionMismatch {
                expected: self.inner.dim(),
                got: y.len(),
            }));
        }
        Ok(self.inner.eval(&vec(y), t).as_slice().to_vec())
    }

    #[pyo3(signature = (t=0.0))]
    fn equilibrium(&self, t: f64) -> PyResult<Vec<f64>> {
        Ok(self.inner.equilibrium_stacked(t).map_err(to_py)?.as_slice().to_vec())
    }

    fn __repr__(&self) -> String {
        format!("Flow({})", self.inner.id())
    }
}

/// Samples the one-sided Lipschitz ratio and returns the certificate as a dict.
#[pyfunction]
#[pyo3(signature = (flow, metric, rate=None, count=10_000, radius=10.0, seed=0))]
fn certify(
    py: Python<'_>,
    flow: &PyFlow,
    metric: &PyMetric,
    rate: Option<f64>,
    count: usize,
    radius: f64,
    seed: u64,
) -> PyResult<Py<PyAny>> {
    let rate = rate
        .or(flow.inner.claimed_rate())
        .ok_or_else(|| PyValueError::new_err("no rate given and the flow claims none"))?;
    let cfg = CertifyConfig {
        count,
        radius,
        seed,
        times: Vec::new(),
    };
    let cert = py
        .detach(|| contraction::certify_contraction(&flow.inner, &metric.inner, rate, &cfg))
        .map_err(to_py)?;
    json_to_py(py, &serde_json::to_string(&cert).map_err(|e| to_py(e.into()))?)
}

fn parse_scheme(s: &str) -> PyResult<Scheme> {
    match s {
        "explicit" => Ok(Scheme::Explicit),
        "implicit" => Ok(Scheme::Implicit),
        "rk4_reference" => Ok(Scheme::Rk4Reference),
        other => Err(PyValueError::new_err(format!(
            "scheme must be explicit, implicit or rk4_reference, got {other:?}"
        ))),
    }
}

/// Integrates `steps` steps of size `h`; returns `(times, states)`.
#[pyfunction]
fn integrate(py: Python<'_>, flow: &PyFlow, y0: Vec<f64>, scheme: &str, h: f64, steps: usize) -> PyResult<(Vec<f64>, Vec<Vec<f64>>)> {
    let scheme = parse_scheme(scheme)?;
    let cfg = StepConfig::new(h).map_err(to_py)?;
    let traj = py
        .detach(|| integrators::integrate(&flow.inner, vec(y0), scheme, &cfg, steps))
        .map_err(to_py)?;
    Ok((traj.times, traj.states.iter().map(|s| s.as_slice().to_vec()).collect()))
}

#[pyfunction]
fn nesterov_step(objective: &PyObjective, y1: Vec<f64>, y2: Vec<f64>) -> PyResult<(Vec<f64>, Vec<f64>)> {
    objective.check(&y1)?;
    objective.check(&y2)?;
    let (a, b) = integrators::nesterov_step(&objective.inner, &vec(y1), &vec(y2));
    Ok((a.as_slice().to_vec(), b.as_slice().to_vec()))
}

#[pyfunction]
fn optimal_explicit_step(rate: f64, lipschitz: f64) -> PyResult<f64> {
    integrators::optimal_explicit_step(rate, lipschitz).map_err(to_py)
}

#[pyfunction]
fn field_lipschitz_bound(kappa: f64, metric: &PyMetric) -> f64 {
    integrators::field_lipschitz_bound(kappa, &metric.inner)
}

/// `variant` is `"statement"`, `"proof"` or `None` for the smaller of the two.
#[pyfunction]
#[pyo3(signature = (kappa, metric, variant=None))]
fn acconest_optimal_step(kappa: f64, metric: &PyMetric, variant: Option<&str>) -> PyResult<f64> {
    match variant {
        None => Ok(integrators::default_acconest_step(kappa, &metric.inner).map_err(to_py)?.0),
        Some("statement") => integrators::acconest_optimal_step(kappa, &metric.inner, StepVariant::Statement).map_err(to_py),
        Some("proof") => integrators::acconest_optimal_step(kappa, &metric.inner, StepVariant::Proof).map_err(to_py),
        Some(other) => Err(PyValueError::new_err(format!("unknown step variant {other:?}"))),
    }
}

#[pyfunction]
fn implicit_envelope(k: usize, h: f64, rate: f64, d0: f64) -> PyResult<f64> {
    analysis::implicit_envelope(k, h, &|_| rate, d0).map_err(to_py)
}

#[pyfunction]
fn explicit_envelope(k: usize, h: f64, rate: f64, lipschitz: f64, d0: f64) -> PyResult<f64> {
    analysis::explicit_envelope(k, h, &|_| rate, lipschitz, d0).map_err(to_py)
}

#[pyfunction]
fn tracking_envelope_implicit(k: usize, h: f64, rate: f64, rho: f64, d0: f64) -> PyResult<f64> {
    analysis::tracking_envelope_implicit(k, h, rate, rho, d0).map_err(to_py)
}

#[pyfunction]
fn tracking_envelope_explicit(k: usize, h: f64, rate: f64, lipschitz: f64, rho: f64, d0: f64) -> PyResult<f64> {
    analysis::tracking_envelope_explicit(k, h, rate, lipschitz, rho, d0).map_err(to_py)
}

#[pyfunction]
fn tracking_envelope_continuous(t: f64, rate: f64, lambda_max_p: f64, rho: f64, mu: f64, d0: f64) -> PyResult<f64> {
    analysis::tracking_envelope_continuous(t, rate, lambda_max_p, rho, mu, d0).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (series, tail_fraction=1.0))]
fn empirical_rate(series: Vec<f64>, tail_fraction: f64) -> PyResult<f64> {
    analysis::empirical_rate(&series, tail_fraction).map_err(to_py)
}

/// Runs an experiment described by a JSON config and returns its report as a dict.
#[pyfunction]
fn run_experiment(py: Python<'_>, config_json: &str) -> PyResult<Py<PyAny>> {
    let cfg = ExperimentConfig::from_json_str(config_json).map_err(to_py)?;
    let out = py.detach(|| analysis::run_experiment(&cfg)).map_err(to_py)?;
    let summary = core::cli::RunSummary::from_outcome(&out);
    json_to_py(py, &serde_json::to_string(&summary).map_err(|e| to_py(e.into()))?)
}

#[pymodule]
fn contraflow(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyObjective>()?;
    m.add_class::<PyMetric>()?;
    m.add_class::<PyFlow>()?;
    m.add_function(wrap_pyfunction!(certify, m)?)?;
    m.add_function(wrap_pyfunction!(integrate, m)?)?;
    m.add_function(wrap_pyfunction!(nesterov_step, m)?)?;
    m.add_function(wrap_pyfunction!(optimal_explicit_step, m)?)?;
    m.add_function(wrap_pyfunction!(field_lipschitz_bound, m)?)?;
    m.add_function(wrap_pyfunction!(acconest_optimal_step, m)?)?;
    m.add_function(wrap_pyfunction!(implicit_envelope, m)?)?;
    m.add_function(wrap_pyfunction!(explicit_envelope, m)?)?;
    m.add_function(wrap_pyfunction!(tracking_envelope_implicit, m)?)?;
    m.add_function(wrap_pyfunction!(tracking_envelope_explicit, m)?)?;
    m.add_function(wrap_pyfunction!(tracking_envelope_continuous, m)?)?;
    m.add_function(wrap_pyfunction!(empirical_rate, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
