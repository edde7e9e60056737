//! Python bindings. Reports come back as plain dicts built from the same
//! serde representation the CLI prints as JSON.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyAny;

use rejodds_core::design::{self, Sides};
use rejodds_core::evidence;
use rejodds_core::freqcheck::{self, RejectionRegion};
use rejodds_core::mathcore::{Quadrature, RngContract};
use rejodds_core::reanalyze;
use rejodds_core::stopping::{self, Start, StoppingConfig};

/// Stream ids match the CLI so seeds reproduce across both front ends.
const VERIFY_STREAM: u64 = 1;
const STOPPING_STREAM: u64 = 2;

fn py_err(e: rejodds_core::Error) -> PyErr {
    if e.is_validation() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

trait OrPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> OrPy<T> for rejodds_core::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

fn to_py<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn sides(s: &str) -> PyResult<Sides> {
    s.parse().py()
}

#[pyclass(name = "TestModel", module = "rejodds", frozen, from_py_object)]
#[derive(Clone)]
struct PyTestModel {
    inner: design::TestModel,
}

#[pymethods]
impl PyTestModel {
    #[staticmethod]
    #[pyo3(signature = (sides = "two", null = 0.0, sd = 1.0, n = 1))]
    fn z_mean(sides: &str, null: f64, sd: f64, n: u64) -> PyResult<Self> {
        let inner = design::TestModel::z_mean(self::sides(sides)?).with_null(null).with_sd(sd).with_n(n);
        inner.validate().py()?;
        Ok(PyTestModel { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (n1, n2, sides = "two", null = 0.0, sd = 1.0))]
    fn two_sample_z(n1: u64, n2: u64, sides: &str, null: f64, sd: f64) -> PyResult<Self> {
        let inner = design::TestModel::two_sample_z(self::sides(sides)?, n1, n2).with_null(null).with_sd(sd);
        inner.validate().py()?;
        Ok(PyTestModel { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (null_variance = 1.0))]
    fn normal_variance(null_variance: f64) -> PyResult<Self> {
        let inner = design::TestModel::normal_variance(null_variance);
        inner.validate().py()?;
        Ok(PyTestModel { inner })
    }

    #[getter]
    fn family(&self) -> String {
        self.inner.family.to_string()
    }

    #[getter]
    fn sides(&self) -> String {
        self.inner.sides.to_string()
    }

    fn p_value(&self, statistic: f64) -> f64 {
        self.inner.p_value(statistic)
    }

    fn statistic_for_p(&self, p: f64) -> PyResult<f64> {
        self.inner.statistic_for_p(p).py()
    }

    fn __repr__(&self) -> String {
        let m = &self.inner;
        format!(
            "TestModel(family='{}', sides='{}', null={}, sd={}, n1={}, n2={})",
            m.family, m.sides, m.null_value, m.known_sd, m.n1, m.n2
        )
    }
}

#[pyclass(name = "PriorSpec", module = "rejodds", frozen, from_py_object)]
#[derive(Clone)]
struct PyPriorSpec {
    inner: evidence::PriorSpec,
}

#[pymethods]
impl PyPriorSpec {
    /// Parses the CLI syntax, e.g. `uniform:0:2.95` or `eb-noninc`.
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        let inner: evidence::PriorSpec = text.parse().py()?;
        inner.validate_shape().py()?;
        Ok(PyPriorSpec { inner })
    }

    #[staticmethod]
    fn point(theta: f64) -> PyResult<Self> {
        Self::checked(evidence::PriorSpec::point(theta))
    }

    #[staticmethod]
    fn uniform(lo: f64, hi: f64) -> PyResult<Self> {
        Self::checked(evidence::PriorSpec::uniform(lo, hi))
    }

    #[staticmethod]
    fn normal(mean: f64, sd: f64) -> PyResult<Self> {
        Self::checked(evidence::PriorSpec::normal(mean, sd))
    }

    #[staticmethod]
    fn grid(points: Vec<f64>, weights: Vec<f64>) -> PyResult<Self> {
        Self::checked(evidence::PriorSpec::grid(points, weights))
    }

    #[staticmethod]
    fn intrinsic() -> Self {
        PyPriorSpec { inner: evidence::PriorSpec::Intrinsic }
    }

    #[getter]
    fn is_data_dependent(&self) -> bool {
        self.inner.is_data_dependent()
    }

    fn __str__(&self) -> String {
        self.inner.to_string()
    }

    fn __repr__(&self) -> String {
        format!("PriorSpec('{}')", self.inner)
    }
}

impl PyPriorSpec {
    fn checked(inner: evidence::PriorSpec) -> PyResult<Self> {
        inner.validate_shape().py()?;
        Ok(PyPriorSpec { inner })
    }
}

#[pyfunction]
fn bf_bound(p: f64) -> PyResult<Option<f64>> {
    evidence::bf_bound(p).py()
}

#[pyfunction]
fn bayes_factor(model: &PyTestModel, statistic: f64, prior: &PyPriorSpec) -> PyResult<f64> {
    evidence::bayes_factor(&model.inner, statistic, &prior.inner).py()
}

#[pyfunction]
fn rejection_ratio(power: f64, alpha: f64) -> PyResult<f64> {
    design::rejection_ratio(power, alpha).py()
}

#[pyfunction]
fn pre_odds(prior_odds: f64, r_pre: f64) -> PyResult<f64> {
    design::pre_odds(prior_odds, r_pre).py()
}

#[pyfunction]
fn post_odds(prior_odds: f64, r_post: f64) -> PyResult<f64> {
    evidence::post_odds(prior_odds, r_post).py()
}

#[pyfunction]
fn solve_alpha(prior_odds: f64, avg_power: f64, target_o_pre: f64) -> PyResult<f64> {
    design::solve_alpha(prior_odds, avg_power, target_o_pre).py()
}

#[pyfunction]
fn solve_sample_size(model: &PyTestModel, effect: &PyPriorSpec, alpha: f64, target_r_pre: f64) -> PyResult<u64> {
    design::solve_sample_size(&model.inner, &effect.inner, alpha, target_r_pre).py()
}

#[pyfunction]
fn compute_power<'py>(
    py: Python<'py>,
    model: &PyTestModel,
    effect: &PyPriorSpec,
    alpha: f64,
) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &design::compute_power(&model.inner, &effect.inner, alpha).py()?)
}

#[pyfunction]
fn empirical_bayes_all<'py>(py: Python<'py>, model: &PyTestModel, statistic: f64) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &evidence::empirical_bayes_all(&model.inner, statistic).py()?)
}

#[pyfunction]
fn empirical_bayes_nonincreasing<'py>(
    py: Python<'py>,
    model: &PyTestModel,
    statistic: f64,
) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &evidence::empirical_bayes_nonincreasing(&model.inner, statistic).py()?)
}

#[pyfunction]
#[pyo3(signature = (model, priors, statistic = None, p = None, prior_odds = None))]
fn evidence_report<'py>(
    py: Python<'py>,
    model: &PyTestModel,
    priors: Vec<PyPriorSpec>,
    statistic: Option<f64>,
    p: Option<f64>,
    prior_odds: Option<f64>,
) -> PyResult<Bound<'py, PyAny>> {
    let priors: Vec<_> = priors.into_iter().map(|p| p.inner).collect();
    to_py(py, &evidence::evidence_report(&model.inner, statistic, p, &priors, prior_odds).py()?)
}

#[pyfunction]
fn verify_identities<'py>(
    py: Python<'py>,
    model: &PyTestModel,
    prior: &PyPriorSpec,
    alpha: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let region = RejectionRegion::for_model(&model.inner, alpha).py()?;
    to_py(
        py,
        &freqcheck::verify_identities(&model.inner, &prior.inner, &region, &Quadrature::default()).py()?,
    )
}

#[pyfunction]
#[pyo3(signature = (model, prior, alpha, n_runs = 1_000_000, seed = 0))]
fn mc_check_identity<'py>(
    py: Python<'py>,
    model: &PyTestModel,
    prior: &PyPriorSpec,
    alpha: f64,
    n_runs: u64,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let region = RejectionRegion::for_model(&model.inner, alpha).py()?;
    let seed = RngContract::new(seed, VERIFY_STREAM);
    let report = py.detach(|| freqcheck::mc_check_identity(&model.inner, &prior.inner, &region, n_runs, seed));
    to_py(py, &report.py()?)
}

/// Sequential sampling with extra batches. `start` is a z value for a
/// fixed first look; `None` simulates it under `drift` (0 for the null).
#[pyfunction]
#[pyo3(signature = (batches = 4, batch_fraction = 0.25, threshold = 0.05, sides = "two",
                    start = None, drift = 0.0, n_runs = 100_000, seed = 0, retain = 10))]
#[allow(clippy::too_many_arguments)]
fn simulate_stopping<'py>(
    py: Python<'py>,
    batches: usize,
    batch_fraction: f64,
    threshold: f64,
    sides: &str,
    start: Option<f64>,
    drift: f64,
    n_runs: u64,
    seed: u64,
    retain: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let start = match start {
        Some(z) => Start::FixedZ { z },
        None if drift == 0.0 => Start::SimulateNull,
        None => Start::SimulateEffect { d: drift },
    };
    let mut config = StoppingConfig::new(start, Vec::new(), threshold, self::sides(sides)?)
        .with_batches(batches, batch_fraction)
        .with_runs(n_runs, RngContract::new(seed, STOPPING_STREAM));
    config.retain = retain;
    let report = py.detach(|| stopping::simulate_sequential(&config));
    to_py(py, &report.py()?)
}

#[pyfunction]
fn bf_stopped_vs_fixed(
    final_mean: f64,
    total_n_fraction: f64,
    prior: &PyPriorSpec,
    model: &PyTestModel,
) -> PyResult<(f64, f64)> {
    stopping::bf_stopped_vs_fixed(final_mean, total_n_fraction, &prior.inner, &model.inner).py()
}

/// Annotates a study CSV with bounds and flags; returns the annotated CSV.
#[pyfunction]
fn annotate_studies(csv_text: &str) -> PyResult<String> {
    let records = reanalyze::parse_study_csv(csv_text.as_bytes()).py()?;
    reanalyze::emit_annotated_csv(&reanalyze::annotate_bounds(&records).py()?).py()
}

#[pymodule]
#[pyo3(name = "rejodds")]
fn rejodds_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTestModel>()?;
    m.add_class::<PyPriorSpec>()?;
    m.add_function(wrap_pyfunction!(bf_bound, m)?)?;
    m.add_function(wrap_pyfunction!(bayes_factor, m)?)?;
    m.add_function(wrap_pyfunction!(rejection_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(pre_odds, m)?)?;
    m.add_function(wrap_pyfunction!(post_odds, m)?)?;
    m.add_function(wrap_pyfunction!(solve_alpha, m)?)?;
    m.add_function(wrap_pyfunction!(solve_sample_size, m)?)?;
    m.add_function(wrap_pyfunction!(compute_power, m)?)?;
    m.add_function(wrap_pyfunction!(empirical_bayes_all, m)?)?;
    m.add_function(wrap_pyfunction!(empirical_bayes_nonincreasing, m)?)?;
    m.add_function(wrap_pyfunction!(evidence_report, m)?)?;
    m.add_function(wrap_pyfunction!(verify_identities, m)?)?;
    m.add_function(wrap_pyfunction!(mc_check_identity, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_stopping, m)?)?;
    m.add_function(wrap_pyfunction!(bf_stopped_vs_fixed, m)?)?;
    m.add_function(wrap_pyfunction!(annotate_studies, m)?)?;
    Ok(())
}
