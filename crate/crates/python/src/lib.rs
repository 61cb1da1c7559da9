//! Python bindings: fit or load a model, search for robust counterfactuals and
//! run the model diagnostics. Reports come back as plain dicts.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use cgnc_recourse::cgnc::fit;
use cgnc_recourse::data::{load_csv, percentile_bounds};
use cgnc_recourse::diagnostics::{check_model, CheckOptions};
use cgnc_recourse::experiment::{learn_structure, StructureSpec};
use cgnc_recourse::recourse::{baseline_counterfactual, coverage_ratio, find_counterfactual, model_bounds, RecourseProblem};
use cgnc_recourse::{Backend, CgncModel, Error, FeatureBounds, NormOrder, RecourseConfig};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        Error::Solver(_) | Error::EmptyScenarioSet => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn json_to_dict<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

fn parse<T: std::str::FromStr<Err = Error>>(text: &str) -> PyResult<T> {
    text.parse().map_err(to_py)
}

/// Fitted conditional Gaussian network classifier.
#[pyclass(name = "Model", module = "cgnc_recourse", skip_from_py_object)]
#[derive(Clone)]
struct PyModel {
    inner: CgncModel,
}

#[pymethods]
impl PyModel {
    /// Learns a structure ("nb", "tan" or "ban:<file>") from a CSV and fits it.
    #[staticmethod]
    #[pyo3(signature = (path, label = "class", structure = "nb", max_in_degree = None))]
    fn fit(path: PathBuf, label: &str, structure: &str, max_in_degree: Option<usize>) -> PyResult<Self> {
        let ds = load_csv(&path, label).map_err(to_py)?;
        let dag = learn_structure(&ds, &parse::<StructureSpec>(structure)?, max_in_degree).map_err(to_py)?;
        Ok(Self {
            inner: fit(&ds, &dag).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: CgncModel::load(path).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: CgncModel::from_json(text).map_err(to_py)?,
        })
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(to_py)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(path).map_err(to_py)
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn feature_names(&self) -> Vec<String> {
        self.inner.feature_names().to_vec()
    }

    /// Directed edges as (parent, child) index pairs.
    #[getter]
    fn edges(&self) -> Vec<(usize, usize)> {
        self.inner.structure().edges()
    }

    /// Log-odds `log P(1, x) − log P(0, x)`.
    fn decision(&self, x: Vec<f64>) -> PyResult<f64> {
        self.check_len(&x)?;
        Ok(self.inner.decision_h(&x))
    }

    fn posterior(&self, x: Vec<f64>) -> PyResult<f64> {
        self.check_len(&x)?;
        Ok(self.inner.posterior_1(&x))
    }

    #[pyo3(signature = (x, tau = 0.5))]
    fn predict(&self, x: Vec<f64>, tau: f64) -> PyResult<u8> {
        self.check_len(&x)?;
        self.inner.classify(&x, tau).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(n={}, edges={})",
            self.inner.n(),
            self.inner.structure().edge_count()
        )
    }
}

impl PyModel {
    fn check_len(&self, x: &[f64]) -> PyResult<()> {
        if x.len() != self.inner.n() {
            return Err(PyValueError::new_err(format!(
                "expected {} features, got {}",
                self.inner.n(),
                x.len()
            )));
        }
        Ok(())
    }
}

fn resolve_bounds(
    model: &CgncModel,
    data: Option<PathBuf>,
    label: &str,
    bounds: Option<(Vec<f64>, Vec<f64>)>,
) -> PyResult<FeatureBounds> {
    match (bounds, data) {
        (Some((lo, hi)), _) => FeatureBounds::new(lo, hi).map_err(to_py),
        (None, Some(path)) => percentile_bounds(&load_csv(path, label).map_err(to_py)?, 0.05, 0.95).map_err(to_py),
        (None, None) => model_bounds(model, 3.0).map_err(to_py),
    }
}

/// Robust counterfactual for `factual`. The search box is `bounds` when given,
/// else the 5–95 percentile box of `data`, else mean ± 3 sd of the model.
#[pyfunction]
#[pyo3(signature = (
    model, factual, gamma = 0.01, *, epsilon = 1e-3, tau = 0.5, p_norm = "inf", backend = "milp",
    m_init = 20, nu = 0.5, max_iter = 50, time_limit = 3600.0, gap = 0.01, starts = 16, seed = 0,
    data = None, label = "class", bounds = None, baseline = false
))]
#[allow(clippy::too_many_arguments)]
fn counterfactual<'py>(
    py: Python<'py>,
    model: &PyModel,
    factual: Vec<f64>,
    gamma: f64,
    epsilon: f64,
    tau: f64,
    p_norm: &str,
    backend: &str,
    m_init: usize,
    nu: f64,
    max_iter: usize,
    time_limit: f64,
    gap: f64,
    starts: usize,
    seed: u64,
    data: Option<PathBuf>,
    label: &str,
    bounds: Option<(Vec<f64>, Vec<f64>)>,
    baseline: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let bounds = resolve_bounds(&model.inner, data, label, bounds)?;
    let problem = RecourseProblem::new(model.inner.clone(), parse::<NormOrder>(p_norm)?, bounds).map_err(to_py)?;
    let mut config = RecourseConfig {
        gamma,
        epsilon,
        tau,
        backend: parse::<Backend>(backend)?,
        m_init,
        nu,
        max_iter,
        time_budget: time_limit,
        ..RecourseConfig::default()
    };
    config.milp.gap_tol = gap;
    config.milp.time_limit = time_limit;
    config.local.starts = starts;
    config.local.seed = seed;
    let result = py
        .detach(|| {
            if baseline {
                baseline_counterfactual(&problem, &factual, &config)
            } else {
                find_counterfactual(&problem, &factual, &config)
            }
        })
        .map_err(to_py)?;
    let text = serde_json::to_string(&result).map_err(|e| to_py(e.into()))?;
    json_to_dict(py, &text)
}

/// Largest fraction of the budget `gamma` that `x` withstands.
#[pyfunction]
#[pyo3(signature = (model, x, gamma = 0.01, *, tau = 0.5, p_norm = "inf", data = None, label = "class", bounds = None))]
#[allow(clippy::too_many_arguments)]
fn coverage(
    py: Python<'_>,
    model: &PyModel,
    x: Vec<f64>,
    gamma: f64,
    tau: f64,
    p_norm: &str,
    data: Option<PathBuf>,
    label: &str,
    bounds: Option<(Vec<f64>, Vec<f64>)>,
) -> PyResult<f64> {
    let bounds = resolve_bounds(&model.inner, data, label, bounds)?;
    let problem = RecourseProblem::new(model.inner.clone(), parse::<NormOrder>(p_norm)?, bounds).map_err(to_py)?;
    let config = RecourseConfig {
        gamma,
        tau,
        ..RecourseConfig::default()
    };
    py.detach(|| coverage_ratio(&problem, &x, &config)).map_err(to_py)
}

/// Lipschitz constant, iteration bound, spectra and consistency errors.
#[pyfunction]
#[pyo3(signature = (model, radius = None, *, p_norm = "inf", epsilon = 1e-3, seed = 0, data = None, label = "class"))]
fn check<'py>(
    py: Python<'py>,
    model: &PyModel,
    radius: Option<f64>,
    p_norm: &str,
    epsilon: f64,
    seed: u64,
    data: Option<PathBuf>,
    label: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let bounds = match (&data, radius) {
        (Some(_), _) | (None, None) => Some(resolve_bounds(&model.inner, data, label, None)?),
        (None, Some(_)) => None,
    };
    let opts = CheckOptions {
        p: parse::<NormOrder>(p_norm)?,
        radius,
        bounds,
        epsilon,
        seed,
        ..CheckOptions::default()
    };
    let report = check_model(&model.inner, &opts).map_err(to_py)?;
    let text = serde_json::to_string(&report).map_err(|e| to_py(e.into()))?;
    json_to_dict(py, &text)
}

#[pymodule(name = "cgnc_recourse")]
fn init_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(counterfactual, m)?)?;
    m.add_function(wrap_pyfunction!(coverage, m)?)?;
    m.add_function(wrap_pyfunction!(check, m)?)?;
    Ok(())
}
