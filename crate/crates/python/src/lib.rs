//! Python bindings. Configurations cross the boundary as JSON strings in the
//! same format the CLI reads, so a plan behaves identically in both places.

use nalgebra::DMatrix;
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

use trialcraft::config::{self, EstimatorConfig};
use trialcraft::data::{impute_missing, ingest_csv, TrialDataset};
use trialcraft::estimators::EstimateResult;
use trialcraft::simulation::{self, DgpSpec, SimulationSpec};
use trialcraft::{Error, ErrorKind};

create_exception!(pytrialcraft, TrialcraftError, PyException);
create_exception!(pytrialcraft, ConfigError, TrialcraftError);
create_exception!(pytrialcraft, DataError, TrialcraftError);
create_exception!(pytrialcraft, EstimationError, TrialcraftError);

fn to_py(e: Error) -> PyErr {
    let msg = e.to_string();
    match e.kind() {
        ErrorKind::Config => ConfigError::new_err(msg),
        ErrorKind::Data => DataError::new_err(msg),
        ErrorKind::Estimation => EstimationError::new_err(msg),
    }
}

fn parse<T: for<'de> serde::Deserialize<'de>>(json: &str, what: &str) -> PyResult<T> {
    serde_json::from_str(json).map_err(|e| ConfigError::new_err(format!("{what}: {e}")))
}

fn dump<T: serde::Serialize>(value: &T) -> PyResult<String> {
    serde_json::to_string(value).map_err(|e| TrialcraftError::new_err(e.to_string()))
}

/// Row-major nested lists to a matrix with `p` columns.
pub fn matrix_from_rows(rows: &[Vec<f64>], p: usize) -> Result<DMatrix<f64>, String> {
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != p) {
        return Err(format!("row {i} has {} values, expected {p}", r.len()));
    }
    Ok(DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]))
}

#[pyclass(name = "TrialDataset", module = "pytrialcraft", frozen)]
pub struct PyTrialDataset {
    inner: TrialDataset,
}

#[pymethods]
impl PyTrialDataset {
    /// `x` is a list of rows; column names default to `x1..xp`.
    #[new]
    #[pyo3(signature = (y, z, x, column_names = None))]
    fn new(y: Vec<f64>, z: Vec<u8>, x: Vec<Vec<f64>>, column_names: Option<Vec<String>>) -> PyResult<Self> {
        let p = column_names
            .as_ref()
            .map(|c| c.len())
            .or_else(|| x.first().map(|r| r.len()))
            .unwrap_or(0);
        let m = matrix_from_rows(&x, p).map_err(DataError::new_err)?;
        let names = column_names.unwrap_or_else(|| (1..=p).map(|j| format!("x{j}")).collect());
        Ok(Self {
            inner: TrialDataset::new(y, z, m, names).map_err(to_py)?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (path, outcome, arm, covariates, impute = false))]
    fn from_csv(path: &str, outcome: &str, arm: &str, covariates: Vec<String>, impute: bool) -> PyResult<Self> {
        let d = ingest_csv(path, outcome, arm, &covariates).map_err(to_py)?;
        let d = if impute { impute_missing(&d).map_err(to_py)? } else { d };
        Ok(Self { inner: d })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn p(&self) -> usize {
        self.inner.p()
    }

    #[getter]
    fn column_names(&self) -> Vec<String> {
        self.inner.column_names().to_vec()
    }

    #[getter]
    fn y(&self) -> Vec<f64> {
        self.inner.y().to_vec()
    }

    #[getter]
    fn z(&self) -> Vec<u8> {
        self.inner.z().to_vec()
    }

    fn x(&self) -> Vec<Vec<f64>> {
        let x = self.inner.x();
        (0..x.nrows()).map(|i| x.row(i).iter().copied().collect()).collect()
    }

    fn arm_size(&self, arm: u8) -> usize {
        self.inner.arm_size(arm)
    }

    fn __len__(&self) -> usize {
        self.inner.n()
    }

    fn __repr__(&self) -> String {
        format!(
            "TrialDataset(n={}, p={}, treated={})",
            self.inner.n(),
            self.inner.p(),
            self.inner.arm_size(1)
        )
    }
}

#[pyclass(name = "EstimateResult", module = "pytrialcraft", frozen)]
pub struct PyEstimateResult {
    inner: EstimateResult,
}

#[pymethods]
impl PyEstimateResult {
    #[getter]
    fn theta_hat(&self) -> f64 {
        self.inner.theta_hat
    }

    #[getter]
    fn mu1_hat(&self) -> f64 {
        self.inner.mu1_hat
    }

    #[getter]
    fn mu0_hat(&self) -> f64 {
        self.inner.mu0_hat
    }

    #[getter]
    fn se(&self) -> f64 {
        self.inner.se
    }

    #[getter]
    fn ci(&self) -> (f64, f64) {
        (self.inner.ci_low, self.inner.ci_high)
    }

    #[getter]
    fn method(&self) -> String {
        self.inner.method.clone()
    }

    #[getter]
    fn if_mu1(&self) -> Vec<f64> {
        self.inner.if_mu1.clone()
    }

    #[getter]
    fn if_mu0(&self) -> Vec<f64> {
        self.inner.if_mu0.clone()
    }

    #[getter]
    fn yhat1(&self) -> Vec<f64> {
        self.inner.yhat1.clone()
    }

    #[getter]
    fn yhat0(&self) -> Vec<f64> {
        self.inner.yhat0.clone()
    }

    #[getter]
    fn warnings(&self) -> Vec<String> {
        self.inner.diagnostics.warnings.clone()
    }

    fn covers(&self, theta: f64) -> bool {
        self.inner.covers(theta)
    }

    /// Full result, diagnostics included, as JSON.
    fn to_json(&self) -> PyResult<String> {
        dump(&self.inner)
    }

    fn __repr__(&self) -> String {
        format!(
            "EstimateResult(method={:?}, theta_hat={}, se={})",
            self.inner.method, self.inner.theta_hat, self.inner.se
        )
    }
}

/// Run the estimator described by `config_json` (an estimator configuration).
#[pyfunction]
fn estimate(dataset: &PyTrialDataset, config_json: &str) -> PyResult<PyEstimateResult> {
    let cfg: EstimatorConfig = parse(config_json, "config")?;
    let inner = config::estimate(&dataset.inner, &cfg).map_err(to_py)?;
    Ok(PyEstimateResult { inner })
}

/// Check a configuration without data; returns its advisory warnings.
#[pyfunction]
fn validate_config(config_json: &str) -> PyResult<Vec<String>> {
    let cfg: EstimatorConfig = parse(config_json, "config")?;
    cfg.validate().map_err(to_py)
}

#[pyfunction]
fn generate_dataset(dgp_json: &str, seed: u64) -> PyResult<PyTrialDataset> {
    let spec: DgpSpec = parse(dgp_json, "dgp")?;
    Ok(PyTrialDataset {
        inner: simulation::generate_dataset(&spec, seed).map_err(to_py)?,
    })
}

/// True effect of a data-generating process and its source.
#[pyfunction]
fn true_theta(dgp_json: &str) -> PyResult<(f64, String)> {
    let spec: DgpSpec = parse(dgp_json, "dgp")?;
    let (theta, source) = spec.resolve_true_theta().map_err(to_py)?;
    Ok((theta, dump(&source)?.trim_matches('"').to_string()))
}

/// Run a simulation spec and return the report as JSON.
#[pyfunction]
#[pyo3(signature = (spec_json, threads = None))]
fn run_monte_carlo(py: Python<'_>, spec_json: &str, threads: Option<usize>) -> PyResult<String> {
    let spec: SimulationSpec = parse(spec_json, "spec")?;
    let run = py.detach(|| simulation::run_monte_carlo(&spec, threads)).map_err(to_py)?;
    dump(&run.report)
}

/// Bias, coverage and related summaries as JSON.
#[pyfunction]
fn compute_metrics(estimates: Vec<f64>, ses: Vec<f64>, true_theta: f64) -> PyResult<String> {
    dump(&simulation::compute_metrics(&estimates, &ses, true_theta).map_err(to_py)?)
}

#[pymodule]
fn pytrialcraft(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("TrialcraftError", py.get_type::<TrialcraftError>())?;
    m.add("ConfigError", py.get_type::<ConfigError>())?;
    m.add("DataError", py.get_type::<DataError>())?;
    m.add("EstimationError", py.get_type::<EstimationError>())?;
    m.add_class::<PyTrialDataset>()?;
    m.add_class::<PyEstimateResult>()?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    m.add_function(wrap_pyfunction!(validate_config, m)?)?;
    m.add_function(wrap_pyfunction!(generate_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(true_theta, m)?)?;
    m.add_function(wrap_pyfunction!(run_monte_carlo, m)?)?;
    m.add_function(wrap_pyfunction!(compute_metrics, m)?)?;
    Ok(())
}
