//! Python bindings for the `bridgeirt` sampler.

use std::collections::BTreeMap;
use std::path::PathBuf;

use nalgebra::DMatrix;
use pyo3::exceptions::{PyArithmeticError, PyIOError, PyKeyError, PyValueError};
use pyo3::prelude::*;
use rand::SeedableRng;

use bridgeirt::bridge::{self as bridge_block, WorkingResponse};
use bridgeirt::data::{load_groups, AnchorSpec};
use bridgeirt::error::Error;
use bridgeirt::oracle::{generate, Scenario};
use bridgeirt::polya_gamma::draw_pg1;
use bridgeirt::runner::{self, ChainDraws, Manifest};
use bridgeirt::summary;

fn to_py(e: Error) -> PyErr {
    match &e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        _ if e.is_numeric() => PyArithmeticError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Run length, seed and prior settings.
#[pyclass(module = "bridgeirt", name = "RunConfig", from_py_object)]
#[derive(Clone)]
struct PyRunConfig {
    inner: runner::RunConfig,
}

#[pymethods]
impl PyRunConfig {
    /// Starts from the named preset and applies any overrides.
    #[new]
    #[pyo3(signature = (preset = "default", *, chains = None, burnin = None, kept = None, thin = None, seed = None, impute_missing = None))]
    fn new(
        preset: &str,
        chains: Option<usize>,
        burnin: Option<usize>,
        kept: Option<usize>,
        thin: Option<usize>,
        seed: Option<u64>,
        impute_missing: Option<bool>,
    ) -> PyResult<Self> {
        let mut c = runner::RunConfig::preset(preset)
            .ok_or_else(|| PyValueError::new_err(format!("unknown preset {preset:?}")))?;
        c.n_chains = chains.unwrap_or(c.n_chains);
        c.n_burnin = burnin.unwrap_or(c.n_burnin);
        c.n_kept = kept.unwrap_or(c.n_kept);
        c.thin = thin.unwrap_or(c.thin);
        c.seed = seed.unwrap_or(c.seed);
        c.impute_missing = impute_missing.unwrap_or(c.impute_missing);
        c.validate().map_err(to_py)?;
        Ok(Self { inner: c })
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        runner::RunConfig::from_toml_str(text).map(|inner| Self { inner }).map_err(to_py)
    }

    fn to_toml(&self) -> String {
        self.inner.to_toml_string()
    }

    #[getter]
    fn chains(&self) -> usize {
        self.inner.n_chains
    }

    #[getter]
    fn burnin(&self) -> usize {
        self.inner.n_burnin
    }

    #[getter]
    fn kept(&self) -> usize {
        self.inner.n_kept
    }

    #[getter]
    fn thin(&self) -> usize {
        self.inner.thin
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    fn __repr__(&self) -> String {
        let c = &self.inner;
        format!(
            "RunConfig(chains={}, burnin={}, kept={}, thin={}, seed={})",
            c.n_chains, c.n_burnin, c.n_kept, c.thin, c.seed
        )
    }
}

/// Votes, vote types, covariates and anchors of one chamber.
#[pyclass(module = "bridgeirt", name = "Dataset", frozen)]
struct PyDataset {
    data: bridgeirt::data::Dataset,
    anchors: AnchorSpec,
}

#[pymethods]
impl PyDataset {
    /// Reads the CSV/JSON inputs of a fit; `anchor_values` overrides the
    /// targets stored in the anchor file.
    #[staticmethod]
    #[pyo3(signature = (votes, types, anchors, covariates = None, anchor_values = None))]
    fn load(
        votes: PathBuf,
        types: PathBuf,
        anchors: PathBuf,
        covariates: Option<PathBuf>,
        anchor_values: Option<(f64, f64)>,
    ) -> PyResult<Self> {
        let mut cfg = runner::RunConfig::default();
        cfg.anchors.file = Some(anchors);
        cfg.anchors.values = anchor_values;
        let (data, anchors) =
            bridgeirt::cli::load_inputs(&votes, &types, covariates.as_deref(), &cfg).map_err(to_py)?;
        Ok(Self { data, anchors })
    }

    #[getter]
    fn n_legislators(&self) -> usize {
        self.data.n_legislators()
    }

    #[getter]
    fn n_bills(&self) -> usize {
        self.data.n_bills()
    }

    #[getter]
    fn n_covariates(&self) -> usize {
        self.data.n_covariates()
    }

    #[getter]
    fn legislator_ids(&self) -> Vec<String> {
        self.data.votes.legislator_ids().to_vec()
    }

    #[getter]
    fn covariate_names(&self) -> Vec<String> {
        self.data.covariates.column_names().to_vec()
    }

    /// Number of missing vote cells.
    #[getter]
    fn n_missing(&self) -> usize {
        self.data.votes.n_missing()
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(legislators={}, bills={}, covariates={})",
            self.n_legislators(),
            self.n_bills(),
            self.n_covariates()
        )
    }
}

/// A completed run: manifest plus every chain's stored draws.
#[pyclass(module = "bridgeirt", name = "Run", frozen)]
struct PyRun {
    dir: PathBuf,
    manifest: Manifest,
    chains: Vec<ChainDraws>,
}

impl PyRun {
    fn chain(&self, chain: usize) -> PyResult<&ChainDraws> {
        self.chains
            .get(chain)
            .ok_or_else(|| PyValueError::new_err(format!("no chain {chain}; run has {}", self.chains.len())))
    }
}

#[pymethods]
impl PyRun {
    #[staticmethod]
    fn load(dir: PathBuf) -> PyResult<Self> {
        let (manifest, chains) = runner::load_run(&dir).map_err(to_py)?;
        Ok(Self { dir, manifest, chains })
    }

    #[getter]
    fn directory(&self) -> PathBuf {
        self.dir.clone()
    }

    #[getter]
    fn n_chains(&self) -> usize {
        self.chains.len()
    }

    #[getter]
    fn n_draws(&self) -> usize {
        self.chains.first().map_or(0, ChainDraws::n_draws)
    }

    #[getter]
    fn legislator_ids(&self) -> Vec<String> {
        self.manifest.legislator_ids.clone()
    }

    #[getter]
    fn covariate_names(&self) -> Vec<String> {
        self.manifest.covariate_names.clone()
    }

    /// Names of the stored quantities.
    fn quantities(&self) -> Vec<String> {
        self.chains
            .first()
            .map(|c| c.quantities.iter().map(|q| q.name.clone()).collect())
            .unwrap_or_default()
    }

    /// Draws of `name` in `chain`, one row per draw.
    #[pyo3(signature = (name, chain = 0))]
    fn draws(&self, name: &str, chain: usize) -> PyResult<Vec<Vec<f64>>> {
        let q = self
            .chain(chain)?
            .get(name)
            .ok_or_else(|| PyKeyError::new_err(name.to_string()))?;
        Ok((0..q.count()).map(|s| q.draw(s).to_vec()).collect())
    }

    /// Posterior mean of `name`, pooled over chains.
    fn posterior_mean(&self, name: &str) -> PyResult<Vec<f64>> {
        summary::posterior_mean(&self.chains, name).map_err(to_py)
    }

    /// Posterior inclusion probability of each covariate.
    fn pip(&self) -> PyResult<Vec<f64>> {
        summary::compute_pip(&self.chains).map_err(to_py)
    }

    /// `(series, R-hat)` for every monitored series.
    fn rhat(&self) -> PyResult<Vec<(String, f64)>> {
        let entries = runner::monitored_rhat(&self.chains).map_err(to_py)?;
        Ok(entries.iter().map(|e| (e.label(), e.rhat)).collect())
    }

    /// Full summary report as a JSON string.
    #[pyo3(signature = (groups = None, increments = None))]
    fn summary_json(&self, groups: Option<PathBuf>, increments: Option<BTreeMap<String, f64>>) -> PyResult<String> {
        let groups = groups
            .map(|p| load_groups(&p, &self.manifest.legislator_ids))
            .transpose()
            .map_err(to_py)?;
        let report = summary::summarize(&self.chains, &self.manifest, groups.as_deref(), &increments.unwrap_or_default())
            .map_err(to_py)?;
        serde_json::to_string(&report).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    /// Writes the summary tables into `out`.
    #[pyo3(signature = (out, groups = None, increments = None))]
    fn export(&self, out: PathBuf, groups: Option<PathBuf>, increments: Option<BTreeMap<String, f64>>) -> PyResult<()> {
        let groups = groups
            .map(|p| load_groups(&p, &self.manifest.legislator_ids))
            .transpose()
            .map_err(to_py)?;
        let report = summary::summarize(&self.chains, &self.manifest, groups.as_deref(), &increments.unwrap_or_default())
            .map_err(to_py)?;
        summary::export_report(&report, &self.chains, &self.manifest, groups.as_deref(), &out).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("Run({:?}, chains={}, draws={})", self.dir, self.n_chains(), self.n_draws())
    }
}

/// Runs the sampler and writes the run directory `out`.
#[pyfunction]
fn fit(py: Python<'_>, dataset: &PyDataset, config: &PyRunConfig, out: PathBuf) -> PyResult<PyRun> {
    let cfg = config.inner.clone();
    py.detach(|| {
        let results = runner::run_chains(&dataset.data, Some(&dataset.anchors), &cfg)?;
        runner::write_run(&out, &dataset.data, Some(&dataset.anchors), &cfg, &results)
    })
    .map_err(to_py)?;
    PyRun::load(out)
}

/// Writes a synthetic chamber for a named scenario; returns the number of
/// true bridges.
#[pyfunction]
#[pyo3(signature = (scenario, out, seed = 1))]
fn simulate(scenario: &str, out: PathBuf, seed: u64) -> PyResult<usize> {
    let sc = Scenario::preset(scenario).ok_or_else(|| PyValueError::new_err(format!("unknown scenario {scenario:?}")))?;
    let truth = generate(&sc, &mut rand_chacha::ChaCha8Rng::seed_from_u64(seed)).map_err(to_py)?;
    truth.write(&out).map_err(to_py)?;
    Ok(truth.ideal.n_bridges())
}

#[pyfunction]
fn scenarios() -> Vec<&'static str> {
    Scenario::PRESETS.to_vec()
}

/// `n` draws from PG(1, c).
#[pyfunction]
#[pyo3(signature = (c, n, seed = 0))]
fn polya_gamma(c: f64, n: usize, seed: u64) -> PyResult<Vec<f64>> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| draw_pg1(c, &mut rng).map_err(to_py)).collect()
}

/// Bridge probability for each covariate row.
#[pyfunction]
fn bridge_probability(eta0: f64, eta: Vec<f64>, x: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
    x.iter()
        .map(|row| {
            if row.len() != eta.len() {
                return Err(PyValueError::new_err("row length differs from eta"));
            }
            Ok(bridge_block::bridge_probability(eta0, &eta, row))
        })
        .collect()
}

/// Log Bayes factor of model `xi` against the intercept-only model given
/// Pólya-Gamma weights `nu` and bridge indicators `zeta`, with g-prior
/// scale `g`. Columns of `x` should be centered.
#[pyfunction]
fn log_bayes_factor(xi: Vec<bool>, nu: Vec<f64>, zeta: Vec<bool>, eta0: f64, x: Vec<Vec<f64>>, g: f64) -> PyResult<f64> {
    let n = x.len();
    let p = xi.len();
    if nu.len() != n || zeta.len() != n || x.iter().any(|r| r.len() != p) {
        return Err(PyValueError::new_err("xi, nu, zeta and x have inconsistent shapes"));
    }
    let m = DMatrix::from_fn(n, p, |i, k| x[i][k]);
    let wr = WorkingResponse::from_zeta(&nu, &zeta, eta0);
    bridge_block::log_bayes_factor(&xi, &wr, &m, g).map_err(to_py)
}

#[pymodule(name = "bridgeirt")]
pub fn bridgeirt_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyRunConfig>()?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyRun>()?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(scenarios, m)?)?;
    m.add_function(wrap_pyfunction!(polya_gamma, m)?)?;
    m.add_function(wrap_pyfunction!(bridge_probability, m)?)?;
    m.add_function(wrap_pyfunction!(log_bayes_factor, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
