//! Python bindings: graphs, bandit instances, the robust and private
//! estimators, the regret bounds, and the config-driven experiment runner.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use coop_bandit::experiment::{self, ExperimentConfig};
use coop_bandit::metrics::{self, PrivateBoundForm};
use coop_bandit::{Error, GraphTerms};

fn to_py(err: Error) -> PyErr {
    match err {
        Error::Io(e) => PyIOError::new_err(e.to_string()),
        Error::Csv(e) => PyIOError::new_err(e.to_string()),
        Error::GenerationExhausted { .. } | Error::InstanceExhausted { .. } => PyRuntimeError::new_err(err.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn form(name: &str) -> PyResult<PrivateBoundForm> {
    match name {
        "sigma2" => Ok(PrivateBoundForm::SigmaSquared),
        "unit" => Ok(PrivateBoundForm::Unit),
        other => Err(PyValueError::new_err(format!(
            "unknown bound form {other:?}; use 'sigma2' or 'unit'"
        ))),
    }
}

/// Undirected connected graph on nodes `0..node_count`.
#[pyclass(name = "Graph", module = "coop_bandit")]
struct PyGraph(coop_bandit::Graph);

#[pymethods]
impl PyGraph {
    #[new]
    fn new(node_count: usize, edges: Vec<(usize, usize)>) -> PyResult<Self> {
        coop_bandit::Graph::from_edges(node_count, &edges)
            .map(PyGraph)
            .map_err(to_py)
    }

    #[staticmethod]
    fn erdos_renyi(node_count: usize, p: f64, seed: u64) -> PyResult<Self> {
        coop_bandit::Graph::erdos_renyi(node_count, p, seed)
            .map(PyGraph)
            .map_err(to_py)
    }

    #[staticmethod]
    fn complete(n: usize) -> PyResult<Self> {
        if n == 0 {
            return Err(PyValueError::new_err("need at least one node"));
        }
        Ok(PyGraph(coop_bandit::Graph::complete(n)))
    }

    #[staticmethod]
    fn path(n: usize) -> PyResult<Self> {
        if n == 0 {
            return Err(PyValueError::new_err("need at least one node"));
        }
        Ok(PyGraph(coop_bandit::Graph::path(n)))
    }

    #[staticmethod]
    fn cycle(n: usize) -> PyResult<Self> {
        coop_bandit::Graph::cycle(n).map(PyGraph).map_err(to_py)
    }

    #[staticmethod]
    fn parse_edge_list(text: &str) -> PyResult<Self> {
        coop_bandit::Graph::parse_edge_list(text).map(PyGraph).map_err(to_py)
    }

    fn to_edge_list(&self) -> String {
        self.0.to_edge_list()
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.0.node_count()
    }

    #[getter]
    fn edge_count(&self) -> usize {
        self.0.edge_count()
    }

    fn edges(&self) -> Vec<(usize, usize)> {
        self.0.edges().collect()
    }

    fn neighbors(&self, node: usize) -> PyResult<Vec<usize>> {
        if node >= self.0.node_count() {
            return Err(PyValueError::new_err(format!("node {node} out of range")));
        }
        Ok(self.0.neighbors(node).to_vec())
    }

    fn diameter(&self) -> u32 {
        self.0.diameter()
    }

    /// All-pairs hop distances as a nested list.
    fn distances(&self) -> Vec<Vec<u32>> {
        let d = self.0.distances();
        let n = d.node_count();
        (0..n).map(|i| (0..n).map(|j| d.get(i, j)).collect()).collect()
    }

    fn power_graph(&self, gamma: u32) -> PyResult<Self> {
        self.0.power_graph(gamma).map(PyGraph).map_err(to_py)
    }

    #[pyo3(signature = (seed = 0))]
    fn greedy_clique_cover(&self, seed: u64) -> Vec<Vec<usize>> {
        self.0.greedy_clique_cover(seed).blocks().to_vec()
    }

    fn __repr__(&self) -> String {
        format!(
            "Graph(node_count={}, edge_count={})",
            self.0.node_count(),
            self.0.edge_count()
        )
    }
}

/// Bernoulli bandit instance.
#[pyclass(name = "BanditInstance", module = "coop_bandit")]
struct PyBanditInstance(coop_bandit::BanditInstance);

#[pymethods]
impl PyBanditInstance {
    #[new]
    #[pyo3(signature = (means, sigma = 0.5))]
    fn new(means: Vec<f64>, sigma: f64) -> PyResult<Self> {
        coop_bandit::BanditInstance::bernoulli(means)
            .and_then(|i| i.with_sigma(sigma))
            .map(PyBanditInstance)
            .map_err(to_py)
    }

    #[staticmethod]
    #[pyo3(signature = (arms, lo, hi, seed, separation = 1e-3))]
    fn random(arms: usize, lo: f64, hi: f64, seed: u64, separation: f64) -> PyResult<Self> {
        coop_bandit::BanditInstance::random(arms, lo, hi, separation, seed)
            .map(PyBanditInstance)
            .map_err(to_py)
    }

    #[getter]
    fn means(&self) -> Vec<f64> {
        self.0.means().to_vec()
    }

    #[getter]
    fn sigma(&self) -> f64 {
        self.0.sigma()
    }

    #[getter]
    fn best_arm(&self) -> usize {
        self.0.best_arm()
    }

    /// Per-arm gaps to the best mean.
    fn gaps(&self) -> Vec<f64> {
        self.0.gaps().deltas
    }

    /// Asymptotic lower bound on group regret at `horizon`, for one agent.
    fn lower_bound(&self, horizon: u64) -> f64 {
        coop_bandit::lower_bound(&self.0, horizon)
    }

    /// Private multi-agent UCB upper bound for a graph whose power graph has
    /// a clique cover of `cover_size` blocks.
    #[pyo3(signature = (agents, gamma, cover_size, epsilon, horizon, form = "sigma2"))]
    fn private_upper_bound(
        &self,
        agents: usize,
        gamma: u32,
        cover_size: usize,
        epsilon: f64,
        horizon: u64,
        form: &str,
    ) -> PyResult<f64> {
        let terms = GraphTerms {
            agents,
            gamma,
            cover_size,
        };
        metrics::private_upper_bound(&self.0, &terms, epsilon, horizon, self::form(form)?).map_err(to_py)
    }

    /// Byzantine-robust multi-agent UCB upper bound. Raises `ValueError` when
    /// `eps_c` is at or above `Delta_min / (2 sigma)`.
    fn byzantine_upper_bound(
        &self,
        agents: usize,
        gamma: u32,
        cover_size: usize,
        eps_c: f64,
        horizon: u64,
    ) -> PyResult<f64> {
        let terms = GraphTerms {
            agents,
            gamma,
            cover_size,
        };
        metrics::byzantine_upper_bound(&self.0, &terms, eps_c, self.0.sigma(), horizon).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("BanditInstance(means={:?}, sigma={})", self.0.means(), self.0.sigma())
    }
}

/// Trimmed mean of `samples` in arrival order.
#[pyfunction]
fn trimmed_mean(samples: Vec<f64>, eps_c: f64, delta: f64) -> PyResult<f64> {
    coop_bandit::trimmed_mean(&samples, eps_c, delta)
        .map(|t| t.mean)
        .map_err(to_py)
}

#[pyfunction]
fn robust_radius(sigma: f64, eps_c: f64, delta: f64, n: usize) -> PyResult<f64> {
    if n == 0 {
        return Err(PyValueError::new_err("n must be at least 1"));
    }
    Ok(coop_bandit::robust_radius(sigma, eps_c, delta, n))
}

/// Pull counts at which a private agent refreshes its broadcast mean.
#[pyfunction]
fn release_points(epsilon: f64, v: f64, horizon: u64) -> PyResult<Vec<u64>> {
    coop_bandit::IntervalSchedule::build(epsilon, v, horizon)
        .map(|s| s.points().to_vec())
        .map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (epsilon, v, t, distance, delta_prime = 0.01))]
fn privacy_loss(epsilon: f64, v: f64, t: u64, distance: u64, delta_prime: f64) -> PyResult<f64> {
    coop_bandit::privacy_loss(epsilon, v, t, distance, delta_prime).map_err(to_py)
}

fn load_config(text: &str, seed: Option<u64>, replicates: Option<u32>) -> PyResult<ExperimentConfig> {
    let mut cfg = ExperimentConfig::parse(text).map_err(to_py)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(r) = replicates {
        cfg.replicates = r;
    }
    cfg.validate().map_err(to_py)?;
    Ok(cfg)
}

/// Runs the experiment described by config `text`.
///
/// Returns `{"axis": "t" | "gamma", "rows": [(algorithm, x, mean, std_err,
/// ci_lo, ci_hi), ...], "bounds": [(replicate, algorithm, gamma, regret,
/// upper_or_None), ...]}`. With `out`, the CSV files and manifest are
/// written there too.
#[pyfunction]
#[pyo3(signature = (text, seed = None, replicates = None, out = None))]
fn run_experiment<'py>(
    py: Python<'py>,
    text: &str,
    seed: Option<u64>,
    replicates: Option<u32>,
    out: Option<PathBuf>,
) -> PyResult<Bound<'py, pyo3::types::PyDict>> {
    let cfg = load_config(text, seed, replicates)?;
    let result = py.detach(|| experiment::run_experiment(&cfg)).map_err(to_py)?;
    if let Some(dir) = out {
        experiment::write_outputs(&result, &dir).map_err(to_py)?;
    }
    let dict = pyo3::types::PyDict::new(py);
    dict.set_item("axis", result.table.axis.column())?;
    let rows: Vec<(String, u64, f64, f64, f64, f64)> = result
        .table
        .rows
        .iter()
        .map(|r| (r.algorithm.clone(), r.x, r.mean_regret, r.std_err, r.ci_lo, r.ci_hi))
        .collect();
    dict.set_item("rows", rows)?;
    let bounds: Vec<(u32, String, u32, f64, Option<f64>)> = result
        .bounds
        .iter()
        .map(|b| (b.replicate, b.algorithm.clone(), b.gamma, b.regret, b.upper))
        .collect();
    dict.set_item("bounds", bounds)?;
    Ok(dict)
}

/// Text report of graph statistics, preconditions and bounds for replicate 0.
#[pyfunction]
fn describe(text: &str) -> PyResult<String> {
    let cfg = load_config(text, None, None)?;
    experiment::describe(&cfg).map(|d| d.text).map_err(to_py)
}

#[pymodule]
#[pyo3(name = "coop_bandit")]
fn coop_bandit_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", experiment::VERSION)?;
    m.add_class::<PyGraph>()?;
    m.add_class::<PyBanditInstance>()?;
    m.add_function(wrap_pyfunction!(trimmed_mean, m)?)?;
    m.add_function(wrap_pyfunction!(robust_radius, m)?)?;
    m.add_function(wrap_pyfunction!(release_points, m)?)?;
    m.add_function(wrap_pyfunction!(privacy_loss, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(describe, m)?)?;
    Ok(())
}
