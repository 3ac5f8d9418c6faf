//! Python bindings. The module is importable as `hetnet_afra`.

use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use hetnet_afra::afra::{self, Policy, SimConfig};
use hetnet_afra::harness::{self, DdnumConfig, EngineConfig, GammaChoice};
use hetnet_afra::{ddnum, model, oracle, scenario, waterfill, Allocation, Error};

create_exception!(hetnet_afra, NoFeasibleGamma, PyRuntimeError);

fn to_py(e: Error) -> PyErr {
    match e {
        Error::NoFeasibleGamma => NoFeasibleGamma::new_err(e.to_string()),
        Error::NoConvergence { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn parse_policy(name: &str) -> Result<Policy, String> {
    match name {
        "random" => Ok(Policy::RandomSequential),
        "priority" => Ok(Policy::PriorityByGain),
        other => Err(format!("unknown policy `{other}`, expected `random` or `priority`")),
    }
}

fn parse_gamma(gamma: Option<f64>) -> GammaChoice {
    gamma.map_or(GammaChoice::Auto, GammaChoice::Fixed)
}

#[pyclass(name = "Topology", module = "hetnet_afra", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyTopology {
    inner: hetnet_afra::Topology,
}

#[pymethods]
impl PyTopology {
    /// `rates[i][j]` is the PHY rate from client `i` to base station `j`
    /// (0 when unreachable). Weights default to 1.
    #[new]
    #[pyo3(signature = (rates, weights=None))]
    fn new(rates: Vec<Vec<f64>>, weights: Option<Vec<f64>>) -> PyResult<Self> {
        let weights = weights.unwrap_or_else(|| vec![1.0; rates.len()]);
        let inner = hetnet_afra::Topology::new(rates, weights).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = hetnet_afra::Topology::from_json(text).map_err(to_py)?;
        Ok(Self { inner })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn num_clients(&self) -> usize {
        self.inner.num_clients()
    }

    #[getter]
    fn num_bss(&self) -> usize {
        self.inner.num_bss()
    }

    #[getter]
    fn rates(&self) -> Vec<Vec<f64>> {
        self.inner.rates.to_rows()
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.inner.weights.clone()
    }

    #[getter]
    fn bs_tech(&self) -> Vec<String> {
        self.inner.bs_tech.clone()
    }

    fn __repr__(&self) -> String {
        format!(
            "Topology(num_clients={}, num_bss={})",
            self.inner.num_clients(),
            self.inner.num_bss()
        )
    }
}

#[pyclass(name = "AfraResult", module = "hetnet_afra", frozen, get_all)]
struct AfraResult {
    steps_to_eq: usize,
    flagged: bool,
    final_potential: f64,
    pf_index: Option<f64>,
    total_messages: u64,
    throughput: Vec<f64>,
    theta: Vec<Option<f64>>,
    allocation: Vec<Vec<f64>>,
    /// The same JSON document `afra run-afra` writes.
    summary_json: String,
    trace_csv: String,
}

#[pyclass(name = "DdnumResult", module = "hetnet_afra", frozen, get_all)]
struct DdnumResult {
    steps: usize,
    flagged: bool,
    gamma: f64,
    target_potential: f64,
    final_potential: f64,
    total_messages: u64,
    throughput: Vec<f64>,
    prices: Vec<f64>,
    summary_json: String,
    trace_csv: String,
}

#[pyfunction]
#[pyo3(signature = (num_clients, num_bss, seed=0))]
fn generate_random(num_clients: usize, num_bss: usize, seed: u64) -> PyResult<PyTopology> {
    let inner = scenario::generate_random(&scenario::ScenarioParams::new(num_clients, num_bss, seed))
        .map_err(to_py)?;
    Ok(PyTopology { inner })
}

/// Two clients with rates (1, 1) and (2, 2), weights 2.
#[pyfunction]
fn two_by_two_fixture() -> PyTopology {
    PyTopology {
        inner: scenario::two_by_two_example().topology,
    }
}

#[pyfunction]
fn single_bs_pf_shares(weights: Vec<f64>) -> PyResult<Vec<f64>> {
    waterfill::single_bs_pf_shares(&weights).map_err(to_py)
}

/// Water-fills one base station. Returns `(theta, k, lambdas)`.
#[pyfunction]
fn waterfill_allocate(
    external: Vec<f64>,
    weights: Vec<f64>,
    rates: Vec<f64>,
) -> PyResult<(f64, usize, Vec<f64>)> {
    let input = waterfill::WaterfillInput {
        bs: 0,
        clients: (0..external.len()).collect(),
        external,
        weights,
        rates,
    };
    let res = waterfill::waterfill_allocate(&input).map_err(to_py)?;
    Ok((res.theta, res.k, res.lambdas))
}

#[pyfunction]
#[pyo3(signature = (topology, epsilon=0.05, policy="random", seed=0, max_steps=1_000_000))]
fn run_afra(
    py: Python<'_>,
    topology: &PyTopology,
    epsilon: f64,
    policy: &str,
    seed: u64,
    max_steps: usize,
) -> PyResult<AfraResult> {
    let engine = EngineConfig {
        epsilon,
        policy: parse_policy(policy).map_err(PyValueError::new_err)?,
        max_steps,
    };
    let topo = &topology.inner;
    let (run, summary) = py
        .detach(|| harness::afra_summary(topo, &engine, seed, false))
        .map_err(to_py)?;
    let s = &run.summary;
    Ok(AfraResult {
        steps_to_eq: s.steps_to_eq,
        flagged: s.flagged,
        final_potential: s.final_potential,
        pf_index: s.pf_index,
        total_messages: s.total_messages,
        throughput: s.per_client_throughput.clone(),
        theta: s.per_bs_theta.clone(),
        allocation: run.state.allocation.to_rows(),
        summary_json: summary.to_json(),
        trace_csv: afra::trace_csv(topo, run.trace()),
    })
}

/// `gamma=None` tunes the step size over the default grid; `target=None`
/// uses 95% of the equilibrium potential of an AFRA run with `seed`.
#[pyfunction]
#[pyo3(signature = (topology, gamma=None, target=None, max_iterations=ddnum::DEFAULT_MAX_ITERATIONS, seed=0))]
fn run_ddnum(
    py: Python<'_>,
    topology: &PyTopology,
    gamma: Option<f64>,
    target: Option<f64>,
    max_iterations: usize,
    seed: u64,
) -> PyResult<DdnumResult> {
    let config = DdnumConfig {
        gamma: parse_gamma(gamma),
        target,
        max_iterations,
        ..DdnumConfig::default()
    };
    let topo = &topology.inner;
    let run = py
        .detach(|| {
            let target = harness::ddnum_target(topo, &config, &EngineConfig::default(), seed)?;
            harness::ddnum_run(topo, &config, target)
        })
        .map_err(to_py)?;
    let s = &run.summary;
    Ok(DdnumResult {
        steps: s.steps,
        flagged: s.flagged,
        gamma: s.gamma,
        target_potential: s.target_potential,
        final_potential: s.final_potential,
        total_messages: s.total_messages,
        throughput: s.per_client_throughput.clone(),
        prices: s.prices.clone(),
        summary_json: harness::ddnum_summary(&run, seed).to_json(),
        trace_csv: ddnum::trace_csv(topo, &run.trace),
    })
}

/// Returns `(f*, throughput, allocation, certified_gap)`.
#[pyfunction]
#[pyo3(signature = (topology, tol=1e-6))]
fn solve_global_pf(
    py: Python<'_>,
    topology: &PyTopology,
    tol: f64,
) -> PyResult<(f64, Vec<f64>, Vec<Vec<f64>>, f64)> {
    let opt = py
        .detach(|| oracle::solve_global_pf(&topology.inner, tol))
        .map_err(to_py)?;
    Ok((opt.potential, opt.throughput, opt.allocation.to_rows(), opt.gap))
}

/// Equilibrium identity residuals for an allocation, with tolerances scaled
/// to the gate `epsilon`.
#[pyfunction]
#[pyo3(signature = (topology, allocation, epsilon=0.05))]
fn check_equilibrium<'py>(
    py: Python<'py>,
    topology: &PyTopology,
    allocation: Vec<Vec<f64>>,
    epsilon: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let topo = &topology.inner;
    let alloc = Allocation::from_rows(&allocation).map_err(to_py)?;
    let report = oracle::check_equilibrium_properties(
        topo,
        &alloc,
        oracle::PropertyTolerances::for_epsilon(topo, epsilon),
        None,
    )
    .map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("prop_i_residual", report.prop_i_residual)?;
    out.set_item("prop_ii_residual", report.prop_ii_residual)?;
    out.set_item("prop_iii_residual", report.prop_iii_residual)?;
    out.set_item("passed", report.passed)?;
    Ok(out)
}

#[pyfunction]
fn step_bound(topology: &PyTopology, epsilon: f64) -> f64 {
    oracle::step_bound(&topology.inner, epsilon)
}

#[pyfunction]
fn potential(topology: &PyTopology, throughput: Vec<f64>) -> PyResult<f64> {
    if throughput.len() != topology.inner.num_clients() {
        return Err(PyValueError::new_err("one throughput value per client expected"));
    }
    Ok(model::potential(&topology.inner, &throughput))
}

#[pyfunction]
fn pf_index(throughput: Vec<f64>) -> PyResult<f64> {
    model::pf_index(&throughput).map_err(to_py)
}

/// Default sequential policy configuration, mirroring the CLI defaults.
#[pyfunction]
fn default_config<'py>(py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
    let c = SimConfig::default();
    let out = PyDict::new(py);
    out.set_item("epsilon", c.epsilon)?;
    out.set_item("policy", "random")?;
    out.set_item("seed", c.seed)?;
    out.set_item("max_steps", c.max_steps)?;
    Ok(out)
}

#[pymodule(name = "hetnet_afra")]
fn hetnet_afra_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTopology>()?;
    m.add_class::<AfraResult>()?;
    m.add_class::<DdnumResult>()?;
    m.add("NoFeasibleGamma", m.py().get_type::<NoFeasibleGamma>())?;
    m.add_function(wrap_pyfunction!(generate_random, m)?)?;
    m.add_function(wrap_pyfunction!(two_by_two_fixture, m)?)?;
    m.add_function(wrap_pyfunction!(single_bs_pf_shares, m)?)?;
    m.add_function(wrap_pyfunction!(waterfill_allocate, m)?)?;
    m.add_function(wrap_pyfunction!(run_afra, m)?)?;
    m.add_function(wrap_pyfunction!(run_ddnum, m)?)?;
    m.add_function(wrap_pyfunction!(solve_global_pf, m)?)?;
    m.add_function(wrap_pyfunction!(check_equilibrium, m)?)?;
    m.add_function(wrap_pyfunction!(step_bound, m)?)?;
    m.add_function(wrap_pyfunction!(potential, m)?)?;
    m.add_function(wrap_pyfunction!(pf_index, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    Ok(())
}
