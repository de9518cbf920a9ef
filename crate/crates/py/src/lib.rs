//! Python bindings: thin wrappers around the network generators, the
//! closed-form analysis helpers, and the Monte Carlo harness.

// the pyfunction macro expansion trips useless_conversion on PyResult returns
#![allow(clippy::useless_conversion)]

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use coevo::analysis;
use coevo::dynamics::Rationality;
use coevo::harness::{self, ScenarioConfig, SweepOptions};
use coevo::netgen::{GraphFamily, TopologySpec};

fn parse_family(name: &str) -> PyResult<GraphFamily> {
    match name {
        "rr" => Ok(GraphFamily::Rr),
        "er" => Ok(GraphFamily::Er),
        "ws" => Ok(GraphFamily::Ws),
        "ba" => Ok(GraphFamily::Ba),
        other => Err(PyValueError::new_err(format!(
            "unknown family {other:?} (expected rr, er, ws, or ba)"
        ))),
    }
}

fn runtime_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

/// Edge list of one generated layer as (i, j) pairs with i < j.
#[pyfunction]
#[pyo3(signature = (family, n, d, seed, p=None))]
fn generate_edges(
    family: &str,
    n: usize,
    d: usize,
    seed: u64,
    p: Option<f64>,
) -> PyResult<Vec<(u32, u32)>> {
    let spec = TopologySpec::new(parse_family(family)?, n, d, p);
    spec.validate().map_err(|e| PyValueError::new_err(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layer = spec.generate(&mut rng).map_err(runtime_err)?;
    Ok(layer.edges().to_vec())
}

/// Commitment threshold of the exclusion condition; None when alpha >= d*-2.
#[pyfunction]
fn lambda_star(d_star: usize, alpha: f64) -> Option<f64> {
    analysis::lambda_star(d_star, alpha)
}

/// Neighbor-average level above which +1 is the strict best response.
#[pyfunction]
fn best_response_threshold(lambda_: f64, y: f64, alpha: f64) -> PyResult<f64> {
    analysis::best_response_threshold(lambda_, y, alpha)
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Regime label ("paradigm_shift", "unpopular_norm",
/// "popular_disadvantageous_norm", or "undetermined").
#[pyfunction]
#[pyo3(signature = (avg_x, avg_y, plateau_band=0.2))]
fn classify_regime(avg_x: f64, avg_y: f64, plateau_band: f64) -> String {
    analysis::classify_regime(avg_x, avg_y, plateau_band).as_str().to_string()
}

/// One experiment configuration: two generated layers, a stubborn innovator,
/// and homogeneous agent parameters.
#[pyclass]
#[derive(Clone)]
struct Scenario {
    config: ScenarioConfig,
    plateau_band: f64,
}

impl Scenario {
    fn opts(&self) -> SweepOptions {
        SweepOptions { plateau_band: self.plateau_band, ..Default::default() }
    }
}

#[pymethods]
impl Scenario {
    #[new]
    #[pyo3(signature = (
        family = "rr",
        n = 200,
        influence_degree = 8,
        communication_degree = 4,
        alpha = 0.5,
        beta = 20.0,
        lambda_ = 0.1,
        mu = 0.001,
        seed = 0,
        replicates = 10,
        horizon = None,
        p = None,
        communication_family = None,
        innovator = 0,
        initial_opinion = -1.0,
        freeze_network = false,
        plateau_band = 0.2,
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        family: &str,
        n: usize,
        influence_degree: usize,
        communication_degree: usize,
        alpha: f64,
        beta: f64,
        lambda_: f64,
        mu: f64,
        seed: u64,
        replicates: usize,
        horizon: Option<u64>,
        p: Option<f64>,
        communication_family: Option<&str>,
        innovator: usize,
        initial_opinion: f64,
        freeze_network: bool,
        plateau_band: f64,
    ) -> PyResult<Self> {
        let influence_family = parse_family(family)?;
        let comm_family = match communication_family {
            Some(name) => parse_family(name)?,
            None => influence_family,
        };
        let pick_p = |fam: GraphFamily| (fam == GraphFamily::Ws).then(|| p.unwrap_or(0.2));
        let beta = if beta.is_infinite() {
            Rationality::Infinite
        } else {
            Rationality::Finite(beta)
        };
        let config = ScenarioConfig {
            influence: TopologySpec::new(influence_family, n, influence_degree, pick_p(influence_family)),
            communication: TopologySpec::new(comm_family, n, communication_degree, pick_p(comm_family)),
            innovator: Some(innovator),
            alpha,
            beta,
            lambda: lambda_,
            mu,
            horizon,
            initial_opinion,
            master_seed: seed,
            replicates,
            freeze_network,
        };
        config.validate().map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(Scenario { config, plateau_band })
    }

    /// Resolved observation window (4n^2 unless overridden).
    #[getter]
    fn horizon(&self) -> u64 {
        self.config.horizon()
    }

    /// One fully recorded run (replicate 0): trajectory, final state, regime,
    /// and the closed-form theory report for the realized network.
    fn simulate<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let single = harness::run_single(&self.config, &self.opts()).map_err(runtime_err)?;
        let out = PyDict::new_bound(py);
        out.set_item("t", single.summary.samples.iter().map(|s| s.t).collect::<Vec<_>>())?;
        out.set_item(
            "avg_x",
            single.summary.samples.iter().map(|s| s.avg_x).collect::<Vec<_>>(),
        )?;
        out.set_item(
            "avg_y",
            single.summary.samples.iter().map(|s| s.avg_y).collect::<Vec<_>>(),
        )?;
        out.set_item("final_x", single.summary.final_state.x().to_vec())?;
        out.set_item("final_y", single.summary.final_state.y().to_vec())?;
        out.set_item("regime", single.regime.as_str())?;
        out.set_item("seed", single.seed)?;
        if let Some(theory) = &single.theory {
            let t = PyDict::new_bound(py);
            t.set_item("d_star", theory.d_star)?;
            t.set_item("lambda_star", theory.lambda_star)?;
            t.set_item("condition_alpha_ok", theory.condition_alpha_ok)?;
            t.set_item("paradigm_shift_excluded", theory.paradigm_shift_excluded)?;
            out.set_item("theory", t)?;
        }
        Ok(out)
    }

    /// Independent replicates of the configured cell, ordered by index.
    #[pyo3(signature = (count=None))]
    fn run_replicates<'py>(
        &self,
        py: Python<'py>,
        count: Option<usize>,
    ) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let count = count.unwrap_or(self.config.replicates);
        let outcomes =
            harness::run_replicates(&self.config, count, &self.opts()).map_err(runtime_err)?;
        outcomes
            .iter()
            .map(|o| {
                let d = PyDict::new_bound(py);
                d.set_item("replicate", o.replicate)?;
                d.set_item("seed", o.seed)?;
                d.set_item("avg_x", o.avg_x)?;
                d.set_item("avg_y", o.avg_y)?;
                d.set_item("regime", o.regime.as_str())?;
                Ok(d)
            })
            .collect()
    }

    /// Variance-peak threshold experiment over a commitment grid.
    fn lambda_sweep<'py>(
        &self,
        py: Python<'py>,
        grid: Vec<f64>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let (_, estimate) =
            harness::lambda_sweep(&self.config, &grid, &self.opts()).map_err(runtime_err)?;
        let out = PyDict::new_bound(py);
        out.set_item("grid", estimate.grid)?;
        out.set_item("variance", estimate.variance)?;
        out.set_item("mean_fraction", estimate.mean_fraction)?;
        out.set_item("lambda_hat", estimate.lambda_hat)?;
        Ok(out)
    }

    /// Full (lambda, mu) sweep; one dict of aggregates per cell.
    fn sweep2d<'py>(
        &self,
        py: Python<'py>,
        lambda_grid: Vec<f64>,
        mu_grid: Vec<f64>,
    ) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let sweep = harness::grid_sweep(&self.config, &lambda_grid, &mu_grid, &self.opts())
            .map_err(runtime_err)?;
        sweep
            .cells
            .iter()
            .map(|c| {
                let d = PyDict::new_bound(py);
                d.set_item("lambda", c.lambda)?;
                d.set_item("mu", c.mu)?;
                d.set_item("mean_x", c.mean_x)?;
                d.set_item("mean_y", c.mean_y)?;
                d.set_item("mean_fraction", c.mean_fraction)?;
                d.set_item("var_fraction", c.var_fraction)?;
                d.set_item("modal_regime", c.modal_regime.as_str())?;
                Ok(d)
            })
            .collect()
    }

    /// Closed-form exclusion check on the replicate-0 network realization.
    fn theory_check<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let scenario = harness::build_scenario(&self.config).map_err(runtime_err)?;
        let s = self
            .config
            .innovator
            .ok_or_else(|| PyValueError::new_err("scenario has no innovator"))?;
        let report = analysis::theorem_check(&scenario.net, s, self.config.alpha, self.config.lambda)
            .map_err(runtime_err)?;
        let out = PyDict::new_bound(py);
        out.set_item("d_star", report.d_star)?;
        out.set_item("lambda_star", report.lambda_star)?;
        out.set_item("condition_alpha_ok", report.condition_alpha_ok)?;
        out.set_item("paradigm_shift_excluded", report.paradigm_shift_excluded)?;
        out.set_item("alpha", report.alpha)?;
        out.set_item("lambda", report.lambda)?;
        Ok(out)
    }

    fn __repr__(&self) -> String {
        format!(
            "Scenario(family={}, n={}, lambda={}, mu={}, seed={})",
            self.config.influence.family,
            self.config.n(),
            self.config.lambda,
            self.config.mu,
            self.config.master_seed
        )
    }
}

#[pymodule]
fn coevo_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(generate_edges, m)?)?;
    m.add_function(wrap_pyfunction!(lambda_star, m)?)?;
    m.add_function(wrap_pyfunction!(best_response_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(classify_regime, m)?)?;
    m.add_class::<Scenario>()?;
    Ok(())
}
