//! Monte Carlo experiment orchestration: scenario construction around a
//! stubborn innovator, deterministic seed derivation, replicated runs, and
//! one- or two-dimensional (lambda, mu) parameter sweeps executed in parallel.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::analysis::{
    self, classify_regime, estimate_lambda_hat, RegimeLabel, TheoryReport, ThresholdEstimate,
};
use crate::dynamics::{
    self, AgentParams, DynamicsError, PopulationState, Rationality, RunSummary, Sample,
};
use crate::netgen::{
    build_random_walk_weights, GraphError, InfluenceLayer, TopologySpec, TwoLayerNetwork,
};

/// Attempt budget when regenerating a layer until it satisfies its
/// structural requirement (connected communication, no isolated nodes).
pub const MAX_REGEN_ATTEMPTS: usize = 1000;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("gave up regenerating the {role} layer after {attempts} attempts ({requirement})")]
    RegenerationExhausted { role: &'static str, attempts: usize, requirement: &'static str },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Analysis(#[from] analysis::AnalysisError),
}

// ---- deterministic seed derivation ----------------------------------------

/// SplitMix64 finalizer; the workhorse of all seed derivation here.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Key identifying a grid cell by its parameter values (not its position),
/// so extending a grid never perturbs the streams of existing cells.
pub fn cell_key(lambda: f64, mu: f64) -> u64 {
    splitmix64(splitmix64(lambda.to_bits()) ^ mu.to_bits())
}

/// Replicate seed: a stable mix of (master seed, cell key, replicate index).
pub fn derive_seed(master: u64, cell: u64, replicate: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ cell) ^ replicate)
}

/// Named sub-stream of a replicate seed (network layers, dynamics, ...).
pub fn stream_seed(base: u64, tag: u64) -> u64 {
    splitmix64(base ^ splitmix64(tag))
}

const STREAM_INFLUENCE: u64 = 1;
const STREAM_COMMUNICATION: u64 = 2;
const STREAM_DYNAMICS: u64 = 3;

// ---- scenario construction -------------------------------------------------

/// Everything needed to reproduce one experiment family.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub influence: TopologySpec,
    pub communication: TopologySpec,
    /// Stubborn innovator node; `None` drops the innovator entirely
    /// (plumbing checks only -- the paper's scenarios always have one).
    pub innovator: Option<usize>,
    pub alpha: f64,
    pub beta: Rationality,
    pub lambda: f64,
    pub mu: f64,
    /// Observation window; `None` means 4n^2.
    pub horizon: Option<u64>,
    /// Initial opinion of non-innovator agents.
    pub initial_opinion: f64,
    pub master_seed: u64,
    pub replicates: usize,
    /// Reuse one network realization for every replicate instead of
    /// resampling per replicate.
    pub freeze_network: bool,
}

impl ScenarioConfig {
    pub fn n(&self) -> usize {
        self.influence.n
    }

    /// Resolved observation window (default 4n^2).
    pub fn horizon(&self) -> u64 {
        self.horizon.unwrap_or(4 * (self.n() as u64) * (self.n() as u64))
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let err = |m: String| Err(HarnessError::InvalidScenario(m));
        self.influence.validate().map_err(HarnessError::Graph)?;
        self.communication.validate().map_err(HarnessError::Graph)?;
        if self.influence.n != self.communication.n {
            return err(format!(
                "layers disagree on n: influence {} vs communication {}",
                self.influence.n, self.communication.n
            ));
        }
        if let Some(s) = self.innovator {
            if s >= self.n() {
                return err(format!("innovator {} out of range for n = {}", s, self.n()));
            }
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return err(format!("lambda = {} outside [0, 1]", self.lambda));
        }
        if !(0.0..=1.0).contains(&self.mu) {
            return err(format!("mu = {} outside [0, 1]", self.mu));
        }
        if let Rationality::Finite(b) = self.beta {
            if !b.is_finite() || b < 0.0 {
                return err(format!("beta = {b} must be nonnegative or \"inf\""));
            }
        }
        if !self.alpha.is_finite() || self.alpha < 0.0 {
            return err(format!("alpha = {} must be nonnegative", self.alpha));
        }
        if !(-1.0..=1.0).contains(&self.initial_opinion) {
            return err(format!("initial_opinion = {} outside [-1, 1]", self.initial_opinion));
        }
        if self.replicates == 0 {
            return err("replicates must be at least 1".into());
        }
        Ok(())
    }
}

/// A realized network plus agents and initial state, ready to run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub net: TwoLayerNetwork,
    pub params: AgentParams,
    pub initial: PopulationState,
    /// Regeneration attempts spent on (influence, communication).
    pub regen_attempts: (usize, usize),
}

fn regenerate_layer(
    spec: &TopologySpec,
    base_seed: u64,
    role: &'static str,
    requirement: &'static str,
    accept: impl Fn(&InfluenceLayer) -> bool,
) -> Result<(InfluenceLayer, usize), HarnessError> {
    for attempt in 0..MAX_REGEN_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(base_seed, attempt as u64));
        let layer = spec.generate(&mut rng)?;
        if accept(&layer) {
            return Ok((layer, attempt));
        }
    }
    Err(HarnessError::RegenerationExhausted {
        role,
        attempts: MAX_REGEN_ATTEMPTS,
        requirement,
    })
}

/// Builds the network, parameters, and initial state for one replicate seed.
///
/// The influence layer is regenerated until no node is isolated (degrees
/// appear as divisors in the dynamics); the communication layer until it is
/// connected. All agents start at action -1 and the configured initial
/// opinion, except the innovator which is pinned to (+1, +1) with mu = 0,
/// lambda = 1, beta = inf, and a unit self-weight row.
pub fn build_scenario_seeded(
    config: &ScenarioConfig,
    replicate_seed: u64,
) -> Result<Scenario, HarnessError> {
    config.validate()?;
    let n = config.n();

    let (influence, infl_attempts) = regenerate_layer(
        &config.influence,
        stream_seed(replicate_seed, STREAM_INFLUENCE),
        "influence",
        "minimum degree >= 1",
        |g| g.min_degree() >= 1,
    )?;
    let (comm_graph, comm_attempts) = regenerate_layer(
        &config.communication,
        stream_seed(replicate_seed, STREAM_COMMUNICATION),
        "communication",
        "connected",
        |g| g.is_connected(),
    )?;

    let mut weights = build_random_walk_weights(&comm_graph)?;
    let mut params =
        AgentParams::homogeneous(n, config.mu, config.lambda, config.beta, config.alpha)?;
    let mut x = vec![-1i8; n];
    let mut y = vec![config.initial_opinion; n];
    if let Some(s) = config.innovator {
        weights = weights.make_stubborn(s);
        params.set_agent(s, 0.0, 1.0, Rationality::Infinite)?;
        x[s] = 1;
        y[s] = 1.0;
    }

    Ok(Scenario {
        net: TwoLayerNetwork::new(influence, weights)?,
        params,
        initial: PopulationState::new(x, y)?,
        regen_attempts: (infl_attempts, comm_attempts),
    })
}

/// Replicate-0 scenario for the configured (lambda, mu) cell.
pub fn build_scenario(config: &ScenarioConfig) -> Result<Scenario, HarnessError> {
    build_scenario_seeded(config, replicate_seed(config, 0))
}

/// Seed of replicate `k` in the configured cell (frozen-network runs keep
/// the network sub-streams pinned to replicate 0).
pub fn replicate_seed(config: &ScenarioConfig, k: usize) -> u64 {
    derive_seed(config.master_seed, cell_key(config.lambda, config.mu), k as u64)
}

// ---- replicated execution ---------------------------------------------------

/// Knobs shared by all harness entry points.
#[derive(Debug, Clone, Copy)]
pub struct SweepOptions {
    /// Plateau half-width for regime classification.
    pub plateau_band: f64,
    /// Snapshot cadence for recorded trajectories; `None` means one sweep (n).
    pub snapshot_every: Option<u64>,
    /// Keep per-run trajectory samples in the outcomes.
    pub record_trajectories: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            plateau_band: analysis::DEFAULT_PLATEAU_BAND,
            snapshot_every: None,
            record_trajectories: false,
        }
    }
}

impl SweepOptions {
    fn cadence(&self, n: usize) -> u64 {
        self.snapshot_every.unwrap_or(n as u64)
    }
}

/// Outcome of a single replicate at the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateOutcome {
    pub replicate: usize,
    pub seed: u64,
    pub avg_x: f64,
    pub avg_y: f64,
    pub regime: RegimeLabel,
    /// Recorded (t, <x>, <y>) series when trajectories were requested.
    pub samples: Option<Vec<Sample>>,
}

impl ReplicateOutcome {
    pub fn adoption_fraction(&self) -> f64 {
        (self.avg_x + 1.0) / 2.0
    }
}

fn run_replicate(
    config: &ScenarioConfig,
    k: usize,
    opts: &SweepOptions,
) -> Result<ReplicateOutcome, HarnessError> {
    let seed = replicate_seed(config, k);
    let network_seed = if config.freeze_network { replicate_seed(config, 0) } else { seed };
    let scenario = build_scenario_seeded(config, network_seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, STREAM_DYNAMICS));
    let cadence = if opts.record_trajectories { opts.cadence(config.n()) } else { 0 };
    let summary = dynamics::run(
        scenario.initial,
        &scenario.net,
        &scenario.params,
        config.horizon(),
        cadence,
        &mut rng,
    )?;
    let (avg_x, avg_y) = analysis::averages(&summary.final_state);
    Ok(ReplicateOutcome {
        replicate: k,
        seed,
        avg_x,
        avg_y,
        regime: classify_regime(avg_x, avg_y, opts.plateau_band),
        samples: opts.record_trajectories.then_some(summary.samples),
    })
}

/// Runs `count` independent replicates of the configured cell; results are
/// ordered by replicate index regardless of scheduling.
pub fn run_replicates(
    config: &ScenarioConfig,
    count: usize,
    opts: &SweepOptions,
) -> Result<Vec<ReplicateOutcome>, HarnessError> {
    (0..count)
        .into_par_iter()
        .map(|k| run_replicate(config, k, opts))
        .collect::<Result<Vec<_>, _>>()
}

/// One fully recorded run (replicate 0) plus its theory report; the network
/// realization is returned for inspection/export.
#[derive(Debug, Clone)]
pub struct SingleRun {
    pub seed: u64,
    pub summary: RunSummary,
    pub avg_x: f64,
    pub avg_y: f64,
    pub regime: RegimeLabel,
    pub theory: Option<TheoryReport>,
    pub scenario_net: TwoLayerNetwork,
    pub regen_attempts: (usize, usize),
}

// note: single runs always record their trajectory
pub fn run_single(config: &ScenarioConfig, opts: &SweepOptions) -> Result<SingleRun, HarnessError> {
    let seed = replicate_seed(config, 0);
    let scenario = build_scenario_seeded(config, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, STREAM_DYNAMICS));
    let summary = dynamics::run(
        scenario.initial,
        &scenario.net,
        &scenario.params,
        config.horizon(),
        opts.cadence(config.n()),
        &mut rng,
    )?;
    let (avg_x, avg_y) = analysis::averages(&summary.final_state);
    let theory = match config.innovator {
        Some(s) => Some(analysis::theorem_check(&scenario.net, s, config.alpha, config.lambda)?),
        None => None,
    };
    Ok(SingleRun {
        seed,
        avg_x,
        avg_y,
        regime: classify_regime(avg_x, avg_y, opts.plateau_band),
        theory,
        summary,
        scenario_net: scenario.net,
        regen_attempts: scenario.regen_attempts,
    })
}

// ---- sweeps ------------------------------------------------------------------

/// Aggregates of one (lambda, mu) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub lambda: f64,
    pub mu: f64,
    pub outcomes: Vec<ReplicateOutcome>,
    pub mean_x: f64,
    pub mean_y: f64,
    pub mean_fraction: f64,
    /// Unbiased variance of the adoption fraction (0 when replicates == 1).
    pub var_fraction: f64,
    pub modal_regime: RegimeLabel,
}

/// Cross-product sweep over (lambda, mu); cells are ordered lambda-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub lambda_grid: Vec<f64>,
    pub mu_grid: Vec<f64>,
    pub replicates: usize,
    pub cells: Vec<CellResult>,
}

impl SweepResult {
    pub fn cell(&self, lambda_idx: usize, mu_idx: usize) -> &CellResult {
        &self.cells[lambda_idx * self.mu_grid.len() + mu_idx]
    }
}

fn modal_regime(outcomes: &[ReplicateOutcome]) -> RegimeLabel {
    let mut counts = [0usize; 4];
    for o in outcomes {
        let idx = RegimeLabel::ALL.iter().position(|&l| l == o.regime).unwrap();
        counts[idx] += 1;
    }
    // ties resolve to the earliest label in RegimeLabel::ALL
    let best = (0..4).max_by_key(|&i| (counts[i], usize::MAX - i)).unwrap();
    RegimeLabel::ALL[best]
}

fn aggregate_cell(lambda: f64, mu: f64, outcomes: Vec<ReplicateOutcome>) -> CellResult {
    let k = outcomes.len() as f64;
    let mean_x = outcomes.iter().map(|o| o.avg_x).sum::<f64>() / k;
    let mean_y = outcomes.iter().map(|o| o.avg_y).sum::<f64>() / k;
    let fractions: Vec<f64> = outcomes.iter().map(|o| o.adoption_fraction()).collect();
    let mean_fraction = fractions.iter().sum::<f64>() / k;
    let var_fraction = if outcomes.len() < 2 {
        0.0
    } else {
        fractions.iter().map(|f| (f - mean_fraction).powi(2)).sum::<f64>() / (k - 1.0)
    };
    CellResult {
        lambda,
        mu,
        modal_regime: modal_regime(&outcomes),
        outcomes,
        mean_x,
        mean_y,
        mean_fraction,
        var_fraction,
    }
}

/// Replicated runs over every (lambda, mu) pair. The unit of parallelism is
/// one replicate; results are gathered into deterministic (cell, replicate)
/// order so the output is identical for any worker count.
pub fn grid_sweep(
    config: &ScenarioConfig,
    lambda_grid: &[f64],
    mu_grid: &[f64],
    opts: &SweepOptions,
) -> Result<SweepResult, HarnessError> {
    if lambda_grid.is_empty() || mu_grid.is_empty() {
        return Err(HarnessError::InvalidScenario("parameter grids must be nonempty".into()));
    }
    for &l in lambda_grid {
        if !(0.0..=1.0).contains(&l) {
            return Err(HarnessError::InvalidScenario(format!("grid lambda = {l} outside [0, 1]")));
        }
    }
    for &m in mu_grid {
        if !(0.0..=1.0).contains(&m) {
            return Err(HarnessError::InvalidScenario(format!("grid mu = {m} outside [0, 1]")));
        }
    }
    let replicates = config.replicates;
    let mut tasks = Vec::with_capacity(lambda_grid.len() * mu_grid.len() * replicates);
    for &lambda in lambda_grid {
        for &mu in mu_grid {
            for k in 0..replicates {
                tasks.push((lambda, mu, k));
            }
        }
    }
    let outcomes: Vec<ReplicateOutcome> = tasks
        .into_par_iter()
        .map(|(lambda, mu, k)| {
            let mut cell_config = config.clone();
            cell_config.lambda = lambda;
            cell_config.mu = mu;
            run_replicate(&cell_config, k, opts)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut cells = Vec::with_capacity(lambda_grid.len() * mu_grid.len());
    let mut it = outcomes.into_iter();
    for &lambda in lambda_grid {
        for &mu in mu_grid {
            let chunk: Vec<ReplicateOutcome> = it.by_ref().take(replicates).collect();
            cells.push(aggregate_cell(lambda, mu, chunk));
        }
    }
    Ok(SweepResult {
        lambda_grid: lambda_grid.to_vec(),
        mu_grid: mu_grid.to_vec(),
        replicates,
        cells,
    })
}

/// Threshold experiment: sweep lambda at the configured mu and estimate the
/// variance-peak commitment threshold.
pub fn lambda_sweep(
    config: &ScenarioConfig,
    lambda_grid: &[f64],
    opts: &SweepOptions,
) -> Result<(SweepResult, ThresholdEstimate), HarnessError> {
    let sweep = grid_sweep(config, lambda_grid, &[config.mu], opts)?;
    let fractions: Vec<Vec<f64>> = sweep
        .cells
        .iter()
        .map(|c| c.outcomes.iter().map(|o| o.adoption_fraction()).collect())
        .collect();
    let estimate = estimate_lambda_hat(lambda_grid, &fractions)?;
    Ok((sweep, estimate))
}
