//! The coupled stochastic update: asynchronous uniform activation, opinion
//! averaging over the communication layer, coordination-game payoffs on the
//! influence layer, and log-linear action sampling with a symbolic
//! fully-rational limit.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netgen::TwoLayerNetwork;

/// Payoff differences within this tolerance count as a tie under full
/// rationality (coin flip).
pub const PAYOFF_TIE_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("parameter {name}[{index}] = {value} outside {range}")]
    ParamOutOfRange { name: &'static str, index: usize, value: f64, range: &'static str },
    #[error("alpha = {0} must be nonnegative")]
    NegativeAlpha(f64),
    #[error("action must be -1 or +1, got {0}")]
    InvalidAction(i8),
    #[error("opinion y[{index}] = {value} outside [-1, 1]")]
    OpinionOutOfRange { index: usize, value: f64 },
    #[error("node {0} has degree 0 on the influence layer")]
    ZeroDegree(usize),
    #[error("size mismatch: state has {state} agents, network {network}, params {params}")]
    SizeMismatch { state: usize, network: usize, params: usize },
    #[error("node {0} out of range")]
    NodeOutOfRange(usize),
}

/// Rationality level; `Infinite` is a symbolic marker so that the
/// best-response tie cases stay exact instead of relying on a large float.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rationality {
    Finite(f64),
    Infinite,
}

impl Rationality {
    pub fn is_infinite(self) -> bool {
        matches!(self, Rationality::Infinite)
    }
}

impl std::fmt::Display for Rationality {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Rationality::Finite(b) => write!(f, "{b}"),
            Rationality::Infinite => f.write_str("inf"),
        }
    }
}

// configs and reports spell the infinite case as the string "inf"
impl Serialize for Rationality {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Rationality::Finite(b) => s.serialize_f64(*b),
            Rationality::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Rationality {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(b) => Ok(Rationality::Finite(b)),
            Repr::Text(s) if s == "inf" => Ok(Rationality::Infinite),
            Repr::Text(s) => {
                Err(serde::de::Error::custom(format!("rationality must be a number or \"inf\", got \"{s}\"")))
            }
        }
    }
}

/// Per-agent susceptibility, commitment, and rationality, plus the global
/// evolutionary advantage of action +1.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentParams {
    mu: Vec<f64>,
    lambda: Vec<f64>,
    beta: Vec<Rationality>,
    alpha: f64,
}

impl AgentParams {
    pub fn new(
        mu: Vec<f64>,
        lambda: Vec<f64>,
        beta: Vec<Rationality>,
        alpha: f64,
    ) -> Result<Self, DynamicsError> {
        if mu.len() != lambda.len() || mu.len() != beta.len() {
            return Err(DynamicsError::SizeMismatch {
                state: mu.len(),
                network: lambda.len(),
                params: beta.len(),
            });
        }
        for (i, &v) in mu.iter().enumerate() {
            check_unit("mu", i, v)?;
        }
        for (i, &v) in lambda.iter().enumerate() {
            check_unit("lambda", i, v)?;
        }
        for (i, &b) in beta.iter().enumerate() {
            if let Rationality::Finite(v) = b {
                if !v.is_finite() || v < 0.0 {
                    return Err(DynamicsError::ParamOutOfRange {
                        name: "beta",
                        index: i,
                        value: v,
                        range: "[0, inf)",
                    });
                }
            }
        }
        if !alpha.is_finite() || alpha < 0.0 {
            return Err(DynamicsError::NegativeAlpha(alpha));
        }
        Ok(AgentParams { mu, lambda, beta, alpha })
    }

    /// All agents share (mu, lambda, beta).
    pub fn homogeneous(
        n: usize,
        mu: f64,
        lambda: f64,
        beta: Rationality,
        alpha: f64,
    ) -> Result<Self, DynamicsError> {
        AgentParams::new(vec![mu; n], vec![lambda; n], vec![beta; n], alpha)
    }

    /// Overrides one agent, e.g. the stubborn innovator (mu=0, lambda=1, beta=inf).
    pub fn set_agent(
        &mut self,
        i: usize,
        mu: f64,
        lambda: f64,
        beta: Rationality,
    ) -> Result<(), DynamicsError> {
        if i >= self.n() {
            return Err(DynamicsError::NodeOutOfRange(i));
        }
        check_unit("mu", i, mu)?;
        check_unit("lambda", i, lambda)?;
        if let Rationality::Finite(v) = beta {
            if !v.is_finite() || v < 0.0 {
                return Err(DynamicsError::ParamOutOfRange {
                    name: "beta",
                    index: i,
                    value: v,
                    range: "[0, inf)",
                });
            }
        }
        self.mu[i] = mu;
        self.lambda[i] = lambda;
        self.beta[i] = beta;
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self, i: usize) -> f64 {
        self.mu[i]
    }

    pub fn lambda(&self, i: usize) -> f64 {
        self.lambda[i]
    }

    pub fn beta(&self, i: usize) -> Rationality {
        self.beta[i]
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

fn check_unit(name: &'static str, index: usize, value: f64) -> Result<(), DynamicsError> {
    if !value.is_finite() || !(0.0..=1.0).contains(&value) {
        return Err(DynamicsError::ParamOutOfRange { name, index, value, range: "[0, 1]" });
    }
    Ok(())
}

/// Joint action/opinion state at one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationState {
    pub(crate) x: Vec<i8>,
    pub(crate) y: Vec<f64>,
    pub(crate) t: u64,
}

impl PopulationState {
    pub fn new(x: Vec<i8>, y: Vec<f64>) -> Result<Self, DynamicsError> {
        if x.len() != y.len() {
            return Err(DynamicsError::SizeMismatch {
                state: x.len(),
                network: y.len(),
                params: y.len(),
            });
        }
        for &a in &x {
            if a != 1 && a != -1 {
                return Err(DynamicsError::InvalidAction(a));
            }
        }
        for (i, &v) in y.iter().enumerate() {
            if !v.is_finite() || !(-1.0..=1.0).contains(&v) {
                return Err(DynamicsError::OpinionOutOfRange { index: i, value: v });
            }
        }
        Ok(PopulationState { x, y, t: 0 })
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn x(&self) -> &[i8] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn t(&self) -> u64 {
        self.t
    }
}

/// Audit record of a single activation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepTrace {
    pub activated: usize,
    pub y_before: f64,
    pub y_after: f64,
    pub x_before: i8,
    pub x_after: i8,
    /// Probability assigned to action +1, evaluated against the time-t state.
    pub p_plus: f64,
}

/// One recorded (t, <x>, <y>) snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sample {
    pub t: u64,
    pub avg_x: f64,
    pub avg_y: f64,
}

/// Final state plus the recorded snapshot series.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub final_state: PopulationState,
    pub samples: Vec<Sample>,
}

/// Overflow-free logistic; the complement form keeps absolute error at the
/// extremes within one rounding step of the tails.
pub fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        let q = (-z).exp();
        1.0 - q / (1.0 + q)
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn prob_plus_from_payoffs(beta: Rationality, pi_plus: f64, pi_minus: f64) -> f64 {
    let diff = pi_plus - pi_minus;
    match beta {
        Rationality::Infinite => {
            if diff.abs() <= PAYOFF_TIE_TOL {
                0.5
            } else if diff > 0.0 {
                1.0
            } else {
                0.0
            }
        }
        Rationality::Finite(b) => logistic(b * diff),
    }
}

fn check_compat(
    state: &PopulationState,
    net: &TwoLayerNetwork,
    params: &AgentParams,
) -> Result<(), DynamicsError> {
    if state.n() != net.n() || state.n() != params.n() {
        return Err(DynamicsError::SizeMismatch {
            state: state.n(),
            network: net.n(),
            params: params.n(),
        });
    }
    if net.influence().min_degree() == 0 {
        let i = (0..net.n()).find(|&i| net.influence().degree(i) == 0).unwrap();
        return Err(DynamicsError::ZeroDegree(i));
    }
    Ok(())
}

/// New opinion of agent `i`: convex mix of communication-weighted opinions
/// and the mean action of influence-layer neighbors.
pub fn opinion_update(
    i: usize,
    state: &PopulationState,
    net: &TwoLayerNetwork,
    params: &AgentParams,
) -> Result<f64, DynamicsError> {
    if i >= state.n() || i >= net.n() || i >= params.n() {
        return Err(DynamicsError::NodeOutOfRange(i));
    }
    let nbrs = net.influence().neighbors(i);
    if nbrs.is_empty() {
        return Err(DynamicsError::ZeroDegree(i));
    }
    Ok(opinion_update_inner(i, state, net, params.mu(i), nbrs))
}

fn opinion_update_inner(
    i: usize,
    state: &PopulationState,
    net: &TwoLayerNetwork,
    mu: f64,
    nbrs: &[u32],
) -> f64 {
    let (cols, ws) = net.communication().row(i);
    let mut social = 0.0;
    for (&j, &w) in cols.iter().zip(ws) {
        social += w * state.y[j as usize];
    }
    let action_sum: i64 = nbrs.iter().map(|&k| state.x[k as usize] as i64).sum();
    (1.0 - mu) * social + mu * action_sum as f64 / nbrs.len() as f64
}

fn payoff_pair_inner(
    i: usize,
    state: &PopulationState,
    params: &AgentParams,
    nbrs: &[u32],
) -> (f64, f64) {
    let d = nbrs.len() as f64;
    let action_sum: i64 = nbrs.iter().map(|&k| state.x[k as usize] as i64).sum();
    let s = action_sum as f64;
    let lam = params.lambda(i);
    let own = 0.5 * lam * state.y[i];
    let plus = own + (1.0 - lam) * (1.0 + params.alpha()) * (d + s) / (2.0 * d);
    let minus = -own + (1.0 - lam) * (d - s) / (2.0 * d);
    (plus, minus)
}

/// Payoff of agent `i` for taking `action` against the current state.
pub fn payoff(
    i: usize,
    action: i8,
    state: &PopulationState,
    net: &TwoLayerNetwork,
    params: &AgentParams,
) -> Result<f64, DynamicsError> {
    if i >= state.n() || i >= net.n() || i >= params.n() {
        return Err(DynamicsError::NodeOutOfRange(i));
    }
    let nbrs = net.influence().neighbors(i);
    if nbrs.is_empty() {
        return Err(DynamicsError::ZeroDegree(i));
    }
    let (plus, minus) = payoff_pair_inner(i, state, params, nbrs);
    match action {
        1 => Ok(plus),
        -1 => Ok(minus),
        other => Err(DynamicsError::InvalidAction(other)),
    }
}

/// Log-linear choice probabilities for agent `i`, returned as
/// (P(+1), P(-1)); the pair sums to 1 exactly by construction.
pub fn action_probs(
    i: usize,
    state: &PopulationState,
    net: &TwoLayerNetwork,
    params: &AgentParams,
) -> Result<(f64, f64), DynamicsError> {
    if i >= state.n() || i >= net.n() || i >= params.n() {
        return Err(DynamicsError::NodeOutOfRange(i));
    }
    let nbrs = net.influence().neighbors(i);
    if nbrs.is_empty() {
        return Err(DynamicsError::ZeroDegree(i));
    }
    let (plus, minus) = payoff_pair_inner(i, state, params, nbrs);
    let p = prob_plus_from_payoffs(params.beta(i), plus, minus);
    Ok((p, 1.0 - p))
}

/// Probability that agent `i` picks action +1.
pub fn action_prob_plus(
    i: usize,
    state: &PopulationState,
    net: &TwoLayerNetwork,
    params: &AgentParams,
) -> Result<f64, DynamicsError> {
    action_probs(i, state, net, params).map(|(p, _)| p)
}

fn step_inner<R: Rng>(
    state: &mut PopulationState,
    net: &TwoLayerNetwork,
    params: &AgentParams,
    rng: &mut R,
) -> StepTrace {
    let i = rng.gen_range(0..state.x.len());
    let nbrs = net.influence().neighbors(i);
    // opinion and payoffs both read the time-t state (simultaneous update)
    let y_new = opinion_update_inner(i, state, net, params.mu(i), nbrs);
    let (plus, minus) = payoff_pair_inner(i, state, params, nbrs);
    let p_plus = prob_plus_from_payoffs(params.beta(i), plus, minus);
    let u: f64 = rng.gen();
    let x_new: i8 = if u < p_plus { 1 } else { -1 };
    let trace = StepTrace {
        activated: i,
        y_before: state.y[i],
        y_after: y_new,
        x_before: state.x[i],
        x_after: x_new,
        p_plus,
    };
    state.y[i] = y_new;
    state.x[i] = x_new;
    state.t += 1;
    trace
}

/// Activates one uniformly random agent and updates its opinion and action
/// simultaneously; all other agents are untouched.
pub fn step<R: Rng>(
    state: &mut PopulationState,
    net: &TwoLayerNetwork,
    params: &AgentParams,
    rng: &mut R,
) -> Result<StepTrace, DynamicsError> {
    check_compat(state, net, params)?;
    Ok(step_inner(state, net, params, rng))
}

/// Runs `horizon` steps, recording (t, <x>, <y>) at t = 0, every
/// `snapshot_every` steps (0 = endpoints only), and at the final step.
pub fn run<R: Rng>(
    initial: PopulationState,
    net: &TwoLayerNetwork,
    params: &AgentParams,
    horizon: u64,
    snapshot_every: u64,
    rng: &mut R,
) -> Result<RunSummary, DynamicsError> {
    let mut state = initial;
    check_compat(&state, net, params)?;
    let n = state.n() as f64;

    let mut sum_x: i64 = state.x.iter().map(|&a| a as i64).sum();
    let exact_avg_y = |y: &[f64]| y.iter().sum::<f64>() / n;

    let mut samples = Vec::new();
    samples.push(Sample { t: state.t, avg_x: sum_x as f64 / n, avg_y: exact_avg_y(&state.y) });

    for _ in 0..horizon {
        let trace = step_inner(&mut state, net, params, rng);
        sum_x += (trace.x_after as i64) - (trace.x_before as i64);
        if snapshot_every > 0 && state.t.is_multiple_of(snapshot_every) {
            samples.push(Sample {
                t: state.t,
                avg_x: sum_x as f64 / n,
                avg_y: exact_avg_y(&state.y),
            });
        }
    }
    if samples.last().map(|s| s.t) != Some(state.t) {
        samples.push(Sample { t: state.t, avg_x: sum_x as f64 / n, avg_y: exact_avg_y(&state.y) });
    }
    Ok(RunSummary { final_state: state, samples })
}
