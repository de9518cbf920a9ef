//! Simulator and analysis toolkit for coevolving opinion dynamics and
//! collective decision-making on two-layer networks.
//!
//! Agents carry a binary action and a continuous opinion. Opinions evolve by
//! weighted averaging over a communication layer plus the observed actions of
//! influence-layer neighbors; actions follow a log-linear (noisy best
//! response) rule over a coordination game with an evolutionary advantage for
//! the innovation. The crate provides:
//!
//! - [`netgen`]: the four random-graph families and the two-layer data model;
//! - [`dynamics`]: the coupled stochastic update;
//! - [`analysis`]: closed-form threshold/exclusion checks and outcome
//!   classification;
//! - [`harness`]: reproducible replicated experiments and parameter sweeps;
//! - [`config`] and [`report`]: the TOML config surface and the CSV/JSON
//!   writers behind the `coevo` command-line tool.

pub mod analysis;
pub mod config;
pub mod dynamics;
pub mod harness;
pub mod netgen;
pub mod report;

pub use analysis::{RegimeLabel, TheoryReport, ThresholdEstimate};
pub use dynamics::{AgentParams, PopulationState, Rationality, StepTrace};
pub use harness::{ScenarioConfig, SweepOptions, SweepResult};
pub use netgen::{
    CommunicationLayer, GraphFamily, InfluenceLayer, TopologySpec, TwoLayerNetwork,
};
