//! TOML configuration surface for the command-line tool: strict parsing
//! (unknown keys rejected), defaults, grid expansion, and the fully resolved
//! config echo written next to every run's outputs.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::DEFAULT_PLATEAU_BAND;
use crate::dynamics::Rationality;
use crate::harness::{self, ScenarioConfig, SweepOptions};
use crate::netgen::{GraphFamily, TopologySpec};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("config key `{key}`: {msg}")]
    Invalid { key: String, msg: String },
}

fn invalid(key: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key: key.into(), msg: msg.into() }
}

/// Whole config document. Field names are the accepted TOML keys.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub influence: LayerSection,
    pub communication: LayerSection,
    pub scenario: ScenarioSection,
    #[serde(default)]
    pub grids: GridsSection,
    #[serde(default)]
    pub output: OutputSection,
    /// Written by every run (resolved horizon, derived seeds); accepted and
    /// ignored on input so echoed configs re-run unchanged.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derived: Option<toml::Value>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSection {
    pub family: GraphFamily,
    pub n: usize,
    pub d: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
}

impl LayerSection {
    fn spec(&self) -> TopologySpec {
        TopologySpec::new(self.family, self.n, self.d, self.p)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    /// Innovator node id (0-based; the paper's "first node").
    #[serde(default)]
    pub innovator: usize,
    pub alpha: f64,
    /// Number or the string "inf".
    pub beta: Rationality,
    pub lambda: f64,
    pub mu: f64,
    /// Steps; defaults to 4n^2.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<u64>,
    /// Initial opinion of non-innovator agents.
    #[serde(default = "default_initial_opinion")]
    pub initial_opinion: f64,
    pub master_seed: u64,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    /// Reuse one network realization across replicates.
    #[serde(default)]
    pub freeze_network: bool,
}

fn default_initial_opinion() -> f64 {
    -1.0
}

fn default_replicates() -> usize {
    1
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridsSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<GridSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Output directory; overridden by --out-dir.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    /// Trajectory snapshot cadence in steps; defaults to n (one sweep).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_every: Option<u64>,
    #[serde(default = "default_plateau_band")]
    pub plateau_band: f64,
    /// Write per-run trajectory CSVs during sweeps.
    #[serde(default)]
    pub trajectories: bool,
    #[serde(default)]
    pub verbose: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: None,
            snapshot_every: None,
            plateau_band: DEFAULT_PLATEAU_BAND,
            trajectories: false,
            verbose: false,
        }
    }
}

fn default_plateau_band() -> f64 {
    DEFAULT_PLATEAU_BAND
}

/// A parameter grid: explicit values or an inclusive arithmetic range.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    Values(Vec<f64>),
    Range { start: f64, stop: f64, step: f64 },
}

impl GridSpec {
    pub fn expand(&self, key: &str) -> Result<Vec<f64>, ConfigError> {
        let values = match self {
            GridSpec::Values(v) => v.clone(),
            GridSpec::Range { start, stop, step } => {
                if !step.is_finite() || *step <= 0.0 {
                    return Err(invalid(key, format!("step = {step} must be positive")));
                }
                if stop < start {
                    return Err(invalid(key, format!("stop = {stop} below start = {start}")));
                }
                let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
                (0..count).map(|k| start + k as f64 * step).collect()
            }
        };
        if values.is_empty() {
            return Err(invalid(key, "grid must be nonempty"));
        }
        for &v in &values {
            if !(0.0..=1.0).contains(&v) {
                return Err(invalid(key, format!("grid value {v} outside [0, 1]")));
            }
        }
        Ok(values)
    }
}

/// Default commitment grid: step 0.02 over [0, 0.6].
pub fn default_lambda_grid() -> GridSpec {
    GridSpec::Range { start: 0.0, stop: 0.6, step: 0.02 }
}

/// Default susceptibility grid: step 0.0005 over [0, 0.01], fine enough to
/// resolve the breakpoint bands near 0.003-0.007.
pub fn default_mu_grid() -> GridSpec {
    GridSpec::Range { start: 0.0, stop: 0.01, step: 0.0005 }
}

/// Derived quantities echoed in the `[derived]` section.
#[derive(Debug, Serialize)]
struct DerivedEcho {
    horizon: u64,
    replicate0_seed: u64,
    seed_scheme: &'static str,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: ConfigFile =
            toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Cross-field validation with config-key error messages.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.influence.spec().validate().map_err(|e| invalid("influence", e.to_string()))?;
        self.communication
            .spec()
            .validate()
            .map_err(|e| invalid("communication", e.to_string()))?;
        if self.influence.n != self.communication.n {
            return Err(invalid(
                "communication.n",
                format!("must equal influence.n = {}", self.influence.n),
            ));
        }
        let s = &self.scenario;
        if s.innovator >= self.influence.n {
            return Err(invalid(
                "scenario.innovator",
                format!("node {} out of range for n = {}", s.innovator, self.influence.n),
            ));
        }
        if !(0.0..=1.0).contains(&s.lambda) {
            return Err(invalid("scenario.lambda", format!("{} outside [0, 1]", s.lambda)));
        }
        if !(0.0..=1.0).contains(&s.mu) {
            return Err(invalid("scenario.mu", format!("{} outside [0, 1]", s.mu)));
        }
        if !s.alpha.is_finite() || s.alpha < 0.0 {
            return Err(invalid("scenario.alpha", format!("{} must be nonnegative", s.alpha)));
        }
        if let Rationality::Finite(b) = s.beta {
            if !b.is_finite() || b < 0.0 {
                return Err(invalid(
                    "scenario.beta",
                    format!("{b} must be nonnegative or \"inf\""),
                ));
            }
        }
        if !(-1.0..=1.0).contains(&s.initial_opinion) {
            return Err(invalid(
                "scenario.initial_opinion",
                format!("{} outside [-1, 1]", s.initial_opinion),
            ));
        }
        if s.replicates == 0 {
            return Err(invalid("scenario.replicates", "must be at least 1"));
        }
        let band = self.output.plateau_band;
        if !(band > 0.0 && band < 1.0) {
            return Err(invalid("output.plateau_band", format!("{band} outside (0, 1)")));
        }
        if let Some(g) = &self.grids.lambda {
            g.expand("grids.lambda")?;
        }
        if let Some(g) = &self.grids.mu {
            g.expand("grids.mu")?;
        }
        Ok(())
    }

    pub fn scenario_config(&self) -> ScenarioConfig {
        ScenarioConfig {
            influence: self.influence.spec(),
            communication: self.communication.spec(),
            innovator: Some(self.scenario.innovator),
            alpha: self.scenario.alpha,
            beta: self.scenario.beta,
            lambda: self.scenario.lambda,
            mu: self.scenario.mu,
            horizon: self.scenario.horizon,
            initial_opinion: self.scenario.initial_opinion,
            master_seed: self.scenario.master_seed,
            replicates: self.scenario.replicates,
            freeze_network: self.scenario.freeze_network,
        }
    }

    pub fn lambda_grid(&self) -> Result<Vec<f64>, ConfigError> {
        match &self.grids.lambda {
            Some(g) => g.expand("grids.lambda"),
            None => default_lambda_grid().expand("grids.lambda"),
        }
    }

    pub fn mu_grid(&self) -> Result<Vec<f64>, ConfigError> {
        match &self.grids.mu {
            Some(g) => g.expand("grids.mu"),
            None => default_mu_grid().expand("grids.mu"),
        }
    }

    pub fn sweep_options(&self) -> SweepOptions {
        SweepOptions {
            plateau_band: self.output.plateau_band,
            snapshot_every: self.output.snapshot_every,
            record_trajectories: self.output.trajectories,
        }
    }

    /// Fully resolved copy: defaults materialized, grids expanded to explicit
    /// values, and the `[derived]` echo filled in. Re-running from this copy
    /// reproduces the original run exactly.
    pub fn resolved(&self, out_dir: &str, expand_grids: bool) -> ConfigFile {
        let mut echo = self.clone();
        let scenario = self.scenario_config();
        echo.output.dir = Some(out_dir.to_string());
        echo.output.snapshot_every =
            Some(self.output.snapshot_every.unwrap_or(self.influence.n as u64));
        echo.scenario.horizon = Some(scenario.horizon());
        if expand_grids {
            echo.grids.lambda = Some(GridSpec::Values(
                self.lambda_grid().expect("validated grids expand"),
            ));
            echo.grids.mu =
                Some(GridSpec::Values(self.mu_grid().expect("validated grids expand")));
        }
        let derived = DerivedEcho {
            horizon: scenario.horizon(),
            replicate0_seed: harness::replicate_seed(&scenario, 0),
            seed_scheme: "splitmix64(master_seed, cell_key(lambda, mu), replicate)",
        };
        echo.derived = toml::Value::try_from(derived).ok();
        echo
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [influence]
        family = "rr"
        n = 20
        d = 4

        [communication]
        family = "rr"
        n = 20
        d = 4

        [scenario]
        alpha = 0.5
        beta = 20.0
        lambda = 0.1
        mu = 0.001
        master_seed = 7
    "#;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = ConfigFile::parse(MINIMAL).unwrap();
        assert_eq!(cfg.scenario.innovator, 0);
        assert_eq!(cfg.scenario.replicates, 1);
        assert_eq!(cfg.scenario.initial_opinion, -1.0);
        assert_eq!(cfg.output.plateau_band, 0.2);
        let sc = cfg.scenario_config();
        assert_eq!(sc.horizon(), 4 * 20 * 20);
        assert_eq!(cfg.lambda_grid().unwrap().len(), 31);
        assert_eq!(cfg.mu_grid().unwrap().len(), 21);
    }

    #[test]
    fn unknown_keys_are_rejected_by_name() {
        let bad = MINIMAL.replace("master_seed = 7", "master_seed = 7\nbogus_key = 1");
        let err = ConfigFile::parse(&bad).unwrap_err();
        assert!(err.to_string().contains("bogus_key"), "{err}");
    }

    #[test]
    fn beta_inf_spelling() {
        let cfg = ConfigFile::parse(&MINIMAL.replace("beta = 20.0", "beta = \"inf\"")).unwrap();
        assert!(cfg.scenario.beta.is_infinite());
        let err = ConfigFile::parse(&MINIMAL.replace("beta = 20.0", "beta = \"infinite\""))
            .unwrap_err();
        assert!(err.to_string().contains("inf"), "{err}");
    }

    #[test]
    fn validation_names_the_offending_key() {
        let err = ConfigFile::parse(&MINIMAL.replace("lambda = 0.1", "lambda = 1.4")).unwrap_err();
        assert!(err.to_string().contains("scenario.lambda"), "{err}");
        let err = ConfigFile::parse(&MINIMAL.replace("n = 20\n        d = 4\n\n        [scenario]",
            "n = 30\n        d = 4\n\n        [scenario]")).unwrap_err();
        assert!(err.to_string().contains("communication.n"), "{err}");
    }

    #[test]
    fn grid_forms_expand() {
        let explicit = GridSpec::Values(vec![0.1, 0.2]);
        assert_eq!(explicit.expand("grids.lambda").unwrap(), vec![0.1, 0.2]);
        let range = GridSpec::Range { start: 0.0, stop: 0.6, step: 0.02 };
        let vals = range.expand("grids.lambda").unwrap();
        assert_eq!(vals.len(), 31);
        assert_eq!(vals[0], 0.0);
        assert!((vals[30] - 0.6).abs() < 1e-12);
        assert!(GridSpec::Range { start: 0.0, stop: 1.0, step: 0.0 }
            .expand("grids.mu")
            .is_err());
        assert!(GridSpec::Values(vec![1.5]).expand("grids.mu").is_err());
    }

    #[test]
    fn derived_section_is_ignored_on_input() {
        let cfg = ConfigFile::parse(MINIMAL).unwrap();
        let echoed = cfg.resolved("outdir", true).to_toml();
        let back = ConfigFile::parse(&echoed).unwrap();
        assert_eq!(back.scenario.horizon, Some(1600));
        assert_eq!(back.output.dir.as_deref(), Some("outdir"));
        // the re-parsed echo resolves to the same scenario
        let mut original = cfg.scenario_config();
        original.horizon = Some(original.horizon());
        assert_eq!(back.scenario_config(), original);
    }
}
