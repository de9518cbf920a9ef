//! Command-line front end: binds config files to the network generators,
//! simulation engine, analysis, and the Monte Carlo harness, and emits
//! plot-ready CSV/JSON. Exit codes: 0 success, 1 config error, 2 runtime
//! error.

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use coevo::analysis;
use coevo::config::{ConfigError, ConfigFile};
use coevo::harness::{self, HarnessError};
use coevo::netgen::{self, GraphFamily, TopologySpec};
use coevo::report::{self, ReportError, SimulateSummary, SweepSummary};

#[derive(Parser)]
#[command(name = "coevo", version, about = "Coevolving opinion/decision dynamics simulator")]
struct Cli {
    /// Master seed; overrides scenario.master_seed from the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides output.dir (default "out").
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads for replicated runs (default: all cores). Results are
    /// identical for any thread count.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Chatty progress on stderr.
    #[arg(long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate one network layer and write it as an edge list.
    Generate {
        #[arg(long, value_enum)]
        family: GraphFamily,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
        /// Rewiring probability (ws only).
        #[arg(long)]
        p: Option<f64>,
        /// Output file (default <out-dir>/<family>_n<n>_d<d>_seed<seed>.edges).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one simulation and write trajectory, final state, and theory report.
    Simulate { config: PathBuf },
    /// Sweep the commitment grid and estimate the variance-peak threshold.
    EstimateThreshold { config: PathBuf },
    /// Full (lambda, mu) grid sweep with per-cell aggregates.
    Sweep2d { config: PathBuf },
    /// Closed-form exclusion check on a realized network, no simulation.
    TheoryCheck { config: PathBuf },
}

enum AppError {
    Config(String),
    Runtime(String),
}

impl fmt::Display for AppError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AppError::Config(m) => write!(f, "config error: {m}"),
            AppError::Runtime(m) => write!(f, "runtime error: {m}"),
        }
    }
}

impl AppError {
    fn exit_code(&self) -> u8 {
        match self {
            AppError::Config(_) => 1,
            AppError::Runtime(_) => 2,
        }
    }
}

impl From<ConfigError> for AppError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } => AppError::Runtime(e.to_string()),
            _ => AppError::Config(e.to_string()),
        }
    }
}

impl From<HarnessError> for AppError {
    fn from(e: HarnessError) -> Self {
        match &e {
            HarnessError::InvalidScenario(_) => AppError::Config(e.to_string()),
            HarnessError::Graph(netgen::GraphError::InvalidSpec(_)) => {
                AppError::Config(e.to_string())
            }
            _ => AppError::Runtime(e.to_string()),
        }
    }
}

impl From<ReportError> for AppError {
    fn from(e: ReportError) -> Self {
        AppError::Runtime(e.to_string())
    }
}

impl From<analysis::AnalysisError> for AppError {
    fn from(e: analysis::AnalysisError) -> Self {
        AppError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for AppError {
    fn from(e: std::io::Error) -> Self {
        AppError::Runtime(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), AppError> {
    // the harness parallelizes over (cell, replicate); a sized pool keeps
    // thread count explicit without affecting results
    let pool = match cli.threads {
        Some(t) => Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| AppError::Runtime(e.to_string()))?,
        ),
        None => None,
    };
    let run = || match &cli.command {
        Command::Generate { family, n, d, p, out } => {
            cmd_generate(&cli, *family, *n, *d, *p, out.as_deref())
        }
        Command::Simulate { config } => cmd_simulate(&cli, config),
        Command::EstimateThreshold { config } => cmd_estimate_threshold(&cli, config),
        Command::Sweep2d { config } => cmd_sweep2d(&cli, config),
        Command::TheoryCheck { config } => cmd_theory_check(&cli, config),
    };
    match pool {
        Some(pool) => pool.install(run),
        None => run(),
    }
}

fn out_dir(cli: &Cli, cfg: Option<&ConfigFile>) -> Result<PathBuf, AppError> {
    let dir = cli
        .out_dir
        .clone()
        .or_else(|| cfg.and_then(|c| c.output.dir.as_ref().map(PathBuf::from)))
        .unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn load_config(cli: &Cli, path: &Path) -> Result<ConfigFile, AppError> {
    let mut cfg = ConfigFile::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.scenario.master_seed = seed; // flag > file
    }
    Ok(cfg)
}

fn write_echo(cfg: &ConfigFile, dir: &Path, expand_grids: bool) -> Result<(), AppError> {
    let echoed = cfg.resolved(&dir.display().to_string(), expand_grids);
    std::fs::write(dir.join("resolved_config.toml"), echoed.to_toml())?;
    Ok(())
}

fn cmd_generate(
    cli: &Cli,
    family: GraphFamily,
    n: usize,
    d: usize,
    p: Option<f64>,
    out: Option<&Path>,
) -> Result<(), AppError> {
    let spec = TopologySpec::new(family, n, d, p);
    spec.validate().map_err(|e| AppError::Config(e.to_string()))?;
    let seed = cli.seed.unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let graph = spec.generate(&mut rng).map_err(|e| AppError::Runtime(e.to_string()))?;

    let path = match out {
        Some(p) => p.to_path_buf(),
        None => out_dir(cli, None)?.join(format!("{family}_n{n}_d{d}_seed{seed}.edges")),
    };
    let file = std::fs::File::create(&path)?;
    netgen::write_edge_list(&graph, std::io::BufWriter::new(file))
        .map_err(|e| AppError::Runtime(e.to_string()))?;

    let degrees: Vec<usize> = graph.degrees().collect();
    let mean = degrees.iter().sum::<usize>() as f64 / n as f64;
    println!(
        "family={family} n={n} edges={} connected={} degree_min={} degree_mean={mean} degree_max={}",
        graph.edge_count(),
        graph.is_connected(),
        degrees.iter().min().unwrap(),
        degrees.iter().max().unwrap(),
    );
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_simulate(cli: &Cli, config_path: &Path) -> Result<(), AppError> {
    let cfg = load_config(cli, config_path)?;
    let dir = out_dir(cli, Some(&cfg))?;
    let scenario = cfg.scenario_config();
    let opts = cfg.sweep_options();

    let single = harness::run_single(&scenario, &opts)?;
    if cli.verbose || cfg.output.verbose {
        eprintln!(
            "seed={} regen_attempts={:?} samples={}",
            single.seed,
            single.regen_attempts,
            single.summary.samples.len()
        );
    }

    report::write_trajectory_csv(&dir.join("trajectory.csv"), &single.summary.samples)?;
    report::write_final_state_csv(&dir.join("final_state.csv"), &single.summary.final_state)?;
    if let Some(theory) = &single.theory {
        report::write_json(&dir.join("theory_report.json"), theory)?;
    }
    let summary = SimulateSummary {
        seed: single.seed,
        horizon: scenario.horizon(),
        avg_x: single.avg_x,
        avg_y: single.avg_y,
        adoption_fraction: (single.avg_x + 1.0) / 2.0,
        regime: single.regime,
        theory: single.theory.clone(),
        regen_attempts: single.regen_attempts,
    };
    report::write_json(&dir.join("summary.json"), &summary)?;
    write_echo(&cfg, &dir, false)?;

    println!(
        "regime={} avg_x={} avg_y={} (horizon {})",
        single.regime,
        report::fmt_sig9(single.avg_x),
        report::fmt_sig9(single.avg_y),
        scenario.horizon()
    );
    Ok(())
}

fn cmd_estimate_threshold(cli: &Cli, config_path: &Path) -> Result<(), AppError> {
    let cfg = load_config(cli, config_path)?;
    if cfg.scenario.replicates < 2 {
        return Err(AppError::Config(
            "config key `scenario.replicates`: threshold estimation needs at least 2".into(),
        ));
    }
    let dir = out_dir(cli, Some(&cfg))?;
    let scenario = cfg.scenario_config();
    let opts = cfg.sweep_options();
    let grid = cfg.lambda_grid()?;

    let (sweep, estimate) = harness::lambda_sweep(&scenario, &grid, &opts)?;

    report::write_variance_csv(&dir.join("variance_curve.csv"), &estimate)?;
    report::write_sweep_csv(&dir.join("sweep.csv"), &sweep)?;
    report::write_json(&dir.join("summary.json"), &SweepSummary::new(&sweep, Some(estimate.lambda_hat)))?;
    write_trajectories(&dir, &sweep, &cfg)?;
    write_echo(&cfg, &dir, true)?;

    println!("lambda_hat={}", report::fmt_sig9(estimate.lambda_hat));
    Ok(())
}

fn cmd_sweep2d(cli: &Cli, config_path: &Path) -> Result<(), AppError> {
    let cfg = load_config(cli, config_path)?;
    let dir = out_dir(cli, Some(&cfg))?;
    let scenario = cfg.scenario_config();
    let opts = cfg.sweep_options();
    let lambda_grid = cfg.lambda_grid()?;
    let mu_grid = cfg.mu_grid()?;

    let sweep = harness::grid_sweep(&scenario, &lambda_grid, &mu_grid, &opts)?;

    // a degenerate mu grid makes this a threshold experiment as well
    let lambda_hat = if mu_grid.len() == 1 && scenario.replicates >= 2 {
        let fractions: Vec<Vec<f64>> = sweep
            .cells
            .iter()
            .map(|c| c.outcomes.iter().map(|o| o.adoption_fraction()).collect())
            .collect();
        Some(analysis::estimate_lambda_hat(&lambda_grid, &fractions)?.lambda_hat)
    } else {
        None
    };

    report::write_sweep_csv(&dir.join("sweep.csv"), &sweep)?;
    report::write_json(&dir.join("summary.json"), &SweepSummary::new(&sweep, lambda_hat))?;
    write_trajectories(&dir, &sweep, &cfg)?;
    write_echo(&cfg, &dir, true)?;

    let mut counts = std::collections::BTreeMap::new();
    for cell in &sweep.cells {
        *counts.entry(cell.modal_regime.as_str()).or_insert(0usize) += 1;
    }
    let regions: Vec<String> = counts.iter().map(|(k, v)| format!("{k}={v}")).collect();
    println!("cells={} modal regimes: {}", sweep.cells.len(), regions.join(" "));
    Ok(())
}

fn write_trajectories(dir: &Path, sweep: &coevo::SweepResult, cfg: &ConfigFile) -> Result<(), AppError> {
    if !cfg.output.trajectories {
        return Ok(());
    }
    let traj_dir = dir.join("trajectories");
    std::fs::create_dir_all(&traj_dir)?;
    for cell in &sweep.cells {
        for o in &cell.outcomes {
            if let Some(samples) = &o.samples {
                let name = format!(
                    "lambda{:.4}_mu{:.6}_rep{}.csv",
                    cell.lambda, cell.mu, o.replicate
                );
                report::write_trajectory_csv(&traj_dir.join(name), samples)?;
            }
        }
    }
    Ok(())
}

fn cmd_theory_check(cli: &Cli, config_path: &Path) -> Result<(), AppError> {
    let cfg = load_config(cli, config_path)?;
    let dir = out_dir(cli, Some(&cfg))?;
    let scenario = cfg.scenario_config();

    let built = harness::build_scenario(&scenario)?;
    let report_data = analysis::theorem_check(
        &built.net,
        cfg.scenario.innovator,
        scenario.alpha,
        scenario.lambda,
    )
    .map_err(|e| AppError::Runtime(e.to_string()))?;

    report::write_json(&dir.join("theory_report.json"), &report_data)?;
    write_echo(&cfg, &dir, false)?;

    match report_data.lambda_star {
        Some(ls) => println!(
            "d_star={} lambda_star={} excluded={}",
            report_data.d_star,
            report::fmt_sig9(ls),
            report_data.paradigm_shift_excluded
        ),
        None => println!(
            "d_star={} lambda_star=n/a (alpha >= d*-2) excluded=false",
            report_data.d_star
        ),
    }
    Ok(())
}
