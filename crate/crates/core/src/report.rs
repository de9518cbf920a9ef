//! Plot-ready CSV and JSON writers. All numeric CSV fields are emitted with
//! 9 significant digits and are checked to be finite before anything touches
//! disk.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::analysis::{RegimeLabel, TheoryReport, ThresholdEstimate};
use crate::dynamics::{PopulationState, Sample};
use crate::harness::SweepResult;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("refusing to write non-finite {what} = {value}")]
    NonFinite { what: &'static str, value: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("json serialization failed: {0}")]
    Json(#[from] serde_json::Error),
}

fn finite(x: f64, what: &'static str) -> Result<f64, ReportError> {
    if x.is_finite() {
        // normalize -0.0 so equal runs emit equal bytes
        Ok(if x == 0.0 { 0.0 } else { x })
    } else {
        Err(ReportError::NonFinite { what, value: x })
    }
}

/// 9 significant digits in scientific notation.
pub fn fmt_sig9(x: f64) -> String {
    format!("{:.8e}", x)
}

/// `t, avg_x, avg_y` rows.
pub fn write_trajectory_csv(path: &Path, samples: &[Sample]) -> Result<(), ReportError> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "t,avg_x,avg_y")?;
    for s in samples {
        writeln!(
            out,
            "{},{},{}",
            s.t,
            fmt_sig9(finite(s.avg_x, "avg_x")?),
            fmt_sig9(finite(s.avg_y, "avg_y")?)
        )?;
    }
    Ok(())
}

/// `node, x, y` rows for the final state.
pub fn write_final_state_csv(path: &Path, state: &PopulationState) -> Result<(), ReportError> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "node,x,y")?;
    for i in 0..state.n() {
        writeln!(out, "{},{},{}", i, state.x()[i], fmt_sig9(finite(state.y()[i], "y")?))?;
    }
    Ok(())
}

/// `lambda, mu, replicate, seed, avg_x, avg_y, regime` rows, cell-major.
pub fn write_sweep_csv(path: &Path, sweep: &SweepResult) -> Result<(), ReportError> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "lambda,mu,replicate,seed,avg_x,avg_y,regime")?;
    for cell in &sweep.cells {
        for o in &cell.outcomes {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                fmt_sig9(finite(cell.lambda, "lambda")?),
                fmt_sig9(finite(cell.mu, "mu")?),
                o.replicate,
                o.seed,
                fmt_sig9(finite(o.avg_x, "avg_x")?),
                fmt_sig9(finite(o.avg_y, "avg_y")?),
                o.regime
            )?;
        }
    }
    Ok(())
}

/// `lambda, variance, mean_fraction` rows of the threshold experiment.
pub fn write_variance_csv(path: &Path, est: &ThresholdEstimate) -> Result<(), ReportError> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "lambda,variance,mean_fraction")?;
    for i in 0..est.grid.len() {
        writeln!(
            out,
            "{},{},{}",
            fmt_sig9(finite(est.grid[i], "lambda")?),
            fmt_sig9(finite(est.variance[i], "variance")?),
            fmt_sig9(finite(est.mean_fraction[i], "mean_fraction")?)
        )?;
    }
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ReportError> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

/// Per-cell aggregates serialized into `summary.json`.
#[derive(Debug, Serialize)]
pub struct CellSummary {
    pub lambda: f64,
    pub mu: f64,
    pub mean_x: f64,
    pub mean_y: f64,
    pub mean_fraction: f64,
    pub var_fraction: f64,
    pub modal_regime: RegimeLabel,
}

#[derive(Debug, Serialize)]
pub struct SweepSummary {
    pub lambda_grid: Vec<f64>,
    pub mu_grid: Vec<f64>,
    pub replicates: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_hat: Option<f64>,
    pub cells: Vec<CellSummary>,
}

impl SweepSummary {
    pub fn new(sweep: &SweepResult, lambda_hat: Option<f64>) -> Self {
        SweepSummary {
            lambda_grid: sweep.lambda_grid.clone(),
            mu_grid: sweep.mu_grid.clone(),
            replicates: sweep.replicates,
            lambda_hat,
            cells: sweep
                .cells
                .iter()
                .map(|c| CellSummary {
                    lambda: c.lambda,
                    mu: c.mu,
                    mean_x: c.mean_x,
                    mean_y: c.mean_y,
                    mean_fraction: c.mean_fraction,
                    var_fraction: c.var_fraction,
                    modal_regime: c.modal_regime,
                })
                .collect(),
        }
    }
}

/// `summary.json` payload of a single simulation run.
#[derive(Debug, Serialize)]
pub struct SimulateSummary {
    pub seed: u64,
    pub horizon: u64,
    pub avg_x: f64,
    pub avg_y: f64,
    pub adoption_fraction: f64,
    pub regime: RegimeLabel,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theory: Option<TheoryReport>,
    /// (influence, communication) regeneration attempts burned on structure.
    pub regen_attempts: (usize, usize),
}
