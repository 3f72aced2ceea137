//! Experiment orchestration on `f64`: batches of runs, the active/passive
//! label-complexity curve, the empirical-process scaling experiment, the
//! inequality suites and result files.
//!
//! Seeds are independent work items and run in parallel; results are always
//! collected in seed order, so output files do not depend on scheduling.

mod checks;
mod config;
mod curve;
mod export;
mod gap;
pub mod stats;

pub use checks::{
    gap_scaling, gradient_checks, lemma_bounds_report, psi_checks, psi_grid, query_rule_equivalence, run_checks,
    CheckRow, SUITES,
};
pub use config::{CheckConfig, ExperimentConfig, GapCheck, ModelSpec, PassiveSearch};
pub use curve::{label_complexity_curve, Curve, CurvePoint, CurveRow};
pub use export::{
    export_results, read_checks_csv, read_curve_csv, write_checks_csv, write_curve_csv, write_run_records,
    ExportPaths, OutputHeader, CHECKS_FILE, CURVE_FILE, RUN_RECORDS_FILE,
};
pub use gap::{empirical_process_gap, empirical_process_gaps};

use std::path::PathBuf;

use rayon::prelude::*;
use thiserror::Error;

use crate::data::ModelError;
use crate::driver::{run_active_on_model, DriverError, RunFailure, RunRecord, ScheduleError};
use crate::geometry::GeometryError;
use crate::losses::LossError;
use crate::solvers::SolverError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Driver(#[from] DriverError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("run {seed} failed: {failure}")]
    Run { seed: u64, failure: RunFailure<f64> },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
}

/// Outcome of the active run with seed index `index`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedRun {
    pub index: u64,
    pub result: Result<RunRecord<f64>, RunFailure<f64>>,
}

impl SeedRun {
    /// The full record, or the partial trace of a failed run.
    pub fn record(&self) -> &RunRecord<f64> {
        match &self.result {
            Ok(rec) => rec,
            Err(f) => &f.partial,
        }
    }
}

/// One active run of `config.epochs` epochs per seed index.
pub fn run_seeds(config: &ExperimentConfig) -> Result<Vec<SeedRun>, HarnessError> {
    config.validate()?;
    config.require_seeds()?;
    let model = config.model.build()?;
    let run = config.run_config(config.epochs);
    Ok(config
        .seeds
        .par_iter()
        .map(|&index| SeedRun {
            index,
            result: run_active_on_model(&model, &run, config.run_seed(index)),
        })
        .collect())
}
