//! Scenario runs: single solves, SES sweeps, metrics, output files and
//! the command-line front end.

pub mod cli;
mod emit;
mod metrics;
mod sweep;

use thiserror::Error;

use crate::casemodel::{CaseData, CaseError};
use crate::formulation::{build_problem, FormulationError, Problem};
use crate::solver::{solve, Solution, SolverError, SolverOptions};

pub use emit::{
    emit, solve_report, Output, sweep_csv_string, write_sweep_csv, AggregatorReport, BusReport,
    GeneratorReport, LineReport, OutputFormat, SolveReport,
};
pub use metrics::Metrics;
pub use sweep::{scale_points, ses_sweep, SweepRecord, SweepResult};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Case(#[from] CaseError),
    #[error(transparent)]
    Formulation(#[from] FormulationError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("invalid sweep range: {0}")]
    InvalidRange(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("unsupported output format: {0}")]
    UnsupportedFormat(&'static str),
    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("json output failed: {0}")]
    Json(#[from] serde_json::Error),
}

/// A solved case with its derived metrics.
#[derive(Debug, Clone)]
pub struct SolveRun {
    pub problem: Problem<f64>,
    pub solution: Solution<f64>,
    pub metrics: Metrics,
}

/// Solves `case` at its stored socioeconomic scores.
pub fn run_solve(case: &CaseData, opts: &SolverOptions) -> Result<SolveRun, HarnessError> {
    let problem: Problem<f64> = build_problem(case)?;
    let solution = solve(&problem, opts)?;
    let metrics = Metrics::from_point(&problem, &solution.x);
    Ok(SolveRun {
        problem,
        solution,
        metrics,
    })
}
