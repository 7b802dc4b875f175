//! Experiment orchestration: JSON configs, single and chained runs, the
//! Adam depth-by-width grid, and the files they write.

mod config;
mod experiment;
mod grid;
mod output;

use thiserror::Error;

use crate::net::NetError;
use crate::optim::OptimError;
use crate::problems::ProblemError;

pub use config::{
    ChainPhase, ExperimentConfig, GridConfig, ProblemConfig, SincConfig, DESK_COLLOCATION_POINTS, DESK_SINC_POINTS,
};
pub use experiment::{initial_params, run_chained, run_single, save_report, PhaseSummary, Problem, RunReport, RunSummary};
pub use grid::{read_grid_csv, run_grid, write_grid_csv, GridResult, GRID_HEADER};
pub use output::{
    export_fit_curve, read_curve_csv, read_records_csv, write_curve_csv, write_json, write_records_csv, CurvePoint,
    RECORDS_HEADER,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Optim(#[from] OptimError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    /// Process exit code: 2 for numerical failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Numerical(_) => 2,
            _ => 1,
        }
    }
}
