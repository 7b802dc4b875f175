use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::net::MlpSpec;
use crate::optim::{Algorithm, StopCriteria};

use super::config::{ExperimentConfig, GridConfig, ProblemConfig};
use super::experiment::run_single;
use super::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub layers: usize,
    pub hidden_units: usize,
    pub param_count: usize,
    pub best_loss: f64,
    pub best_epoch: usize,
    pub records_path: Option<PathBuf>,
}

pub const GRID_HEADER: [&str; 6] = ["layers", "hidden_units", "param_count", "best_loss", "best_epoch", "records_path"];

fn cell_config(grid: &GridConfig, layers: usize, hidden_units: usize) -> ExperimentConfig {
    ExperimentConfig {
        problem: ProblemConfig::Sinc(grid.sinc),
        spec: MlpSpec::uniform(1, layers, hidden_units, 1),
        optimizer: Algorithm::Adam,
        optimizer_params: grid.optimizer_params,
        stop: StopCriteria::epochs(grid.epochs),
        seed: grid.seed,
        warm_start_path: None,
        chain: None,
    }
}

/// One Adam run per (layers, hidden units) cell, in parallel. Rows are
/// ordered by layers then hidden units. With `out_dir`, each cell's files go
/// to `l{layers}_hu{units}/` and the table to `grid.csv`.
pub fn run_grid(grid: &GridConfig, out_dir: Option<&Path>) -> Result<Vec<GridResult>, HarnessError> {
    grid.validate()?;
    let cells: Vec<(usize, usize)> = grid
        .layers
        .iter()
        .flat_map(|&l| grid.hidden_units.iter().map(move |&h| (l, h)))
        .collect();
    let rows = cells
        .par_iter()
        .map(|&(layers, hidden_units)| {
            let cfg = cell_config(grid, layers, hidden_units);
            let dir = out_dir.map(|d| d.join(format!("l{layers}_hu{hidden_units}")));
            let report = run_single(&cfg, dir.as_deref())?;
            Ok(GridResult {
                layers,
                hidden_units,
                param_count: cfg.spec.param_count(),
                best_loss: report.summary.best_loss,
                best_epoch: report.summary.best_epoch,
                records_path: dir.map(|d| d.join("records.csv")),
            })
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    if let Some(dir) = out_dir {
        write_grid_csv(&dir.join("grid.csv"), &rows)?;
    }
    Ok(rows)
}

pub fn write_grid_csv(path: &Path, rows: &[GridResult]) -> Result<(), HarnessError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(GRID_HEADER)?;
    for r in rows {
        w.write_record([
            r.layers.to_string(),
            r.hidden_units.to_string(),
            r.param_count.to_string(),
            format!("{:.16e}", r.best_loss),
            r.best_epoch.to_string(),
            r.records_path.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_grid_csv(path: &Path) -> Result<Vec<GridResult>, HarnessError> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<Result<Vec<GridResult>, _>>()?)
}
