//! CSV and JSON files written by the harness. Floats are written with 17
//! significant digits so every file parses back to identical values.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::linalg::DenseMatrix;
use crate::net::{forward, MlpSpec};
use crate::optim::RunRecord;
use crate::problems::{sinc_target_with, SincConvention, SINC_DOMAIN};

use super::HarnessError;

pub const RECORDS_HEADER: [&str; 5] = ["epoch", "loss", "elapsed_s", "cumulative_evals", "phase"];

fn float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_records_csv(path: &Path, records: &[RunRecord]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(RECORDS_HEADER)?;
    for r in records {
        w.write_record([
            r.epoch.to_string(),
            float(r.loss),
            float(r.elapsed_s),
            r.cumulative_evals.to_string(),
            r.phase.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records_csv(path: &Path) -> Result<Vec<RunRecord>, HarnessError> {
    let mut r = csv::Reader::from_path(path)?;
    if r.headers()?.iter().ne(RECORDS_HEADER) {
        return Err(HarnessError::Config(format!("{}: unexpected records header", path.display())));
    }
    Ok(r.deserialize().collect::<Result<Vec<RunRecord>, _>>()?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| HarnessError::Config(e.to_string()))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

/// One row of a fitted-curve export.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub x: f64,
    pub y_model: f64,
    pub y_target: f64,
}

/// Model and target on `n_points` evenly spaced `x` over the sinc domain.
pub fn export_fit_curve(
    spec: &MlpSpec,
    params: &[f64],
    n_points: usize,
    convention: SincConvention,
) -> Result<Vec<CurvePoint>, HarnessError> {
    if n_points < 2 {
        return Err(HarnessError::Config(format!("curve needs at least 2 points, got {n_points}")));
    }
    if spec.input_dim != 1 || spec.output_dim != 1 {
        return Err(HarnessError::Config("curve export needs a 1 -> 1 network".into()));
    }
    let (lo, hi) = SINC_DOMAIN;
    let xs: Vec<f64> = (0..n_points)
        .map(|i| if i == n_points - 1 { hi } else { lo + (hi - lo) * i as f64 / (n_points - 1) as f64 })
        .collect();
    let y = forward(spec, params, &DenseMatrix::column(&xs))?;
    Ok(xs
        .iter()
        .enumerate()
        .map(|(i, &x)| CurvePoint {
            x,
            y_model: y.get(i, 0),
            y_target: sinc_target_with(x, convention),
        })
        .collect())
}

pub fn write_curve_csv(path: &Path, curve: &[CurvePoint]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["x", "y_model", "y_target"])?;
    for p in curve {
        w.write_record([float(p.x), float(p.y_model), float(p.y_target)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_curve_csv(path: &Path) -> Result<Vec<CurvePoint>, HarnessError> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<Result<Vec<CurvePoint>, _>>()?)
}
