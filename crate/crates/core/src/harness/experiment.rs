use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::net::{init_params, read_params, write_params, MlpSpec, ParamVector};
use crate::optim::{run_optimizer, Algorithm, Objective, RunOutcome, RunRecord, StopCriteria, StopReason};
use crate::problems::{make_burgers_problem, make_sinc_dataset_with, BurgersObjective, SincProblem};

use super::config::{ExperimentConfig, ProblemConfig};
use super::output::{write_json, write_records_csv};
use super::HarnessError;

/// A problem instance built from a config.
pub enum Problem {
    Sinc(SincProblem),
    Burgers(BurgersObjective),
}

impl Problem {
    /// Burgers points are drawn with `seed`.
    pub fn build(config: &ProblemConfig, spec: &MlpSpec, seed: u64) -> Result<Self, HarnessError> {
        Ok(match config {
            ProblemConfig::Sinc(c) => {
                let data = make_sinc_dataset_with(c.n, c.convention)?;
                Problem::Sinc(SincProblem::new(spec.clone(), &data)?)
            }
            ProblemConfig::Burgers(c) => {
                let prob = make_burgers_problem(c, seed)?;
                Problem::Burgers(BurgersObjective::new(spec.clone(), prob)?)
            }
        })
    }

    pub fn objective(&self) -> &dyn Objective {
        match self {
            Problem::Sinc(p) => p,
            Problem::Burgers(p) => p,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSummary {
    pub optimizer: Algorithm,
    pub epochs: usize,
    pub initial_loss: f64,
    pub best_loss: f64,
    /// Epoch within the run, counted across phases.
    pub best_epoch: usize,
    pub final_loss: f64,
    pub stop_reason: StopReason,
    pub elapsed_s: f64,
    pub evals: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub problem: String,
    pub seed: u64,
    pub param_count: usize,
    pub best_loss: f64,
    pub best_epoch: usize,
    pub final_loss: f64,
    pub epochs: usize,
    pub wall_time_s: f64,
    pub stop_reason: StopReason,
    pub phases: Vec<PhaseSummary>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub records: Vec<RunRecord>,
    pub final_params: ParamVector,
    pub best_params: ParamVector,
    pub summary: RunSummary,
}

impl RunReport {
    pub fn numerical_failure(&self) -> bool {
        self.summary.phases.iter().any(|p| p.stop_reason == StopReason::NumericalFailure)
    }
}

/// Initial parameters: the warm-start file when given, else a seeded init.
pub fn initial_params(config: &ExperimentConfig) -> Result<ParamVector, HarnessError> {
    let Some(path) = &config.warm_start_path else {
        return Ok(init_params(&config.spec, config.seed));
    };
    let (spec, params) = read_params(path)
        .map_err(|e| HarnessError::Config(format!("warm start {}: {e}", path.display())))?;
    if params.len() != config.spec.param_count() {
        return Err(HarnessError::Config(format!(
            "warm start {} has {} parameters, the configured network needs {}",
            path.display(),
            params.len(),
            config.spec.param_count()
        )));
    }
    if spec != config.spec {
        return Err(HarnessError::Config(format!(
            "warm start {} was saved for a different network",
            path.display()
        )));
    }
    Ok(params)
}

fn phase_summary(out: &RunOutcome, epoch_offset: usize) -> PhaseSummary {
    PhaseSummary {
        optimizer: out.algorithm,
        epochs: out.records.len(),
        initial_loss: out.initial_loss,
        best_loss: out.best_loss,
        best_epoch: if out.best_epoch == 0 { epoch_offset } else { out.best_epoch + epoch_offset },
        final_loss: out.final_loss,
        stop_reason: out.stop_reason,
        elapsed_s: out.records.last().map_or(0.0, |r| r.elapsed_s),
        evals: out.total_evals,
    }
}

/// Trains one network with one optimizer. Writes `records.csv`,
/// `params.bin`, `best_params.bin` and `summary.json` into `out_dir` when
/// given.
pub fn run_single(config: &ExperimentConfig, out_dir: Option<&Path>) -> Result<RunReport, HarnessError> {
    config.validate()?;
    let initial = initial_params(config)?;
    let problem = Problem::build(&config.problem, &config.spec, config.seed)?;
    let start = Instant::now();
    let out = run_optimizer(
        problem.objective(),
        config.optimizer,
        &config.optimizer_params,
        &config.stop,
        initial,
        config.seed,
    )?;
    let phase = phase_summary(&out, 0);
    let summary = RunSummary {
        problem: config.problem.kind().to_string(),
        seed: config.seed,
        param_count: config.spec.param_count(),
        best_loss: out.best_loss,
        best_epoch: phase.best_epoch,
        final_loss: out.final_loss,
        epochs: out.records.len(),
        wall_time_s: start.elapsed().as_secs_f64(),
        stop_reason: out.stop_reason,
        phases: vec![phase],
    };
    let report = RunReport {
        records: out.records,
        final_params: out.final_params,
        best_params: out.best_params,
        summary,
    };
    if let Some(dir) = out_dir {
        save_report(dir, &config.spec, &report)?;
    }
    Ok(report)
}

/// Adam with `config`'s settings, then `second` from Adam's final
/// parameters. Records are numbered continuously with a phase tag; times
/// and evaluation counts accumulate across phases.
pub fn run_chained(
    config: &ExperimentConfig,
    second: Algorithm,
    second_stop: &StopCriteria,
    out_dir: Option<&Path>,
) -> Result<RunReport, HarnessError> {
    config.validate()?;
    second_stop.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
    if !matches!(second, Algorithm::Bfgs | Algorithm::Lbfgs) {
        return Err(HarnessError::Config(format!("chained second phase must be bfgs or lbfgs, got {second}")));
    }
    let initial = initial_params(config)?;
    let problem = Problem::build(&config.problem, &config.spec, config.seed)?;
    let start = Instant::now();
    let first = run_optimizer(
        problem.objective(),
        Algorithm::Adam,
        &config.optimizer_params,
        &config.stop,
        initial,
        config.seed,
    )?;
    let second_out = run_optimizer(
        problem.objective(),
        second,
        &config.optimizer_params,
        second_stop,
        first.final_params.clone(),
        config.seed,
    )?;

    let n1 = first.records.len();
    let p1 = phase_summary(&first, 0);
    let p2 = phase_summary(&second_out, n1);
    let (t1, e1) = (p1.elapsed_s, p1.evals);
    let mut records = first.records;
    records.extend(second_out.records.into_iter().map(|r| RunRecord {
        epoch: r.epoch + n1,
        elapsed_s: r.elapsed_s + t1,
        cumulative_evals: r.cumulative_evals + e1,
        ..r
    }));
    // Phase 2 starts where phase 1 ended, so its best can only tie or improve.
    let (best_loss, best_epoch, best_params) = if second_out.best_loss < first.best_loss {
        (second_out.best_loss, p2.best_epoch, second_out.best_params)
    } else {
        (first.best_loss, p1.best_epoch, first.best_params)
    };
    let summary = RunSummary {
        problem: config.problem.kind().to_string(),
        seed: config.seed,
        param_count: config.spec.param_count(),
        best_loss,
        best_epoch,
        final_loss: second_out.final_loss,
        epochs: records.len(),
        wall_time_s: start.elapsed().as_secs_f64(),
        stop_reason: second_out.stop_reason,
        phases: vec![p1, p2],
    };
    let report = RunReport {
        records,
        final_params: second_out.final_params,
        best_params,
        summary,
    };
    if let Some(dir) = out_dir {
        save_report(dir, &config.spec, &report)?;
    }
    Ok(report)
}

pub fn save_report(dir: &Path, spec: &MlpSpec, report: &RunReport) -> Result<Vec<PathBuf>, HarnessError> {
    std::fs::create_dir_all(dir)?;
    let paths = [
        dir.join("records.csv"),
        dir.join("params.bin"),
        dir.join("best_params.bin"),
        dir.join("summary.json"),
    ];
    write_records_csv(&paths[0], &report.records)?;
    write_params(&paths[1], spec, &report.final_params)?;
    write_params(&paths[2], spec, &report.best_params)?;
    write_json(&paths[3], &report.summary)?;
    Ok(paths.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::SincConfig;
    use crate::harness::output::read_records_csv;
    use crate::problems::BurgersConfig;

    fn small_sinc(optimizer: Algorithm, epochs: usize) -> ExperimentConfig {
        ExperimentConfig {
            problem: ProblemConfig::Sinc(SincConfig { n: 64, ..Default::default() }),
            spec: MlpSpec::new(1, &[6, 6], 1),
            optimizer,
            stop: StopCriteria::epochs(epochs),
            ..ExperimentConfig::sinc_default()
        }
    }

    #[test]
    fn one_epoch_writes_one_row_and_all_files() {
        let dir = tempfile::tempdir().unwrap();
        let report = run_single(&small_sinc(Algorithm::Lm, 1), Some(dir.path())).unwrap();
        assert_eq!(report.records.len(), 1);
        let back = read_records_csv(&dir.path().join("records.csv")).unwrap();
        assert_eq!(back, report.records);
        let (spec, best) = read_params(&dir.path().join("best_params.bin")).unwrap();
        assert_eq!(spec, MlpSpec::new(1, &[6, 6], 1));
        assert_eq!(best, report.best_params);
        let summary: RunSummary =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
        assert_eq!(summary, report.summary);
    }

    #[test]
    fn runs_are_reproducible() {
        for alg in [Algorithm::Adam, Algorithm::Lbfgs, Algorithm::Lm] {
            let cfg = small_sinc(alg, 15);
            let a: Vec<u64> = run_single(&cfg, None).unwrap().records.iter().map(|r| r.loss.to_bits()).collect();
            let b: Vec<u64> = run_single(&cfg, None).unwrap().records.iter().map(|r| r.loss.to_bits()).collect();
            assert_eq!(a, b, "{alg}");
        }
    }

    #[test]
    fn warm_start_resumes_from_file() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_sinc(Algorithm::Bfgs, 10);
        let first = run_single(&cfg, Some(dir.path())).unwrap();
        let warm = ExperimentConfig {
            warm_start_path: Some(dir.path().join("params.bin")),
            ..cfg
        };
        let second = run_single(&warm, None).unwrap();
        assert_eq!(second.summary.phases[0].initial_loss, first.summary.final_loss);
    }

    #[test]
    fn bad_warm_start_fails_before_training() {
        let dir = tempfile::tempdir().unwrap();
        let other = MlpSpec::new(1, &[3], 1);
        let path = dir.path().join("other.bin");
        write_params(&path, &other, &init_params(&other, 0)).unwrap();
        let cfg = ExperimentConfig {
            warm_start_path: Some(path),
            ..small_sinc(Algorithm::Lm, 5)
        };
        let out = dir.path().join("out");
        assert!(matches!(run_single(&cfg, Some(&out)), Err(HarnessError::Config(_))));
        assert!(!out.exists());

        let missing = ExperimentConfig {
            warm_start_path: Some(dir.path().join("missing.bin")),
            ..small_sinc(Algorithm::Lm, 5)
        };
        assert!(matches!(run_single(&missing, None), Err(HarnessError::Config(_))));

        let garbage = dir.path().join("garbage.bin");
        std::fs::write(&garbage, b"not a parameter file").unwrap();
        let cfg = ExperimentConfig {
            warm_start_path: Some(garbage),
            ..small_sinc(Algorithm::Lm, 5)
        };
        assert!(matches!(run_single(&cfg, None), Err(HarnessError::Config(_))));
    }

    #[test]
    fn chained_run_continues_from_adam() {
        let cfg = small_sinc(Algorithm::Adam, 20);
        let report = run_chained(&cfg, Algorithm::Lbfgs, &StopCriteria::epochs(15), None).unwrap();
        let [p1, p2] = &report.summary.phases[..] else { panic!() };
        assert_eq!(p1.optimizer, Algorithm::Adam);
        assert_eq!(p2.optimizer, Algorithm::Lbfgs);
        assert_eq!(p2.initial_loss, p1.final_loss);
        assert!(report.summary.best_loss <= p1.best_loss);
        assert_eq!(report.records.len(), p1.epochs + p2.epochs);
        for (i, r) in report.records.iter().enumerate() {
            assert_eq!(r.epoch, i + 1);
            assert_eq!(r.phase, if i < 20 { "adam" } else { "lbfgs" });
        }
        for w in report.records.windows(2) {
            assert!(w[1].elapsed_s >= w[0].elapsed_s);
            assert!(w[1].cumulative_evals >= w[0].cumulative_evals);
        }
        let best = report.records.iter().map(|r| r.loss).fold(f64::INFINITY, f64::min);
        assert_eq!(report.summary.best_loss, best.min(p1.initial_loss));
        assert_eq!(report.records[report.summary.best_epoch - 1].loss, report.summary.best_loss);
        assert!((report.summary.phases.iter().map(|p| p.elapsed_s).sum::<f64>()
            - report.records.last().unwrap().elapsed_s)
            .abs()
            < 1e-9);
    }

    #[test]
    fn chained_rejects_non_quasi_newton_second_phase() {
        let cfg = small_sinc(Algorithm::Adam, 2);
        assert!(matches!(
            run_chained(&cfg, Algorithm::Lm, &StopCriteria::epochs(2), None),
            Err(HarnessError::Config(_))
        ));
    }

    #[test]
    fn burgers_run_writes_summary() {
        let cfg = ExperimentConfig {
            problem: ProblemConfig::Burgers(BurgersConfig {
                n_ic: 10,
                n_bc: 10,
                n_f: 40,
                ..Default::default()
            }),
            spec: MlpSpec::uniform(2, 2, 6, 1),
            stop: StopCriteria::epochs(3),
            ..ExperimentConfig::burgers_default()
        };
        let report = run_single(&cfg, None).unwrap();
        assert_eq!(report.summary.problem, "burgers");
        assert!(report.summary.best_loss <= report.summary.phases[0].initial_loss);
    }
}
