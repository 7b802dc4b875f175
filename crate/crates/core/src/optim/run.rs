use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::{matvec_transposed, norm_inf, DenseVector};
use crate::net::{ParamVector, ResidualJacobian};

use super::{
    AdamConfig, AdamState, Algorithm, BfgsState, Counted, LbfgsConfig, LbfgsState, LmConfig,
    LmState, Objective, OptimError, WolfeParams,
};

/// LM is considered stalled once a fully rejected epoch leaves λ above this.
const LM_STALL_LAMBDA: f64 = 1e16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopCriteria {
    pub max_epochs: usize,
    /// Stop once `‖∇‖∞ <= grad_tol`.
    #[serde(default)]
    pub grad_tol: f64,
    /// Stop once `loss <= loss_tol`.
    #[serde(default)]
    pub loss_tol: f64,
    /// Stop after this many epochs without a new best loss.
    #[serde(default)]
    pub patience: Option<usize>,
}

impl StopCriteria {
    pub fn epochs(max_epochs: usize) -> Self {
        Self {
            max_epochs,
            grad_tol: 0.0,
            loss_tol: 0.0,
            patience: None,
        }
    }

    pub fn validate(&self) -> Result<(), OptimError> {
        if self.max_epochs == 0 {
            return Err(OptimError::InvalidStop("max_epochs must be at least 1".into()));
        }
        if !(self.grad_tol >= 0.0) || !(self.loss_tol >= 0.0) {
            return Err(OptimError::InvalidStop("tolerances must be non-negative".into()));
        }
        if self.patience == Some(0) {
            return Err(OptimError::InvalidStop("patience must be at least 1".into()));
        }
        Ok(())
    }
}

/// Settings for every algorithm; a run reads only the ones it needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct OptimizerConfig {
    pub adam: AdamConfig,
    pub lbfgs: LbfgsConfig,
    pub lm: LmConfig,
    pub wolfe: WolfeParams,
    /// Adam mini-batch size; `None` means full batch.
    pub batch_size: Option<usize>,
}

/// One row per epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub epoch: usize,
    pub loss: f64,
    pub elapsed_s: f64,
    pub cumulative_evals: usize,
    pub phase: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxEpochs,
    GradTol,
    LossTol,
    Patience,
    /// No further progress possible (line search or LM damping exhausted).
    Stalled,
    /// Non-finite loss, or LM never accepted a step.
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub algorithm: Algorithm,
    pub initial_loss: f64,
    pub final_params: ParamVector,
    pub final_loss: f64,
    pub best_params: ParamVector,
    pub best_loss: f64,
    /// 0 when no epoch improved on the initial parameters.
    pub best_epoch: usize,
    pub records: Vec<RunRecord>,
    pub stop_reason: StopReason,
    pub total_evals: usize,
}

enum Engine {
    Adam(AdamState),
    Bfgs(BfgsState),
    Lbfgs(LbfgsState),
    Lm(LmState),
}

/// Where the run currently stands: loss plus whatever derivative data the
/// algorithm carries between epochs.
struct Point {
    loss: f64,
    grad: DenseVector,
    rj: Option<ResidualJacobian>,
}

fn lm_point(rj: ResidualJacobian) -> Point {
    let loss = rj.residuals.iter().map(|r| r * r).sum();
    let mut grad = matvec_transposed(&rj.jacobian, &rj.residuals).expect("jacobian shape");
    grad.iter_mut().for_each(|g| *g *= 2.0);
    Point {
        loss,
        grad,
        rj: Some(rj),
    }
}

/// Trains `initial` on `problem` with `algorithm` until a stopping rule
/// fires. One epoch is one full-batch optimizer iteration (one pass of
/// mini-batches for Adam with `batch_size`); the loss recorded is the
/// full-batch loss after the epoch.
pub fn run_optimizer<O: Objective + ?Sized>(
    problem: &O,
    algorithm: Algorithm,
    config: &OptimizerConfig,
    stop: &StopCriteria,
    initial: ParamVector,
    seed: u64,
) -> Result<RunOutcome, OptimError> {
    stop.validate()?;
    let n = problem.num_params();
    if initial.len() != n {
        return Err(OptimError::Dimension {
            expected: n,
            got: initial.len(),
        });
    }
    let counted = Counted::new(problem);
    let start = Instant::now();
    let mut engine = match algorithm {
        Algorithm::Adam => Engine::Adam(AdamState::new(n, config.adam)),
        Algorithm::Bfgs => Engine::Bfgs(BfgsState::new(n)),
        Algorithm::Lbfgs => Engine::Lbfgs(LbfgsState::new(n, config.lbfgs)),
        Algorithm::Lm => Engine::Lm(LmState::new(config.lm)?),
    };
    let minibatch = match (algorithm, config.batch_size, problem.num_samples()) {
        (Algorithm::Adam, Some(b), Some(total)) if b < total => Some((b.max(1), total)),
        (Algorithm::Adam, Some(b), None) => {
            return Err(OptimError::Objective(format!(
                "mini-batch size {b} requested but the objective cannot be subsampled"
            )))
        }
        _ => None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut params = initial;
    let mut point = if algorithm == Algorithm::Lm {
        let rj = counted
            .residual_jacobian(&params)
            .ok_or(OptimError::NotLeastSquares(algorithm))?;
        lm_point(rj)
    } else {
        let (loss, grad) = counted.loss_and_gradient(&params);
        Point { loss, grad, rj: None }
    };
    let initial_loss = point.loss;
    let mut best_loss = point.loss;
    let mut best_params = params.clone();
    let mut best_epoch = 0;
    let mut since_best = 0;
    let mut records = Vec::with_capacity(stop.max_epochs);
    let mut lm_accepted = 0usize;
    let mut just_reset = false;
    let mut stop_reason = StopReason::MaxEpochs;

    for epoch in 1..=stop.max_epochs {
        let mut stalled = false;
        match &mut engine {
            Engine::Adam(state) => {
                match minibatch {
                    None => state.step(&mut params, &point.grad),
                    Some((b, total)) => {
                        let mut order: Vec<usize> = (0..total).collect();
                        order.shuffle(&mut rng);
                        for chunk in order.chunks(b) {
                            let (_, g) = counted
                                .minibatch(&params, chunk)
                                .ok_or_else(|| OptimError::Objective("mini-batch gradient unavailable".into()))?;
                            state.step(&mut params, &g);
                        }
                    }
                }
                let (loss, grad) = counted.loss_and_gradient(&params);
                point = Point { loss, grad, rj: None };
            }
            Engine::Bfgs(_) | Engine::Lbfgs(_) => {
                let eval = |x: &[f64]| counted.loss_and_gradient(x);
                let out = match &mut engine {
                    Engine::Bfgs(s) => s.step(&mut params, point.loss, &point.grad, eval, &config.wolfe)?,
                    Engine::Lbfgs(s) => s.step(&mut params, point.loss, &point.grad, eval, &config.wolfe)?,
                    _ => unreachable!(),
                };
                let no_progress = out.alpha == 0.0 && point.grad.iter().any(|&g| g != 0.0);
                if no_progress {
                    if just_reset {
                        stalled = true;
                    } else {
                        match &mut engine {
                            Engine::Bfgs(s) => s.reset(),
                            Engine::Lbfgs(s) => s.reset(),
                            _ => unreachable!(),
                        }
                        just_reset = true;
                    }
                } else {
                    just_reset = false;
                }
                point = Point {
                    loss: out.loss,
                    grad: out.grad,
                    rj: None,
                };
            }
            Engine::Lm(state) => {
                let rj = point.rj.take().expect("LM carries a Jacobian");
                let out = state.step(&mut params, &rj, point.loss, |x| counted.loss(x))?;
                if out.accepted {
                    lm_accepted += 1;
                    let rj = counted
                        .residual_jacobian(&params)
                        .ok_or(OptimError::NotLeastSquares(algorithm))?;
                    point = lm_point(rj);
                } else {
                    stalled = state.lambda >= LM_STALL_LAMBDA;
                    point.rj = Some(rj);
                }
            }
        }

        records.push(RunRecord {
            epoch,
            loss: point.loss,
            elapsed_s: start.elapsed().as_secs_f64(),
            cumulative_evals: counted.evals(),
            phase: algorithm.tag().to_string(),
        });
        if point.loss < best_loss {
            best_loss = point.loss;
            best_params.copy_from_slice(&params);
            best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
        }

        if !point.loss.is_finite() {
            stop_reason = StopReason::NumericalFailure;
            break;
        }
        if norm_inf(&point.grad) <= stop.grad_tol {
            stop_reason = StopReason::GradTol;
            break;
        }
        if point.loss <= stop.loss_tol {
            stop_reason = StopReason::LossTol;
            break;
        }
        if stop.patience.is_some_and(|p| since_best >= p) {
            stop_reason = StopReason::Patience;
            break;
        }
        if stalled {
            stop_reason = StopReason::Stalled;
            break;
        }
    }
    if algorithm == Algorithm::Lm && lm_accepted == 0 && initial_loss > 0.0 && stop_reason != StopReason::GradTol {
        stop_reason = StopReason::NumericalFailure;
    }

    Ok(RunOutcome {
        algorithm,
        initial_loss,
        final_loss: point.loss,
        final_params: params,
        best_params,
        best_loss,
        best_epoch,
        records,
        stop_reason,
        total_evals: counted.evals(),
    })
}
