use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::linalg::{axpy, dot, norm2, DenseVector};

use super::bfgs::{check_dims, QuasiNewtonStep};
use super::line_search::{wolfe_line_search, WolfeParams};
use super::{OptimError, CURVATURE_EPS};

/// Initial inverse-Hessian guess used inside the two-loop recursion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitialScaling {
    /// `H0 = I`.
    Identity,
    /// `H0 = (sᵀy / yᵀy) I` from the newest pair.
    #[default]
    SecantRatio,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LbfgsConfig {
    pub memory: usize,
    pub scaling: InitialScaling,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        Self {
            memory: 10,
            scaling: InitialScaling::SecantRatio,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct CurvaturePair {
    s: DenseVector,
    y: DenseVector,
    rho: f64,
}

/// Ring of the most recent curvature pairs, newest last.
#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsState {
    pub config: LbfgsConfig,
    num_params: usize,
    pairs: VecDeque<CurvaturePair>,
}

impl LbfgsState {
    pub fn new(num_params: usize, config: LbfgsConfig) -> Self {
        Self {
            config,
            num_params,
            pairs: VecDeque::with_capacity(config.memory),
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn reset(&mut self) {
        self.pairs.clear();
    }

    /// Stores `(s, y)` if `sᵀy > CURVATURE_EPS ‖s‖ ‖y‖`, evicting the oldest
    /// pair beyond the memory limit.
    pub fn push(&mut self, s: &[f64], y: &[f64]) -> bool {
        let sy = dot(s, y);
        if self.config.memory == 0 || !(sy > CURVATURE_EPS * norm2(s) * norm2(y)) {
            return false;
        }
        if self.pairs.len() == self.config.memory {
            self.pairs.pop_front();
        }
        self.pairs.push_back(CurvaturePair {
            s: s.into(),
            y: y.into(),
            rho: 1.0 / sy,
        });
        true
    }

    pub fn step<F>(
        &mut self,
        params: &mut [f64],
        loss: f64,
        grad: &[f64],
        eval: F,
        wolfe: &WolfeParams,
    ) -> Result<QuasiNewtonStep, OptimError>
    where
        F: FnMut(&[f64]) -> (f64, DenseVector),
    {
        check_dims(params, grad, self.num_params)?;
        if grad.iter().all(|&g| g == 0.0) {
            return Ok(QuasiNewtonStep::stationary(loss, grad));
        }
        let mut d = lbfgs_direction(self, grad);
        if !(dot(grad, &d) < 0.0) {
            self.reset();
            d = lbfgs_direction(self, grad);
        }
        let ls = wolfe_line_search(eval, params, &d, loss, grad, wolfe)?;
        let mut updated = false;
        if ls.alpha > 0.0 {
            let s: Vec<f64> = d.iter().map(|v| ls.alpha * v).collect();
            let y: Vec<f64> = ls.grad.iter().zip(grad).map(|(a, b)| a - b).collect();
            for (p, si) in params.iter_mut().zip(&s) {
                *p += si;
            }
            updated = self.push(&s, &y);
        }
        Ok(QuasiNewtonStep {
            direction: d,
            alpha: ls.alpha,
            loss: ls.loss,
            grad: ls.grad,
            evals: ls.evals,
            line_search_converged: ls.converged,
            updated,
        })
    }
}

/// Two-loop recursion: returns `-H g` for the implicit inverse Hessian.
pub fn lbfgs_direction(state: &LbfgsState, grad: &[f64]) -> DenseVector {
    let mut q = grad.to_vec();
    let mut alphas = Vec::with_capacity(state.pairs.len());
    for pair in state.pairs.iter().rev() {
        let a = pair.rho * dot(&pair.s, &q);
        axpy(-a, &pair.y, &mut q);
        alphas.push(a);
    }
    let gamma = match (state.config.scaling, state.pairs.back()) {
        (InitialScaling::SecantRatio, Some(last)) => 1.0 / (last.rho * dot(&last.y, &last.y)),
        _ => 1.0,
    };
    q.iter_mut().for_each(|v| *v *= gamma);
    for (pair, a) in state.pairs.iter().zip(alphas.into_iter().rev()) {
        let b = pair.rho * dot(&pair.y, &q);
        axpy(a - b, &pair.s, &mut q);
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q.into()
}
