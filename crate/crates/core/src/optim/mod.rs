//! Optimizers: Adam, BFGS, L-BFGS and Levenberg-Marquardt, a strong-Wolfe
//! line search, and a run loop that drives any of them with stopping rules
//! and per-epoch records.

mod adam;
mod bfgs;
mod lbfgs;
mod line_search;
mod lm;
mod run;

use std::cell::Cell;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::DenseVector;
use crate::net::ResidualJacobian;

pub use adam::{AdamConfig, AdamState};
pub use bfgs::{BfgsState, QuasiNewtonStep};
pub use lbfgs::{lbfgs_direction, InitialScaling, LbfgsConfig, LbfgsState};
pub use line_search::{wolfe_line_search, LineSearchOutcome, WolfeParams};
pub use lm::{Damping, LmConfig, LmState, LmStepOutcome};
pub use run::{run_optimizer, OptimizerConfig, RunOutcome, RunRecord, StopCriteria, StopReason};

/// Curvature pairs with `sᵀy <= CURVATURE_EPS * |s| |y|` are not used.
pub const CURVATURE_EPS: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimError {
    #[error("search direction is not a descent direction (gᵀd = {0:e})")]
    NotDescent(f64),
    #[error("invalid stopping criteria: {0}")]
    InvalidStop(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("{0} requires a least-squares objective")]
    NotLeastSquares(Algorithm),
    #[error("objective evaluation failed: {0}")]
    Objective(String),
}

/// Which optimizer a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Adam,
    Bfgs,
    Lbfgs,
    Lm,
}

impl Algorithm {
    pub fn tag(self) -> &'static str {
        match self {
            Algorithm::Adam => "adam",
            Algorithm::Bfgs => "bfgs",
            Algorithm::Lbfgs => "lbfgs",
            Algorithm::Lm => "lm",
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "adam" => Ok(Algorithm::Adam),
            "bfgs" => Ok(Algorithm::Bfgs),
            "lbfgs" | "l-bfgs" => Ok(Algorithm::Lbfgs),
            "lm" | "levenberg-marquardt" => Ok(Algorithm::Lm),
            other => Err(format!("unknown optimizer {other:?}")),
        }
    }
}

/// A differentiable scalar objective over a flat parameter vector.
pub trait Objective {
    fn num_params(&self) -> usize;

    fn loss(&self, params: &[f64]) -> f64;

    fn loss_and_gradient(&self, params: &[f64]) -> (f64, DenseVector);

    /// Number of independent samples, when the loss is a mean over samples
    /// that can be subsampled.
    fn num_samples(&self) -> Option<usize> {
        None
    }

    /// Loss and gradient over a subset of samples.
    fn minibatch_loss_and_gradient(&self, _params: &[f64], _indices: &[usize]) -> Option<(f64, DenseVector)> {
        None
    }

    fn as_least_squares(&self) -> Option<&dyn LeastSquares> {
        None
    }
}

/// An objective of the form `loss = ‖r(θ)‖²`.
pub trait LeastSquares: Objective {
    /// Residuals scaled so that `loss(θ) == ‖r‖²`, with their Jacobian.
    fn residual_jacobian(&self, params: &[f64]) -> ResidualJacobian;
}

/// Wraps an objective and counts evaluations.
pub(crate) struct Counted<'a, O: ?Sized> {
    inner: &'a O,
    evals: Cell<usize>,
}

impl<'a, O: Objective + ?Sized> Counted<'a, O> {
    pub(crate) fn new(inner: &'a O) -> Self {
        Self {
            inner,
            evals: Cell::new(0),
        }
    }

    pub(crate) fn evals(&self) -> usize {
        self.evals.get()
    }

    fn bump(&self) {
        self.evals.set(self.evals.get() + 1);
    }

    pub(crate) fn loss(&self, p: &[f64]) -> f64 {
        self.bump();
        self.inner.loss(p)
    }

    pub(crate) fn loss_and_gradient(&self, p: &[f64]) -> (f64, DenseVector) {
        self.bump();
        self.inner.loss_and_gradient(p)
    }

    pub(crate) fn minibatch(&self, p: &[f64], idx: &[usize]) -> Option<(f64, DenseVector)> {
        self.bump();
        self.inner.minibatch_loss_and_gradient(p, idx)
    }

    pub(crate) fn residual_jacobian(&self, p: &[f64]) -> Option<ResidualJacobian> {
        let ls = self.inner.as_least_squares()?;
        self.bump();
        Some(ls.residual_jacobian(p))
    }
}

#[cfg(test)]
pub(crate) mod testing {
    //! Small objectives with closed-form answers.

    use super::*;
    use crate::linalg::{gramian, matvec, matvec_transposed, DenseMatrix};
    use crate::net::ResidualJacobian;
    use rand::Rng;
    use rand_chacha::ChaCha8Rng;

    /// `f(θ) = ½ θᵀAθ - bᵀθ`
    pub struct Quadratic {
        pub a: DenseMatrix,
        pub b: Vec<f64>,
    }

    impl Objective for Quadratic {
        fn num_params(&self) -> usize {
            self.b.len()
        }
        fn loss(&self, p: &[f64]) -> f64 {
            let ap = matvec(&self.a, p).unwrap();
            0.5 * crate::linalg::dot(p, &ap) - crate::linalg::dot(&self.b, p)
        }
        fn loss_and_gradient(&self, p: &[f64]) -> (f64, DenseVector) {
            let ap = matvec(&self.a, p).unwrap();
            let f = 0.5 * crate::linalg::dot(p, &ap) - crate::linalg::dot(&self.b, p);
            let g: Vec<f64> = ap.iter().zip(&self.b).map(|(x, y)| x - y).collect();
            (f, g.into())
        }
    }

    /// Random SPD quadratic with eigenvalues bounded below by 0.5.
    pub fn random_quadratic(rng: &mut ChaCha8Rng, n: usize) -> Quadratic {
        let m: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut a = gramian(&DenseMatrix::from_vec(n, n, m).unwrap());
        for i in 0..n {
            let v = a.get(i, i) + 0.5;
            a.set(i, i, v);
        }
        Quadratic {
            a,
            b: (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        }
    }

    /// `loss = ‖M θ - y‖²`, linear in the parameters.
    pub struct LinearLsq {
        pub m: DenseMatrix,
        pub y: Vec<f64>,
    }

    impl LinearLsq {
        pub fn optimum(&self) -> Vec<f64> {
            let g = gramian(&self.m);
            let rhs = matvec_transposed(&self.m, &self.y).unwrap();
            crate::linalg::spd_solve(&g, &rhs).unwrap().into_vec()
        }
    }

    impl Objective for LinearLsq {
        fn num_params(&self) -> usize {
            self.m.cols()
        }
        fn loss(&self, p: &[f64]) -> f64 {
            let r = matvec(&self.m, p).unwrap();
            r.iter().zip(&self.y).map(|(a, b)| (a - b) * (a - b)).sum()
        }
        fn loss_and_gradient(&self, p: &[f64]) -> (f64, DenseVector) {
            let rj = self.residual_jacobian(p);
            let mut g = matvec_transposed(&rj.jacobian, &rj.residuals).unwrap();
            g.iter_mut().for_each(|v| *v *= 2.0);
            (rj.residuals.iter().map(|r| r * r).sum(), g)
        }
        fn as_least_squares(&self) -> Option<&dyn LeastSquares> {
            Some(self)
        }
    }

    impl LeastSquares for LinearLsq {
        fn residual_jacobian(&self, p: &[f64]) -> ResidualJacobian {
            let r = matvec(&self.m, p).unwrap();
            let r: Vec<f64> = r.iter().zip(&self.y).map(|(a, b)| a - b).collect();
            ResidualJacobian {
                residuals: r.into(),
                jacobian: self.m.clone(),
            }
        }
    }
}
