use crate::linalg::{dot, matvec, norm2, DenseMatrix, DenseVector};

use super::line_search::{wolfe_line_search, WolfeParams};
use super::{OptimError, CURVATURE_EPS};

/// Dense inverse-Hessian approximation.
#[derive(Debug, Clone, PartialEq)]
pub struct BfgsState {
    pub h: DenseMatrix,
    pub updates: usize,
    pub skipped: usize,
}

/// Result of one line-searched quasi-Newton iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct QuasiNewtonStep {
    pub direction: DenseVector,
    pub alpha: f64,
    pub loss: f64,
    pub grad: DenseVector,
    pub evals: usize,
    pub line_search_converged: bool,
    /// Whether the curvature pair was accepted into the Hessian estimate.
    pub updated: bool,
}

impl QuasiNewtonStep {
    pub(crate) fn stationary(loss: f64, grad: &[f64]) -> Self {
        Self {
            direction: DenseVector::zeros(grad.len()),
            alpha: 0.0,
            loss,
            grad: grad.into(),
            evals: 0,
            line_search_converged: true,
            updated: false,
        }
    }
}

impl BfgsState {
    pub fn new(num_params: usize) -> Self {
        Self {
            h: DenseMatrix::identity(num_params),
            updates: 0,
            skipped: 0,
        }
    }

    pub fn reset(&mut self) {
        self.h = DenseMatrix::identity(self.h.rows());
    }

    /// `-H g`
    pub fn direction(&self, grad: &[f64]) -> DenseVector {
        let mut d = matvec(&self.h, grad).expect("state dimension");
        d.iter_mut().for_each(|v| *v = -*v);
        d
    }

    /// Inverse BFGS update with the pair `(s, y)`; skipped (returning false)
    /// unless `sᵀy > CURVATURE_EPS ‖s‖ ‖y‖`.
    pub fn update(&mut self, s: &[f64], y: &[f64]) -> bool {
        let sy = dot(s, y);
        if !(sy > CURVATURE_EPS * norm2(s) * norm2(y)) {
            self.skipped += 1;
            return false;
        }
        let rho = 1.0 / sy;
        let hy = matvec(&self.h, y).expect("state dimension");
        let yhy = dot(y, &hy);
        let c = rho * rho * yhy + rho;
        let n = s.len();
        // H - ρ(Hy sᵀ + s (Hy)ᵀ) + (ρ² yᵀHy + ρ) s sᵀ, upper triangle then mirror.
        for i in 0..n {
            let row = self.h.row_mut(i);
            for j in i..n {
                row[j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + c * s[i] * s[j];
            }
        }
        self.h.mirror_upper();
        self.updates += 1;
        true
    }

    /// One iteration from `params` (with loss `loss` and gradient `grad`).
    /// `eval` returns the loss and gradient at a trial point.
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
        check_dims(params, grad, self.h.rows())?;
        if grad.iter().all(|&g| g == 0.0) {
            return Ok(QuasiNewtonStep::stationary(loss, grad));
        }
        let mut d = self.direction(grad);
        if !(dot(grad, &d) < 0.0) {
            // Lost positive definiteness numerically.
            self.reset();
            d = self.direction(grad);
        }
        let ls = wolfe_line_search(eval, params, &d, loss, grad, wolfe)?;
        let mut updated = false;
        if ls.alpha > 0.0 {
            let s: Vec<f64> = d.iter().map(|v| ls.alpha * v).collect();
            let y: Vec<f64> = ls.grad.iter().zip(grad).map(|(a, b)| a - b).collect();
            for (p, si) in params.iter_mut().zip(&s) {
                *p += si;
            }
            updated = self.update(&s, &y);
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

pub(crate) fn check_dims(params: &[f64], grad: &[f64], n: usize) -> Result<(), OptimError> {
    for got in [params.len(), grad.len()] {
        if got != n {
            return Err(OptimError::Dimension { expected: n, got });
        }
    }
    Ok(())
}
