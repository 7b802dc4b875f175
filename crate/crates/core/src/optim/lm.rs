//! Levenberg-Marquardt with Marquardt's diagonal scaling.
//!
//! Each step solves `(JᵀJ + λ D) δ = -Jᵀr` and accepts `θ + δ` only if the
//! loss strictly decreases. Rejections grow `λ`, acceptances shrink it. `D`
//! is `diag(JᵀJ)` by default, or the identity.

use serde::{Deserialize, Serialize};

use crate::linalg::{gramian, matvec_transposed, spd_solve, LinalgError};
use crate::net::ResidualJacobian;

use super::OptimError;

/// Floor applied to `diag(JᵀJ)` before scaling, so parameters with no
/// influence on the residuals still get damped.
pub const DIAG_FLOOR: f64 = 1e-12;
const LAMBDA_MIN: f64 = 1e-300;
const LAMBDA_MAX: f64 = 1e300;

/// Damping matrix `D`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Damping {
    /// `diag(JᵀJ)`, floored at [`DIAG_FLOOR`].
    #[default]
    Marquardt,
    /// `I` (Levenberg).
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LmConfig {
    pub lambda0: f64,
    pub lambda_up: f64,
    pub lambda_down: f64,
    pub max_attempts: usize,
    pub damping: Damping,
}

impl Default for LmConfig {
    fn default() -> Self {
        Self {
            lambda0: 1e-3,
            lambda_up: 10.0,
            lambda_down: 0.1,
            max_attempts: 10,
            damping: Damping::Marquardt,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmState {
    pub lambda: f64,
    pub lambda_up: f64,
    pub lambda_down: f64,
    pub max_attempts: usize,
    pub damping: Damping,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmStepOutcome {
    pub accepted: bool,
    /// Loss at the parameters after the step (unchanged if rejected).
    pub loss: f64,
    pub attempts: usize,
    pub evals: usize,
}

impl LmState {
    pub fn new(config: LmConfig) -> Result<Self, OptimError> {
        let ok = config.lambda0 > 0.0
            && config.lambda_up > 1.0
            && config.lambda_down > 0.0
            && config.lambda_down < 1.0
            && config.max_attempts >= 1;
        if !ok {
            return Err(OptimError::Objective(format!("invalid LM configuration {config:?}")));
        }
        Ok(Self {
            lambda: config.lambda0,
            lambda_up: config.lambda_up,
            lambda_down: config.lambda_down,
            max_attempts: config.max_attempts,
            damping: config.damping,
        })
    }

    /// One damped Gauss-Newton step from `params`, whose current residuals
    /// and Jacobian are `rj` and whose loss is `loss`. `eval_loss` evaluates
    /// the loss at a trial point. `params` is only written on acceptance.
    pub fn step<F>(
        &mut self,
        params: &mut [f64],
        rj: &ResidualJacobian,
        loss: f64,
        mut eval_loss: F,
    ) -> Result<LmStepOutcome, OptimError>
    where
        F: FnMut(&[f64]) -> f64,
    {
        let p = params.len();
        if rj.jacobian.cols() != p || rj.jacobian.rows() != rj.residuals.len() {
            return Err(OptimError::Dimension {
                expected: p,
                got: rj.jacobian.cols(),
            });
        }
        let mut b = matvec_transposed(&rj.jacobian, &rj.residuals).expect("checked shape");
        b.iter_mut().for_each(|v| *v = -*v);
        if b.iter().all(|&v| v == 0.0) {
            return Ok(LmStepOutcome {
                accepted: true,
                loss,
                attempts: 0,
                evals: 0,
            });
        }
        let jtj = gramian(&rj.jacobian);
        let diag: Vec<f64> = match self.damping {
            Damping::Marquardt => jtj.diagonal().into_iter().map(|d| d.max(DIAG_FLOOR)).collect(),
            Damping::Identity => vec![1.0; p],
        };
        let mut trial = vec![0.0; p];
        let mut evals = 0;
        for attempt in 1..=self.max_attempts {
            let mut a = jtj.clone();
            for (j, d) in diag.iter().enumerate() {
                let v = a.get(j, j) + self.lambda * d;
                a.set(j, j, v);
            }
            match spd_solve(&a, &b) {
                Ok(delta) => {
                    for ((t, x), d) in trial.iter_mut().zip(params.iter()).zip(delta.iter()) {
                        *t = x + d;
                    }
                    let new_loss = eval_loss(&trial);
                    evals += 1;
                    if new_loss.is_finite() && new_loss < loss {
                        params.copy_from_slice(&trial);
                        self.lambda = (self.lambda * self.lambda_down).max(LAMBDA_MIN);
                        return Ok(LmStepOutcome {
                            accepted: true,
                            loss: new_loss,
                            attempts: attempt,
                            evals,
                        });
                    }
                }
                Err(LinalgError::NotPositiveDefinite { .. }) => {}
                Err(e) => return Err(OptimError::Objective(e.to_string())),
            }
            self.lambda = (self.lambda * self.lambda_up).min(LAMBDA_MAX);
        }
        Ok(LmStepOutcome {
            accepted: false,
            loss,
            attempts: self.max_attempts,
            evals,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{dot, norm2, DenseMatrix};
    use crate::optim::testing::LinearLsq;
    use crate::optim::{LeastSquares, Objective};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn state(lambda0: f64) -> LmState {
        LmState::new(LmConfig {
            lambda0,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn linear_model_one_step() {
        // y = w x, data (1, 2), w = 0.
        let prob = LinearLsq {
            m: DenseMatrix::from_rows(&[&[1.0]]),
            y: vec![2.0],
        };
        let mut st = state(1e-10);
        let mut w = vec![0.0];
        let rj = prob.residual_jacobian(&w);
        let f0 = prob.loss(&w);
        let out = st.step(&mut w, &rj, f0, |p| prob.loss(p)).unwrap();
        assert!(out.accepted);
        assert!((w[0] - 2.0).abs() < 1e-9);
        assert!(out.loss < 1e-18);
        assert!((st.lambda - 1e-11).abs() < 1e-25);
    }

    #[test]
    fn zero_residual_is_a_fixed_point() {
        let prob = LinearLsq {
            m: DenseMatrix::from_rows(&[&[1.0, 0.5], &[2.0, -1.0]]),
            y: vec![1.5, 1.0],
        };
        let mut st = state(1e-3);
        let mut p = vec![1.0, 1.0];
        let rj = prob.residual_jacobian(&p);
        assert!(rj.residuals.iter().all(|&r| r == 0.0));
        let out = st.step(&mut p, &rj, 0.0, |_| unreachable!()).unwrap();
        assert!(out.accepted);
        assert_eq!(p, vec![1.0, 1.0]);
        assert_eq!(out.evals, 0);
    }

    #[test]
    fn heavy_damping_gives_scaled_gradient_descent() {
        let prob = LinearLsq {
            m: DenseMatrix::from_rows(&[&[1.0, 2.0], &[0.5, -1.0], &[3.0, 0.2]]),
            y: vec![1.0, -2.0, 0.5],
        };
        let lambda = 1e12;
        let mut st = state(lambda);
        st.max_attempts = 1;
        let p0 = vec![0.0, 0.0];
        let mut p = p0.clone();
        let rj = prob.residual_jacobian(&p);
        let jtr = matvec_transposed(&rj.jacobian, &rj.residuals).unwrap();
        let jtj = gramian(&rj.jacobian);
        let f0 = prob.loss(&p);
        let out = st.step(&mut p, &rj, f0, |x| prob.loss(x)).unwrap();
        assert!(out.accepted);
        let delta: Vec<f64> = p.iter().zip(&p0).map(|(a, b)| a - b).collect();
        assert!(norm2(&delta) < 1e-10);
        for j in 0..2 {
            let approx = -jtr[j] / (lambda * jtj.get(j, j));
            assert!((delta[j] - approx).abs() <= 1e-6 * approx.abs(), "{} vs {}", delta[j], approx);
        }
        let (_, g) = prob.loss_and_gradient(&p0);
        assert!(dot(&delta, &g) < 0.0);
    }

    #[test]
    fn identity_damping_solves_the_levenberg_system() {
        let prob = LinearLsq {
            m: DenseMatrix::from_rows(&[&[1.0, 2.0], &[0.5, -1.0], &[3.0, 0.2]]),
            y: vec![1.0, -2.0, 0.5],
        };
        let mut st = LmState::new(LmConfig {
            lambda0: 0.5,
            damping: Damping::Identity,
            ..Default::default()
        })
        .unwrap();
        let mut p = vec![0.0, 0.0];
        let rj = prob.residual_jacobian(&p);
        let mut a = gramian(&rj.jacobian);
        for j in 0..2 {
            let v = a.get(j, j) + 0.5;
            a.set(j, j, v);
        }
        let mut b = matvec_transposed(&rj.jacobian, &rj.residuals).unwrap();
        b.iter_mut().for_each(|v| *v = -*v);
        let expected = spd_solve(&a, &b).unwrap();
        let f0 = prob.loss(&p);
        assert!(st.step(&mut p, &rj, f0, |x| prob.loss(x)).unwrap().accepted);
        for j in 0..2 {
            assert!((p[j] - expected[j]).abs() <= 1e-14 * expected[j].abs().max(1.0));
        }
    }

    #[test]
    fn rejection_restores_params_and_grows_lambda() {
        // A loss that never decreases forces every attempt to be rejected.
        let prob = LinearLsq {
            m: DenseMatrix::from_rows(&[&[1.0]]),
            y: vec![2.0],
        };
        let mut st = state(1e-3);
        let mut w = vec![0.0];
        let rj = prob.residual_jacobian(&w);
        let out = st.step(&mut w, &rj, 4.0, |_| 5.0).unwrap();
        assert!(!out.accepted);
        assert_eq!(w, vec![0.0]);
        assert_eq!(out.attempts, 10);
        assert!((st.lambda - 1e7).abs() < 1e-3);
    }

    #[test]
    fn invalid_config_is_rejected() {
        assert!(LmState::new(LmConfig {
            lambda_up: 1.0,
            ..Default::default()
        })
        .is_err());
        assert!(LmState::new(LmConfig {
            lambda0: 0.0,
            ..Default::default()
        })
        .is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn one_step_exact_for_linear_models(seed in any::<u64>(), rows in 3usize..20, cols in 1usize..6) {
            prop_assume!(rows >= cols);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = DenseMatrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
            let prob = LinearLsq { m, y: (0..rows).map(|_| rng.gen_range(-2.0..2.0)).collect() };
            let mut st = state(1e-10);
            let mut p: Vec<f64> = (0..cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let p0 = p.clone();
            let rj = prob.residual_jacobian(&p);
            let f0 = prob.loss(&p);
            let out = st.step(&mut p, &rj, f0, |x| prob.loss(x)).unwrap();
            let (_, g) = prob.loss_and_gradient(&p);
            let opt = prob.optimum();
            // Starting at the optimum already, nothing can decrease.
            prop_assume!(f0 - prob.loss(&opt) > 1e-12 * (1.0 + f0));
            // The residual gradient is 2λ|Dδ|; keep that within the bound.
            let dmax = crate::linalg::gramian(&prob.m).diagonal().into_iter().fold(0.0, f64::max);
            let dist: f64 = opt.iter().zip(&p0).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            prop_assume!(2.0 * 1e-10 * dmax * dist <= 5e-9);
            prop_assert!(out.accepted);
            prop_assert!(norm2(&g) <= 1e-8, "|g| = {:e}", norm2(&g));
        }
    }
}
