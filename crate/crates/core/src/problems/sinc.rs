use serde::{Deserialize, Serialize};

use crate::linalg::{DenseMatrix, DenseVector};
use crate::net::{loss_gradient, loss_mse, residual_jacobian, MlpSpec, ResidualJacobian};
use crate::optim::{LeastSquares, Objective};

use super::ProblemError;

pub const SINC_DOMAIN: (f64, f64) = (-1.5, 1.5);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SincConvention {
    /// `sin(z) / z`
    #[default]
    Unnormalized,
    /// `sin(πz) / (πz)`
    Normalized,
}

/// `sinc(10x)`, unnormalized.
pub fn sinc_target(x: f64) -> f64 {
    sinc_target_with(x, SincConvention::Unnormalized)
}

pub fn sinc_target_with(x: f64, convention: SincConvention) -> f64 {
    let z = match convention {
        SincConvention::Unnormalized => 10.0 * x,
        SincConvention::Normalized => 10.0 * std::f64::consts::PI * x,
    };
    if (10.0 * x).abs() < 1e-12 {
        1.0
    } else {
        z.sin() / z
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SincDataset {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
}

impl SincDataset {
    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }
}

/// `n` evenly spaced points over [`SINC_DOMAIN`], endpoints included.
pub fn make_sinc_dataset(n: usize) -> Result<SincDataset, ProblemError> {
    make_sinc_dataset_with(n, SincConvention::Unnormalized)
}

pub fn make_sinc_dataset_with(n: usize, convention: SincConvention) -> Result<SincDataset, ProblemError> {
    if n < 2 {
        return Err(ProblemError::Size(format!("sinc dataset needs at least 2 points, got {n}")));
    }
    let (lo, hi) = SINC_DOMAIN;
    let xs: Vec<f64> = (0..n)
        .map(|i| if i == n - 1 { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
        .collect();
    let ys = xs.iter().map(|&x| sinc_target_with(x, convention)).collect();
    Ok(SincDataset { xs, ys })
}

/// Full-batch MSE regression of a `1 -> 1` network onto a [`SincDataset`].
#[derive(Debug, Clone)]
pub struct SincProblem {
    pub spec: MlpSpec,
    inputs: DenseMatrix,
    targets: DenseMatrix,
}

impl SincProblem {
    pub fn new(spec: MlpSpec, data: &SincDataset) -> Result<Self, ProblemError> {
        if spec.input_dim != 1 || spec.output_dim != 1 {
            return Err(ProblemError::Spec(format!(
                "sinc regression needs a 1 -> 1 network, got {} -> {}",
                spec.input_dim, spec.output_dim
            )));
        }
        spec.validate()?;
        if data.is_empty() {
            return Err(ProblemError::Size("empty dataset".into()));
        }
        Ok(Self {
            spec,
            inputs: DenseMatrix::column(&data.xs),
            targets: DenseMatrix::column(&data.ys),
        })
    }

    pub fn inputs(&self) -> &DenseMatrix {
        &self.inputs
    }

    pub fn targets(&self) -> &DenseMatrix {
        &self.targets
    }
}

impl Objective for SincProblem {
    fn num_params(&self) -> usize {
        self.spec.param_count()
    }

    fn loss(&self, params: &[f64]) -> f64 {
        loss_mse(&self.spec, params, &self.inputs, &self.targets).expect("parameter length checked by caller")
    }

    fn loss_and_gradient(&self, params: &[f64]) -> (f64, DenseVector) {
        loss_gradient(&self.spec, params, &self.inputs, &self.targets).expect("parameter length checked by caller")
    }

    fn num_samples(&self) -> Option<usize> {
        Some(self.inputs.rows())
    }

    fn minibatch_loss_and_gradient(&self, params: &[f64], indices: &[usize]) -> Option<(f64, DenseVector)> {
        let xs: Vec<f64> = indices.iter().map(|&i| self.inputs.get(i, 0)).collect();
        let ys: Vec<f64> = indices.iter().map(|&i| self.targets.get(i, 0)).collect();
        loss_gradient(&self.spec, params, &DenseMatrix::column(&xs), &DenseMatrix::column(&ys)).ok()
    }

    fn as_least_squares(&self) -> Option<&dyn LeastSquares> {
        Some(self)
    }
}

impl LeastSquares for SincProblem {
    /// Rows scaled by `1/√N` so that `‖r‖²` is the MSE.
    fn residual_jacobian(&self, params: &[f64]) -> ResidualJacobian {
        let mut rj =
            residual_jacobian(&self.spec, params, &self.inputs, &self.targets).expect("parameter length checked by caller");
        let n = rj.len();
        rj.scale_rows(0..n, (1.0 / n as f64).sqrt());
        rj
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::matvec_transposed;
    use crate::net::init_params;
    use proptest::prelude::*;

    #[test]
    fn target_examples() {
        assert_eq!(sinc_target(0.0), 1.0);
        assert!(sinc_target(std::f64::consts::PI / 10.0).abs() < 1e-15);
        assert!((sinc_target(1.5) - 0.043_352_522_677_141_74).abs() < 1e-15);
        assert!((sinc_target(1.5) - 15f64.sin() / 15.0).abs() < 1e-17);
        assert_eq!(sinc_target(1e-14), 1.0);
    }

    #[test]
    fn normalized_convention() {
        assert_eq!(sinc_target_with(0.0, SincConvention::Normalized), 1.0);
        assert!(sinc_target_with(0.1, SincConvention::Normalized).abs() < 1e-15);
        let z = 5.0 * std::f64::consts::PI;
        assert_eq!(sinc_target_with(0.5, SincConvention::Normalized), z.sin() / z);
    }

    #[test]
    fn dataset_examples() {
        let d = make_sinc_dataset(2).unwrap();
        assert_eq!(d.xs, vec![-1.5, 1.5]);

        let d = make_sinc_dataset(3).unwrap();
        assert_eq!(d.xs, vec![-1.5, 0.0, 1.5]);
        assert_eq!(d.ys, vec![(-15f64).sin() / -15.0, 1.0, 15f64.sin() / 15.0]);

        let d = make_sinc_dataset(20_000).unwrap();
        assert_eq!(d.xs[0], -1.5);
        assert_eq!(d.xs[19_999], 1.5);
        let h = 3.0 / 19_999.0;
        for w in d.xs.windows(2) {
            assert!(w[1] > w[0]);
            assert!((w[1] - w[0] - h).abs() < 1e-12);
        }
        for (x, y) in d.xs.iter().zip(&d.ys) {
            assert_eq!(y.to_bits(), sinc_target(*x).to_bits());
        }

        assert!(matches!(make_sinc_dataset(1), Err(ProblemError::Size(_))));
    }

    #[test]
    fn rejects_wrong_shape() {
        let d = make_sinc_dataset(5).unwrap();
        assert!(SincProblem::new(MlpSpec::new(2, &[4], 1), &d).is_err());
    }

    #[test]
    fn least_squares_view_is_consistent() {
        let spec = MlpSpec::new(1, &[6, 5], 1);
        let d = make_sinc_dataset(37).unwrap();
        let prob = SincProblem::new(spec.clone(), &d).unwrap();
        let p = init_params(&spec, 3);
        let (loss, grad) = prob.loss_and_gradient(&p);
        assert_eq!(loss, prob.loss(&p));
        let rj = prob.residual_jacobian(&p);
        let rr: f64 = rj.residuals.iter().map(|r| r * r).sum();
        assert!((rr - loss).abs() <= 1e-14 * loss);
        let jtr = matvec_transposed(&rj.jacobian, &rj.residuals).unwrap();
        for (g, v) in grad.iter().zip(jtr.iter()) {
            assert!((g - 2.0 * v).abs() <= 1e-12 * crate::linalg::norm_inf(&grad));
        }
    }

    #[test]
    fn full_minibatch_matches_full_batch() {
        let spec = MlpSpec::new(1, &[4], 1);
        let d = make_sinc_dataset(11).unwrap();
        let prob = SincProblem::new(spec.clone(), &d).unwrap();
        let p = init_params(&spec, 1);
        let all: Vec<usize> = (0..11).collect();
        let (l, g) = prob.minibatch_loss_and_gradient(&p, &all).unwrap();
        let (lf, gf) = prob.loss_and_gradient(&p);
        assert_eq!(l, lf);
        assert_eq!(&*g, &*gf);
    }

    proptest! {
        #[test]
        fn target_is_even(x in -100.0f64..100.0) {
            prop_assert_eq!(sinc_target(x).to_bits(), sinc_target(-x).to_bits());
        }

        #[test]
        fn target_envelope(x in 0.1f64..50.0, neg in any::<bool>()) {
            let x = if neg { -x } else { x };
            prop_assert!(sinc_target(x).abs() <= 1.0 / (10.0 * x.abs()));
        }
    }
}
