use serde::{Deserialize, Serialize};

use crate::linalg::DenseVector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
        }
    }
}

/// Bias-corrected first and second moment estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: DenseVector,
    pub v: DenseVector,
    pub t: u64,
    pub config: AdamConfig,
}

impl AdamState {
    pub fn new(num_params: usize, config: AdamConfig) -> Self {
        Self {
            m: DenseVector::zeros(num_params),
            v: DenseVector::zeros(num_params),
            t: 0,
            config,
        }
    }

    /// One Adam update of `params` in place.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        assert_eq!(params.len(), grad.len(), "gradient length");
        assert_eq!(params.len(), self.m.len(), "state length");
        let AdamConfig {
            lr,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        self.t += 1;
        let c1 = 1.0 - beta1.powf(self.t as f64);
        let c2 = 1.0 - beta2.powf(self.t as f64);
        for (((p, &g), m), v) in params
            .iter_mut()
            .zip(grad)
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + epsilon);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut s = AdamState::new(3, AdamConfig::default());
        let mut p = vec![0.5, -1.0, 2.0];
        s.step(&mut p, &[0.0; 3]);
        assert_eq!(p, vec![0.5, -1.0, 2.0]);
        assert_eq!(s.t, 1);
    }

    #[test]
    fn first_step_is_lr_times_sign() {
        let cfg = AdamConfig::default();
        let mut s = AdamState::new(1, cfg);
        let mut p = vec![0.0];
        s.step(&mut p, &[3.0]);
        // m_hat = 3, v_hat = 9
        let expected = -0.001 * 3.0 / (3.0 + cfg.epsilon);
        assert!((p[0] - expected).abs() < 1e-18);
        assert!((p[0] + 0.000999).abs() < 1e-6);
    }

    #[test]
    fn repeated_gradient_does_not_grow_step() {
        let mut s = AdamState::new(1, AdamConfig::default());
        let mut p = vec![0.0];
        s.step(&mut p, &[0.7]);
        let first = p[0];
        s.step(&mut p, &[0.7]);
        let second = p[0] - first;
        assert!(second.abs() <= first.abs() * (1.0 + 1e-9));
    }

    proptest! {
        #[test]
        fn first_step_is_bounded(g in proptest::collection::vec(-1e3f64..1e3, 1..20)) {
            let cfg = AdamConfig::default();
            let mut s = AdamState::new(g.len(), cfg);
            let mut p = vec![0.0; g.len()];
            s.step(&mut p, &g);
            for d in &p {
                prop_assert!(d.abs() <= cfg.lr * (1.0 + 10.0 * cfg.epsilon));
            }
            prop_assert!(s.v.iter().all(|&v| v >= 0.0));
        }
    }
}
