//! Dense tanh networks over a flat parameter vector.
//!
//! Parameters are laid out layer by layer in forward order; each layer
//! stores its weights row-major as `[out x in]` followed by its `out`
//! biases. Gradients, Jacobian columns and optimizer state all share this
//! layout.

mod backprop;
mod io;
mod pinn;

use std::ops::{Deref, DerefMut};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{DenseMatrix, DenseVector};

pub use backprop::{forward, loss_gradient, loss_mse, residual_jacobian, residuals};
pub use io::{read_params, write_params, ParamsHeader, PARAMS_FORMAT};
pub use pinn::{
    input_derivatives, input_derivatives_batch, physics_residuals, pinn_gradient_parts,
    pinn_residual_jacobian, PinnLossParts, PinnPoints,
};

#[derive(Debug, Error)]
pub enum NetError {
    #[error("invalid network spec: {0}")]
    InvalidSpec(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error("parameter file: {0}")]
    Io(#[from] std::io::Error),
    #[error("parameter file header: {0}")]
    Header(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum HiddenActivation {
    #[default]
    Tanh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OutputActivation {
    #[default]
    Linear,
}

/// Architecture of a fully connected network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden_widths: Vec<usize>,
    #[serde(default)]
    pub hidden_activation: HiddenActivation,
    pub output_dim: usize,
    #[serde(default)]
    pub output_activation: OutputActivation,
}

impl MlpSpec {
    pub fn new(input_dim: usize, hidden_widths: &[usize], output_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_widths: hidden_widths.to_vec(),
            hidden_activation: HiddenActivation::Tanh,
            output_dim,
            output_activation: OutputActivation::Linear,
        }
    }

    /// `layers` hidden layers of `width` units each.
    pub fn uniform(input_dim: usize, layers: usize, width: usize, output_dim: usize) -> Self {
        Self::new(input_dim, &vec![width; layers], output_dim)
    }

    pub fn validate(&self) -> Result<(), NetError> {
        if self.input_dim == 0 || self.output_dim == 0 {
            return Err(NetError::InvalidSpec(
                "input and output dimensions must be at least 1".into(),
            ));
        }
        if let Some(i) = self.hidden_widths.iter().position(|&w| w == 0) {
            return Err(NetError::InvalidSpec(format!("hidden layer {i} has width 0")));
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.layers().map(|l| l.fan_in * l.fan_out + l.fan_out).sum()
    }

    /// Affine layers in forward order with their offsets into the flat vector.
    pub fn layers(&self) -> impl Iterator<Item = Layer> + '_ {
        let widths = std::iter::once(self.input_dim)
            .chain(self.hidden_widths.iter().copied())
            .chain(std::iter::once(self.output_dim));
        let pairs: Vec<(usize, usize)> = widths.clone().zip(widths.skip(1)).collect();
        let last = pairs.len() - 1;
        let mut offset = 0;
        pairs.into_iter().enumerate().map(move |(idx, (fan_in, fan_out))| {
            let layer = Layer {
                fan_in,
                fan_out,
                weights: offset,
                biases: offset + fan_in * fan_out,
                hidden: idx != last,
            };
            offset += fan_in * fan_out + fan_out;
            layer
        })
    }

    pub(crate) fn layer_vec(&self) -> Vec<Layer> {
        self.layers().collect()
    }
}

pub fn param_count(spec: &MlpSpec) -> usize {
    spec.param_count()
}

/// One affine map `z = W a + b` and where it lives in the parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layer {
    pub fan_in: usize,
    pub fan_out: usize,
    /// Offset of the row-major `[fan_out x fan_in]` weight block.
    pub weights: usize,
    /// Offset of the `fan_out` biases.
    pub biases: usize,
    /// Whether tanh follows this layer (false only for the output layer).
    pub hidden: bool,
}

impl Layer {
    pub fn weight_range(&self) -> std::ops::Range<usize> {
        self.weights..self.biases
    }

    pub fn bias_range(&self) -> std::ops::Range<usize> {
        self.biases..self.biases + self.fan_out
    }
}

/// Flat trainable parameters.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn zeros(spec: &MlpSpec) -> Self {
        Self(vec![0.0; spec.param_count()])
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn check_len(&self, spec: &MlpSpec) -> Result<(), NetError> {
        let expected = spec.param_count();
        if self.0.len() != expected {
            return Err(NetError::Shape(format!(
                "parameter vector has {} entries, spec needs {expected}",
                self.0.len()
            )));
        }
        Ok(())
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl From<DenseVector> for ParamVector {
    fn from(v: DenseVector) -> Self {
        Self(v.into_vec())
    }
}

impl Deref for ParamVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for ParamVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

/// Glorot-uniform weights, zero biases.
pub fn init_params(spec: &MlpSpec, seed: u64) -> ParamVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = vec![0.0; spec.param_count()];
    for layer in spec.layers() {
        let limit = (6.0 / (layer.fan_in + layer.fan_out) as f64).sqrt();
        for w in &mut p[layer.weight_range()] {
            *w = rng.gen_range(-limit..limit);
        }
    }
    ParamVector(p)
}

/// Residual vector `r = prediction - target` and its Jacobian `∂r/∂θ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualJacobian {
    pub residuals: DenseVector,
    pub jacobian: DenseMatrix,
}

impl ResidualJacobian {
    pub fn len(&self) -> usize {
        self.residuals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.residuals.is_empty()
    }

    /// Multiplies the rows `range` (residuals and Jacobian) by `factor`.
    pub fn scale_rows(&mut self, range: std::ops::Range<usize>, factor: f64) {
        for i in range {
            self.residuals[i] *= factor;
            for v in self.jacobian.row_mut(i) {
                *v *= factor;
            }
        }
    }
}

/// Value and input derivatives of a scalar field `u(x, t)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct InputDerivatives {
    pub u: f64,
    pub du_dx: f64,
    pub du_dt: f64,
    pub d2u_dx2: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn param_counts() {
        assert_eq!(param_count(&MlpSpec::new(1, &[20, 20], 1)), 481);
        assert_eq!(param_count(&MlpSpec::new(1, &[80], 1)), 241);
        assert_eq!(param_count(&MlpSpec::new(1, &[64, 64, 64], 1)), 8513);
        assert_eq!(param_count(&MlpSpec::uniform(1, 2, 80, 1)), 6721);
        assert_eq!(param_count(&MlpSpec::uniform(1, 3, 80, 1)), 13201);
        assert_eq!(param_count(&MlpSpec::uniform(1, 4, 48, 1)), 7201);
        assert_eq!(param_count(&MlpSpec::uniform(1, 4, 64, 1)), 12673);
        assert_eq!(param_count(&MlpSpec::new(3, &[], 2)), 8);
    }

    #[test]
    fn layout_is_contiguous() {
        let spec = MlpSpec::new(2, &[3, 4], 1);
        let layers = spec.layer_vec();
        assert_eq!(layers.len(), 3);
        assert_eq!(layers[0].weights, 0);
        assert_eq!(layers[0].biases, 6);
        assert_eq!(layers[1].weights, 9);
        assert_eq!(layers[2].weights, 9 + 12 + 4);
        assert!(layers[1].hidden && !layers[2].hidden);
        let end = layers[2].biases + layers[2].fan_out;
        assert_eq!(end, spec.param_count());
    }

    #[test]
    fn validate_rejects_zero_widths() {
        assert!(MlpSpec::new(1, &[4, 0], 1).validate().is_err());
        assert!(MlpSpec::new(0, &[4], 1).validate().is_err());
        assert!(MlpSpec::new(1, &[], 1).validate().is_ok());
    }

    #[test]
    fn init_is_deterministic_with_zero_biases() {
        let spec = MlpSpec::new(1, &[20, 20], 1);
        let a = init_params(&spec, 42);
        assert_eq!(a, init_params(&spec, 42));
        assert_ne!(a, init_params(&spec, 43));
        for layer in spec.layers() {
            assert!(a[layer.bias_range()].iter().all(|&b| b == 0.0));
        }
        // First layer: fan_in 1, fan_out 20.
        let limit = (6.0f64 / 21.0).sqrt();
        assert!((limit - 0.5345).abs() < 1e-4);
        let first = spec.layers().next().unwrap();
        assert!(a[first.weight_range()].iter().all(|w| w.abs() <= limit));
    }
}
