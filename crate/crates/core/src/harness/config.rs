use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::net::MlpSpec;
use crate::optim::{Algorithm, OptimizerConfig, StopCriteria};
use crate::problems::{BurgersConfig, SincConvention};

use super::HarnessError;

/// Sinc dataset size for quick local runs.
pub const DESK_SINC_POINTS: usize = 2_000;
/// Collocation budget for quick local Burgers runs.
pub const DESK_COLLOCATION_POINTS: usize = 2_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SincConfig {
    pub n: usize,
    pub convention: SincConvention,
}

impl Default for SincConfig {
    fn default() -> Self {
        Self {
            n: 20_000,
            convention: SincConvention::Unnormalized,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemConfig {
    Sinc(SincConfig),
    Burgers(BurgersConfig),
}

impl ProblemConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            ProblemConfig::Sinc(_) => "sinc",
            ProblemConfig::Burgers(_) => "burgers",
        }
    }

    /// Shrinks the dataset to the quick local size.
    pub fn desk_scale(&mut self) {
        match self {
            ProblemConfig::Sinc(c) => c.n = DESK_SINC_POINTS,
            ProblemConfig::Burgers(c) => c.n_f = DESK_COLLOCATION_POINTS,
        }
    }
}

/// Second optimizer of a chained run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainPhase {
    pub optimizer: Algorithm,
    pub stop: StopCriteria,
}

/// One experiment, stored as a single JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub spec: MlpSpec,
    pub optimizer: Algorithm,
    #[serde(default)]
    pub optimizer_params: OptimizerConfig,
    pub stop: StopCriteria,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warm_start_path: Option<PathBuf>,
    /// Follow-up phase for chained runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain: Option<ChainPhase>,
}

impl ExperimentConfig {
    /// `1 -> 20 -> 20 -> 1` tanh network on sinc(10x), LM for 150 epochs.
    pub fn sinc_default() -> Self {
        Self {
            problem: ProblemConfig::Sinc(SincConfig::default()),
            spec: MlpSpec::new(1, &[20, 20], 1),
            optimizer: Algorithm::Lm,
            optimizer_params: OptimizerConfig::default(),
            stop: StopCriteria::epochs(150),
            seed: 0,
            warm_start_path: None,
            chain: None,
        }
    }

    /// Adam for 1500 epochs followed by BFGS for up to 5000 iterations.
    pub fn chain_default() -> Self {
        Self {
            optimizer: Algorithm::Adam,
            stop: StopCriteria::epochs(1500),
            chain: Some(ChainPhase {
                optimizer: Algorithm::Bfgs,
                stop: StopCriteria::epochs(5000),
            }),
            ..Self::sinc_default()
        }
    }

    /// Eight hidden layers of 20 units on Burgers' equation, LM for 50 epochs.
    pub fn burgers_default() -> Self {
        Self {
            problem: ProblemConfig::Burgers(BurgersConfig::default()),
            spec: MlpSpec::uniform(2, 8, 20, 1),
            optimizer: Algorithm::Lm,
            optimizer_params: OptimizerConfig::default(),
            stop: StopCriteria::epochs(50),
            seed: 0,
            warm_start_path: None,
            chain: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: Self = serde_json::from_str(&text)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.spec.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        self.stop.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        let (want_in, kind) = match self.problem {
            ProblemConfig::Sinc(c) => {
                if c.n < 2 {
                    return Err(HarnessError::Config(format!("sinc needs at least 2 points, got {}", c.n)));
                }
                (1, "sinc")
            }
            ProblemConfig::Burgers(_) => (2, "burgers"),
        };
        if self.spec.input_dim != want_in || self.spec.output_dim != 1 {
            return Err(HarnessError::Config(format!(
                "{kind} needs a {want_in} -> 1 network, got {} -> {}",
                self.spec.input_dim, self.spec.output_dim
            )));
        }
        if let Some(chain) = &self.chain {
            chain.stop.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        }
        Ok(())
    }
}

/// Adam depth-by-width sweep on the sinc problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    pub hidden_units: Vec<usize>,
    pub layers: Vec<usize>,
    pub epochs: usize,
    pub seed: u64,
    pub sinc: SincConfig,
    pub optimizer_params: OptimizerConfig,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            hidden_units: vec![16, 32, 48, 64, 80],
            layers: vec![1, 2, 3, 4],
            epochs: 5000,
            seed: 0,
            sinc: SincConfig::default(),
            optimizer_params: OptimizerConfig::default(),
        }
    }
}

impl GridConfig {
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: Self = serde_json::from_str(&text)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.hidden_units.is_empty() || self.layers.is_empty() {
            return Err(HarnessError::Config("grid needs at least one width and one depth".into()));
        }
        if self.hidden_units.contains(&0) {
            return Err(HarnessError::Config("hidden units must be positive".into()));
        }
        if self.epochs == 0 {
            return Err(HarnessError::Config("epochs must be at least 1".into()));
        }
        if self.sinc.n < 2 {
            return Err(HarnessError::Config(format!("sinc needs at least 2 points, got {}", self.sinc.n)));
        }
        Ok(())
    }
}
