use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::graph::EDGE_FEATURES;
use crate::layers::{Pooling, SkipKind};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// Attention blocks.
    #[default]
    Se3t,
    /// Convolution blocks.
    Tfn,
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "se3t" => Ok(ModelKind::Se3t),
            "tfn" => Ok(ModelKind::Tfn),
            other => Err(Error::Config(format!("unknown model `{other}` (expected se3t or tfn)"))),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Se3t => "se3t",
            ModelKind::Tfn => "tfn",
        })
    }
}

/// Architecture hyperparameters. Missing JSON fields take the defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub num_layers: usize,
    pub channels: usize,
    /// Hidden features use degrees `0..num_degrees`.
    pub num_degrees: u32,
    pub heads: usize,
    pub pooling: Pooling,
    pub skip: SkipKind,
    pub model: ModelKind,
    pub tasks: usize,
    pub node_features: usize,
    pub edge_features: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            num_layers: 7,
            channels: 32,
            num_degrees: 4,
            heads: 8,
            pooling: Pooling::Max,
            skip: SkipKind::Cat,
            model: ModelKind::Se3t,
            tasks: 1,
            node_features: 6,
            edge_features: EDGE_FEATURES,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("num_layers", self.num_layers),
            ("channels", self.channels),
            ("num_degrees", self.num_degrees as usize),
            ("heads", self.heads),
            ("tasks", self.tasks),
            ("node_features", self.node_features),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if self.model == ModelKind::Se3t && !self.channels.is_multiple_of(self.heads) {
            return Err(Error::Config(format!("channels ({}) must be divisible by heads ({})", self.channels, self.heads)));
        }
        Ok(())
    }

    /// Highest feature degree, `num_degrees - 1`.
    pub fn max_degree(&self) -> u32 {
        self.num_degrees.saturating_sub(1)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    #[default]
    Mae,
    Mse,
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mae" => Ok(LossKind::Mae),
            "mse" => Ok(LossKind::Mse),
            other => Err(Error::Config(format!("unknown loss `{other}` (expected mae or mse)"))),
        }
    }
}

/// Optimisation settings. Missing JSON fields take the defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub loss: LossKind,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 72,
            learning_rate: 1e-3,
            seed: 0,
            loss: LossKind::Mae,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.adam_eps > 0.0) {
            return Err(Error::Config("Adam needs 0 <= beta < 1 and eps > 0".into()));
        }
        Ok(())
    }
}
