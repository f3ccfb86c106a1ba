use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::task::TaskSpec;
use crate::error::{Error, Result};
use crate::learner::{ArchOptions, Optimizer, TrainConfig};

/// Top-level experiment file: the task plus one optional section per driver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub task: TaskSpec,
    #[serde(default)]
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub train: TrainSettings,
    #[serde(default)]
    pub lipschitz: ProbeSection,
    #[serde(default)]
    pub rollout: RolloutSection,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.experiment.n_grid;
        if g.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig("n_grid must be strictly ascending".into()));
        }
        if self.experiment.seeds.is_empty() {
            return Err(Error::InvalidConfig("at least one seed is required".into()));
        }
        self.train.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSection {
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_n_grid")]
    pub n_grid: Vec<usize>,
    #[serde(default = "default_n_test")]
    pub n_test: usize,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    /// Slope the mean-error fit must not exceed for the study to pass.
    #[serde(default = "default_slope_gate")]
    pub slope_gate: f64,
}

fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2]
}

fn default_n_grid() -> Vec<usize> {
    vec![128, 256, 512, 1024, 2048]
}

fn default_n_test() -> usize {
    2048
}

fn default_slope_gate() -> f64 {
    -0.2
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            seeds: default_seeds(),
            n_grid: default_n_grid(),
            n_test: default_n_test(),
            out_dir: None,
            slope_gate: default_slope_gate(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerKind {
    Adam,
    Gd,
}

/// Training hyperparameters; network size comes from the task unless overridden.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSettings {
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    /// Lower bound on optimizer updates; small datasets get extra epochs.
    #[serde(default)]
    pub min_updates: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_optimizer")]
    pub optimizer: OptimizerKind,
    #[serde(default)]
    pub lr_floor: Option<f64>,
    #[serde(default = "default_c")]
    pub c: f64,
    #[serde(default = "default_l_base")]
    pub l_base: usize,
    #[serde(default)]
    pub depth: Option<usize>,
    #[serde(default)]
    pub width: Option<usize>,
}

fn default_lr() -> f64 {
    1e-3
}

fn default_epochs() -> usize {
    200
}

fn default_batch() -> usize {
    32
}

fn default_optimizer() -> OptimizerKind {
    OptimizerKind::Adam
}

fn default_c() -> f64 {
    4.0
}

fn default_l_base() -> usize {
    2
}

impl Default for TrainSettings {
    fn default() -> Self {
        TrainSettings {
            learning_rate: default_lr(),
            epochs: default_epochs(),
            min_updates: 0,
            batch_size: default_batch(),
            optimizer: default_optimizer(),
            lr_floor: None,
            c: default_c(),
            l_base: default_l_base(),
            depth: None,
            width: None,
        }
    }
}

impl TrainSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) || self.l_base == 0 {
            return Err(Error::InvalidConfig("train.c and train.l_base must be positive".into()));
        }
        self.to_train_config(2, 1, 1.0, 0, 1).validate()
    }

    pub fn arch_options(&self, m: usize, r_y: f64) -> ArchOptions {
        ArchOptions {
            c: self.c,
            l_base: self.l_base,
            m,
            l_ey: 1.0,
            r_y,
        }
    }

    /// Epoch count for `n` samples after applying `min_updates`.
    pub fn epochs_for(&self, n: usize) -> usize {
        let per_epoch = match self.optimizer {
            OptimizerKind::Adam => n.div_ceil(self.batch_size).max(1),
            OptimizerKind::Gd => 1,
        };
        self.epochs.max(self.min_updates.div_ceil(per_epoch))
    }

    pub fn to_train_config(&self, depth: usize, width: usize, clip: f64, seed: u64, n: usize) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            epochs: self.epochs_for(n),
            batch_size: self.batch_size,
            seed,
            clip,
            depth: self.depth.unwrap_or(depth),
            width: self.width.unwrap_or(width),
            optimizer: match self.optimizer {
                OptimizerKind::Adam => Optimizer::adam(),
                OptimizerKind::Gd => Optimizer::FullBatchGd,
            },
            lr_floor: self.lr_floor,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeSection {
    #[serde(default = "default_pairs")]
    pub n_pairs: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_pairs() -> usize {
    10_000
}

impl Default for ProbeSection {
    fn default() -> Self {
        ProbeSection {
            n_pairs: default_pairs(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SurrogateKind {
    Network,
    Circuit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutSection {
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_mc")]
    pub n_mc: usize,
    #[serde(default = "default_rollout_train")]
    pub n_train: usize,
    #[serde(default = "default_mc")]
    pub n_test: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_surrogate")]
    pub surrogate: SurrogateKind,
    /// Initial conditions used for the finite-difference estimates of `L_0` and `M_0`.
    #[serde(default = "default_fd_samples")]
    pub fd_samples: usize,
}

fn default_steps() -> usize {
    50
}

fn default_mc() -> usize {
    256
}

fn default_rollout_train() -> usize {
    2048
}

fn default_surrogate() -> SurrogateKind {
    SurrogateKind::Network
}

fn default_fd_samples() -> usize {
    16
}

impl Default for RolloutSection {
    fn default() -> Self {
        RolloutSection {
            steps: default_steps(),
            n_mc: default_mc(),
            n_train: default_rollout_train(),
            n_test: default_mc(),
            seed: 0,
            surrogate: default_surrogate(),
            fd_samples: default_fd_samples(),
        }
    }
}
