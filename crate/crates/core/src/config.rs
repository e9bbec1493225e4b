//! Run configuration shared by the command-line workflows.
//!
//! TOML with sections `[grpo]`, `[reward]`, `[data]` and `[run]`. Unknown
//! keys are rejected. Every field has a default, so an empty file is valid.

use serde::{Deserialize, Serialize};

use crate::data::{DatasetKind, SplitSpec};
use crate::grpo::GrpoConfig;
use crate::policy::PolicyKind;
use crate::reward::{GateMode, TaskMetric};

/// Environment variable that overrides `[run].seed`.
pub const SEED_ENV: &str = "COA_SEED";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("{SEED_ENV}=`{0}` is not an unsigned integer")]
    SeedEnv(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunMode {
    Sft,
    #[default]
    Rlvr,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardSection {
    pub task_metric: TaskMetric,
    pub format_mode: GateMode,
    /// How toy policies render their selections. Defaults to `format_mode`.
    pub render_mode: Option<GateMode>,
}

impl RewardSection {
    pub fn effective_render_mode(&self) -> GateMode {
        self.render_mode.unwrap_or(self.format_mode)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    /// Vocabulary file; when absent the first record's vocabulary is used.
    pub vocab: Option<String>,
    pub dataset: DatasetKind,
    /// Subsample the data before training.
    pub split: Option<SplitSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub seed: u64,
    pub mode: RunMode,
    pub policy: PolicyKind,
    /// Answer slots for `categorical_sequence` policies.
    pub positions: usize,
    pub output_dir: Option<String>,
    pub sft_learning_rate: f64,
    pub sft_epochs: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seed: 0,
            mode: RunMode::default(),
            policy: PolicyKind::default(),
            positions: 3,
            output_dir: None,
            sft_learning_rate: 1e-5,
            sft_epochs: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub grpo: GrpoConfig,
    pub reward: RewardSection,
    pub data: DataSection,
    pub run: RunSection,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    /// Apply the seed override and propagate `[run].seed` to the trainer.
    pub fn resolve(mut self, seed_override: Option<u64>) -> Result<Self, ConfigError> {
        if let Some(seed) = seed_override {
            self.run.seed = seed;
        }
        self.grpo.seed = self.run.seed;
        self.grpo.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if !(self.run.sft_learning_rate.is_finite() && self.run.sft_learning_rate > 0.0) {
            return Err(ConfigError::Invalid("run.sft_learning_rate must be positive".into()));
        }
        if self.run.policy == PolicyKind::CategoricalSequence && self.run.positions == 0 {
            return Err(ConfigError::Invalid("run.positions must be at least 1".into()));
        }
        Ok(self)
    }

    /// Read the override from the process environment.
    pub fn seed_from_env() -> Result<Option<u64>, ConfigError> {
        match std::env::var(SEED_ENV) {
            Ok(v) => v.trim().parse().map(Some).map_err(|_| ConfigError::SeedEnv(v)),
            Err(_) => Ok(None),
        }
    }
}
