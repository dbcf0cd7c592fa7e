//! Run configuration, loaded from TOML.
//!
//! ```toml
//! seed = 7
//!
//! [model]          # HyperParams
//! layers = 2
//! model_dim = 64
//!
//! [compiler]       # path, flags, timeout_secs, max_concurrent
//! path = "gcc"
//!
//! [synthesis]      # variants_per_program, max_errors, category_mix, retry_budget
//! variants_per_program = 50
//!
//! [training]
//! epochs = 20
//!
//! [repair]         # beam_width, max_iters, max_line_attempts
//! beam_width = 5
//!
//! [split]          # train, validation, test
//! train = 0.8
//! ```
//!
//! Missing sections take their defaults. Sub-seeds for each stage are
//! derived from the root `seed`.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corrupt::SynthesisConfig;
use crate::dataset::SplitRatios;
use crate::diagnostics::CompilerConfig;
use crate::model::HyperParams;
use crate::par::Parallelism;
use crate::repair::RepairConfig;
use crate::seed;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{0}: {1}")]
    Io(String, std::io::Error),
    #[error("{0}: {1}")]
    Parse(String, String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSettings {
    pub epochs: usize,
    /// Stop once training-set acc@1 reaches this value.
    pub target_acc: Option<f64>,
    /// Epochs between accuracy checks.
    pub eval_every: usize,
}

impl Default for TrainingSettings {
    fn default() -> Self {
        Self {
            epochs: 20,
            target_acc: None,
            eval_every: 1,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub parallelism: Parallelism,
    pub model: HyperParams,
    pub compiler: CompilerConfig,
    pub synthesis: SynthesisConfig,
    pub training: TrainingSettings,
    pub repair: RepairConfig,
    pub split: SplitRatios,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse("config".into(), e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(path.display().to_string(), e))?;
        toml::from_str(&text).map_err(|e| ConfigError::Parse(path.display().to_string(), e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Named sub-seed of the root seed.
    pub fn stage_seed(&self, stage: &str) -> u64 {
        seed::sub_seed(self.seed, stage)
    }

    /// Synthesis settings with the derived seed and run parallelism.
    pub fn synthesis_config(&self) -> SynthesisConfig {
        SynthesisConfig {
            seed: self.stage_seed("synthesis"),
            parallelism: self.parallelism,
            ..self.synthesis.clone()
        }
    }
}
