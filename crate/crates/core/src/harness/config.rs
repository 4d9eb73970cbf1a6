//! JSON run configuration. Command-line flags override environment
//! variables (`REVUL_*`), which override the file, which overrides defaults.

use super::HarnessError;
use crate::fusion::TrainConfig;
use crate::scoring::SumMode;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoringConfig {
    pub alpha: Option<f64>,
    pub tau: Option<f64>,
    pub sum_mode: Option<SumMode>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionConfig {
    pub learning_rate: Option<f64>,
    pub total_steps: Option<usize>,
    pub batch_size: Option<usize>,
    pub weight_decay: Option<f64>,
    pub tau_gate: Option<f64>,
    pub lambda_jaco: Option<f64>,
    pub warmup_ratio: Option<f64>,
    pub mask: Option<[bool; 4]>,
    pub prior: Option<[f64; 4]>,
    pub fixed_alpha: Option<[f64; 4]>,
    pub prior_mix: Option<bool>,
    /// `total` or `fusion-only`.
    pub sensitivity: Option<String>,
    /// Ignored.
    pub delta: Option<f64>,
}

impl FusionConfig {
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        let d = TrainConfig::default();
        TrainConfig {
            learning_rate: self.learning_rate.unwrap_or(d.learning_rate),
            total_steps: self.total_steps.unwrap_or(d.total_steps),
            batch_size: self.batch_size.unwrap_or(d.batch_size),
            weight_decay: self.weight_decay.unwrap_or(d.weight_decay),
            seed,
            ..d
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub inputs: Vec<PathBuf>,
    pub tasks: Vec<String>,
    pub scoring: ScoringConfig,
    pub fusion: FusionConfig,
    pub seeds: Vec<u64>,
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, HarnessError> {
        let text = std::fs::read_to_string(path)?;
        let cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Every referenced input must exist.
    pub fn validate(&self) -> Result<(), HarnessError> {
        if let Some(s) = self.fusion.sensitivity.as_deref() {
            if s != "total" && s != "fusion-only" {
                return Err(HarnessError::Config(format!("unknown sensitivity {s:?}")));
            }
        }
        match self.inputs.iter().find(|p| !p.exists()) {
            Some(p) => Err(HarnessError::Config(format!("input {} does not exist", p.display()))),
            None => Ok(()),
        }
    }
}
