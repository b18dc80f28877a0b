use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hyperparameters and schedule. Loaded from a flat TOML file; absent keys
/// take their defaults, unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub batch_size: usize,
    pub lr: f64,
    /// Samples per sense pair in a policy-gradient step.
    #[serde(alias = "K")]
    pub k_samples: usize,
    pub gen_pretrain_epochs: usize,
    pub disc_pretrain_epochs: usize,
    pub gen_steps_per_round: usize,
    /// Zero freezes the discriminator during adversarial training.
    pub disc_steps_per_round: usize,
    pub adversarial_rounds: usize,
    /// Word budget for generated sentences.
    pub max_len: usize,
    pub embedding_dim: usize,
    pub gen_hidden: usize,
    pub disc_hidden: usize,
    pub seed: u64,
    pub init_range: f64,
    /// Corpus tokens rarer than this map to `<unk>`.
    pub min_count: usize,
    /// Global gradient-norm clip; off when absent.
    pub grad_clip: Option<f64>,
    /// Subtract the batch-mean reward in policy-gradient steps.
    pub reward_baseline: bool,
    /// Include the unlabeled term in discriminator updates.
    pub use_unlabeled: bool,
    /// Include the generated term in discriminator updates.
    pub use_generated: bool,
    /// Save checkpoints every N adversarial rounds; 0 saves only the last.
    pub checkpoint_every: usize,
    /// Decoded samples kept per log record.
    pub log_samples: usize,
    /// Add elapsed seconds to log records. Breaks bitwise-identical logs.
    pub record_wall_clock: bool,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            batch_size: 32,
            lr: 0.001,
            k_samples: 32,
            gen_pretrain_epochs: 5,
            disc_pretrain_epochs: 4,
            gen_steps_per_round: 1,
            disc_steps_per_round: 5,
            adversarial_rounds: 100,
            max_len: 20,
            embedding_dim: 32,
            gen_hidden: 64,
            disc_hidden: 64,
            seed: 0,
            init_range: 0.08,
            min_count: 1,
            grad_clip: None,
            reward_baseline: false,
            use_unlabeled: true,
            use_generated: true,
            checkpoint_every: 0,
            log_samples: 3,
            record_wall_clock: false,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("batch_size", self.batch_size),
            ("k_samples", self.k_samples),
            ("gen_pretrain_epochs", self.gen_pretrain_epochs),
            ("disc_pretrain_epochs", self.disc_pretrain_epochs),
            ("gen_steps_per_round", self.gen_steps_per_round),
            ("adversarial_rounds", self.adversarial_rounds),
            ("max_len", self.max_len),
            ("embedding_dim", self.embedding_dim),
            ("gen_hidden", self.gen_hidden),
            ("disc_hidden", self.disc_hidden),
            ("min_count", self.min_count),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::Config(format!(
                "lr must be positive, got {}",
                self.lr
            )));
        }
        if !(self.init_range.is_finite() && self.init_range >= 0.0) {
            return Err(Error::Config("init_range must be non-negative".into()));
        }
        if let Some(c) = self.grad_clip {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::Config("grad_clip must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: TrainingConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}
