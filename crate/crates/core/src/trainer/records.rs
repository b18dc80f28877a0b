use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One pretraining epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean of the per-batch losses seen during the epoch.
    pub mean_batch_loss: f64,
    /// Loss over the whole training set after the epoch's updates.
    pub end_loss: f64,
    pub batches: usize,
}

/// One adversarial round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    /// Mean policy-gradient surrogate over the round's generator steps.
    pub gen_loss: f64,
    /// Mean discriminator loss; absent when the discriminator is frozen.
    pub disc_loss: Option<f64>,
    pub mean_reward: f64,
    pub min_reward: f64,
    pub max_reward: f64,
    pub samples: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_clock_secs: Option<f64>,
}

impl RoundRecord {
    pub fn validate(&self) -> Result<()> {
        let losses_finite = self.gen_loss.is_finite() && self.disc_loss.is_none_or(f64::is_finite);
        if !losses_finite {
            return Err(Error::Diverged(format!(
                "non-finite loss in round {}",
                self.round
            )));
        }
        if !(0.0..=1.0).contains(&self.mean_reward) {
            return Err(Error::Diverged(format!(
                "mean reward {} outside [0, 1] in round {}",
                self.mean_reward, self.round
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub rounds: Vec<RoundRecord>,
}

impl TrainingLog {
    /// Appends `record`, enforcing increasing round indices.
    pub fn push(&mut self, record: RoundRecord) -> Result<()> {
        if let Some(last) = self.rounds.last() {
            if record.round <= last.round {
                return Err(Error::InvalidArgument(format!(
                    "round {} logged after round {}",
                    record.round, last.round
                )));
            }
        }
        self.rounds.push(record);
        Ok(())
    }

    pub fn mean_rewards(&self) -> Vec<f64> {
        self.rounds.iter().map(|r| r.mean_reward).collect()
    }

    pub fn to_jsonl(&self) -> Result<String> {
        to_jsonl(&self.rounds)
    }

    pub fn parse_jsonl(text: &str) -> Result<Self> {
        let mut log = TrainingLog::default();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            log.push(serde_json::from_str(line)?)?;
        }
        Ok(log)
    }
}

pub fn to_jsonl<T: Serialize>(records: &[T]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: impl AsRef<Path>, records: &[T]) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
