//! Ambiguity reward: high when the discriminator puts large and balanced
//! mass on both target senses.

use serde::{Deserialize, Serialize};

use crate::corpus::{SensePair, Vocabulary};
use crate::discriminator::{sense_pair_probs, DiscriminatorParams};
use crate::error::{Error, Result};
use crate::generator::{GenerationTrace, RewardedSample, SampleBatch};

const MASS_TOLERANCE: f64 = 1e-9;

/// `(p1 + p2) / (|p1 - p2| + 1)`, in `[0, 1]` for valid inputs.
pub fn ambiguity_reward(p1: f64, p2: f64) -> Result<f64> {
    let in_unit = |p: f64| (0.0..=1.0).contains(&p);
    if !in_unit(p1) || !in_unit(p2) || p1 + p2 > 1.0 + MASS_TOLERANCE {
        return Err(Error::InvalidArgument(format!(
            "sense probabilities ({p1}, {p2}) are not part of a distribution"
        )));
    }
    Ok((p1 + p2) / ((p1 - p2).abs() + 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardRecord {
    pub p1: f64,
    pub p2: f64,
    pub reward: f64,
}

pub fn score_trace(
    disc: &DiscriminatorParams,
    vocab: &Vocabulary,
    trace: &GenerationTrace,
    pair: &SensePair,
) -> Result<RewardRecord> {
    let (p1, p2) = sense_pair_probs(disc, vocab, &trace.sentence(), pair)?;
    Ok(RewardRecord {
        p1,
        p2,
        reward: ambiguity_reward(p1, p2)?,
    })
}

/// Scores each trace under the current discriminator. The rewards are
/// plain numbers: nothing links them back to the generator's parameters.
pub fn batch_rewards(
    disc: &DiscriminatorParams,
    vocab: &Vocabulary,
    traces: Vec<GenerationTrace>,
    pair: &SensePair,
) -> Result<SampleBatch> {
    let mut samples = Vec::with_capacity(traces.len());
    for trace in traces {
        if trace.pair.lemma != pair.lemma {
            return Err(Error::InvalidArgument(format!(
                "sample for `{}` in a batch for `{}`",
                trace.pair.lemma, pair.lemma
            )));
        }
        let reward = score_trace(disc, vocab, &trace, pair)?.reward;
        samples.push(RewardedSample { trace, reward });
    }
    Ok(SampleBatch {
        pair: pair.clone(),
        samples,
    })
}
