//! Automatic metrics: unusualness and distinct-n.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::corpus::{SensePair, TaggedSentence, Vocabulary};
use crate::discriminator::DiscriminatorParams;
use crate::error::{Error, Result};
use crate::generator::{generate, sentence_logprob, supports, Budget, Decode, GeneratorParams};
use crate::reward::score_trace;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    /// Mean per-token log-probability of generated minus training sentences (nats).
    pub unusualness: f64,
    /// Percent.
    pub dist1: f64,
    /// Percent.
    pub dist2: f64,
    pub sentence_count: usize,
    /// Mean ambiguity reward of the generated sentences, when a discriminator was given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_reward: Option<f64>,
}

impl MetricReport {
    pub fn to_table(&self) -> String {
        let mut s = format!(
            "{:<14}{:>10}\n{:<14}{:>10.4}\n{:<14}{:>10.2}\n{:<14}{:>10.2}\n{:<14}{:>10}\n",
            "metric",
            "value",
            "unusualness",
            self.unusualness,
            "dist-1 (%)",
            self.dist1,
            "dist-2 (%)",
            self.dist2,
            "sentences",
            self.sentence_count
        );
        if let Some(r) = self.mean_reward {
            s.push_str(&format!("{:<14}{:>10.4}\n", "mean reward", r));
        }
        s
    }
}

/// `100 * distinct n-grams / total n-grams`, pooled over all sentences.
/// Sentences are whitespace-tokenized; those shorter than `n` add nothing.
pub fn distinct_n<S: AsRef<str>>(sentences: &[S], n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "n-gram order must be at least 1".into(),
        ));
    }
    let mut distinct: HashSet<Vec<&str>> = HashSet::new();
    let mut total = 0usize;
    for s in sentences {
        let words: Vec<&str> = s.as_ref().split_whitespace().collect();
        for gram in words.windows(n) {
            total += 1;
            distinct.insert(gram.to_vec());
        }
    }
    if total == 0 {
        return Err(Error::UndefinedMetric(format!(
            "no sentence has at least {n} tokens"
        )));
    }
    Ok(100.0 * distinct.len() as f64 / total as f64)
}

/// A sentence with the senses it should be scored under.
#[derive(Debug, Clone)]
pub struct ScoringItem {
    pub sentence: TaggedSentence,
    pub senses: Vec<String>,
}

impl ScoringItem {
    /// A labeled corpus sentence, scored under its label.
    pub fn labeled(sentence: &TaggedSentence) -> Result<Self> {
        let sense = sentence
            .sense
            .clone()
            .ok_or_else(|| Error::InvalidArgument("scoring needs a sense label".into()))?;
        Ok(ScoringItem {
            sentence: sentence.clone(),
            senses: vec![sense],
        })
    }

    /// A generated sentence, scored under each sense of its pair.
    pub fn generated(sentence: TaggedSentence, pair: &SensePair) -> Self {
        ScoringItem {
            sentence,
            senses: vec![pair.s1.clone(), pair.s2.clone()],
        }
    }
}

/// A language model used as a fixed yardstick.
pub trait SentenceScorer {
    /// Mean log-probability per predicted token.
    fn per_token_logprob(&self, item: &ScoringItem) -> Result<f64>;
}

/// The generator in single-sense mode: both mixture paths see the same
/// sense, so each emission is an ordinary LM softmax. Items with several
/// senses are scored once per sense and averaged.
pub struct SingleSenseLm<'a> {
    pub params: &'a GeneratorParams,
    pub vocab: &'a Vocabulary,
}

impl SentenceScorer for SingleSenseLm<'_> {
    fn per_token_logprob(&self, item: &ScoringItem) -> Result<f64> {
        if item.senses.is_empty() {
            return Err(Error::InvalidArgument("no sense to score under".into()));
        }
        // n - 1 context words plus both terminators.
        let emissions = (item.sentence.len() + 1) as f64;
        let mut acc = 0.0;
        for sense in &item.senses {
            let pair = SensePair::single(&item.sentence.lemma, sense);
            acc += sentence_logprob(
                self.params,
                self.vocab,
                &item.sentence,
                &pair,
                Budget::Unbounded,
            )? / emissions;
        }
        Ok(acc / item.senses.len() as f64)
    }
}

fn mean_per_token<L: SentenceScorer + ?Sized>(lm: &L, items: &[ScoringItem]) -> Result<f64> {
    if items.is_empty() {
        return Err(Error::InvalidArgument(
            "unusualness needs non-empty sentence sets".into(),
        ));
    }
    let mut acc = 0.0;
    for it in items {
        acc += lm.per_token_logprob(it)?;
    }
    Ok(acc / items.len() as f64)
}

/// Mean per-token log-probability of `generated` minus that of `training`,
/// both under `lm`. Each set's mean is taken over sentences.
pub fn unusualness<L: SentenceScorer + ?Sized>(
    lm: &L,
    generated: &[ScoringItem],
    training: &[ScoringItem],
) -> Result<f64> {
    if generated.is_empty() || training.is_empty() {
        return Err(Error::InvalidArgument(
            "unusualness needs non-empty sentence sets".into(),
        ));
    }
    Ok(mean_per_token(lm, generated)? - mean_per_token(lm, training)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeMode {
    Sample,
    Greedy,
}

#[derive(Debug, Clone, Copy)]
pub struct EvalConfig {
    /// Sentences to generate, spread round-robin over the pair list.
    pub count: usize,
    pub seed: u64,
    pub max_len: usize,
    pub decode: DecodeMode,
}

/// Inputs shared by an evaluation run.
pub struct EvalModels<'a> {
    pub generator: &'a GeneratorParams,
    /// Scores unusualness; normally the pretrained generator.
    pub scoring_lm: &'a GeneratorParams,
    pub discriminator: Option<&'a DiscriminatorParams>,
    pub vocab: &'a Vocabulary,
}

/// Generates `count` sentences for `pairs` (sample `i` uses pair
/// `i % pairs.len()` and its own seeded stream) and reports every metric.
pub fn evaluate_run(
    models: &EvalModels<'_>,
    pairs: &[SensePair],
    training_sample: &[TaggedSentence],
    config: &EvalConfig,
) -> Result<MetricReport> {
    if pairs.is_empty() {
        return Err(Error::InvalidArgument(
            "evaluation needs at least one sense pair".into(),
        ));
    }
    if config.count == 0 {
        return Err(Error::InvalidArgument(
            "evaluation needs at least one sentence".into(),
        ));
    }
    let mut generated = Vec::with_capacity(config.count);
    let mut texts = Vec::with_capacity(config.count);
    let mut rewards = Vec::new();
    for i in 0..config.count {
        let pair = &pairs[i % pairs.len()];
        let mut r = rng::stream(config.seed, &[0xE7A1, i as u64]);
        let decode = match config.decode {
            DecodeMode::Sample => Decode::Sample(&mut r),
            DecodeMode::Greedy => Decode::Greedy,
        };
        let trace = generate(models.generator, models.vocab, pair, decode, config.max_len)?;
        if let Some(d) = models.discriminator {
            rewards.push(score_trace(d, models.vocab, &trace, pair)?.reward);
        }
        let sentence = trace.sentence();
        texts.push(models.vocab.surface_text(&sentence));
        generated.push(ScoringItem::generated(sentence, pair));
    }
    let training = scorable_training_items(models.vocab, training_sample)?;
    let lm = SingleSenseLm {
        params: models.scoring_lm,
        vocab: models.vocab,
    };
    Ok(MetricReport {
        unusualness: unusualness(&lm, &generated, &training)?,
        dist1: distinct_n(&texts, 1)?,
        dist2: distinct_n(&texts, 2).unwrap_or(0.0),
        sentence_count: texts.len(),
        mean_reward: (!rewards.is_empty())
            .then(|| rewards.iter().sum::<f64>() / rewards.len() as f64),
    })
}

/// Labeled training sentences the scoring LM can score; others are dropped.
pub fn scorable_training_items(
    vocab: &Vocabulary,
    sample: &[TaggedSentence],
) -> Result<Vec<ScoringItem>> {
    let mut out = Vec::with_capacity(sample.len());
    for s in sample {
        if s.is_labeled() && supports(vocab, s, Budget::Unbounded) {
            out.push(ScoringItem::labeled(s)?);
        }
    }
    if out.len() < sample.len() {
        log::warn!(
            "{} of {} training sentences cannot be scored and were skipped",
            sample.len() - out.len(),
            sample.len()
        );
    }
    Ok(out)
}

/// Metrics of a reference set against itself: unusualness is zero by
/// construction, distinct-n describes the reference text.
pub fn self_comparison(
    lm: &GeneratorParams,
    vocab: &Vocabulary,
    training_sample: &[TaggedSentence],
) -> Result<MetricReport> {
    let items = scorable_training_items(vocab, training_sample)?;
    let texts: Vec<String> = items
        .iter()
        .map(|i| vocab.surface_text(&i.sentence))
        .collect();
    let scorer = SingleSenseLm { params: lm, vocab };
    Ok(MetricReport {
        unusualness: unusualness(&scorer, &items, &items)?,
        dist1: distinct_n(&texts, 1)?,
        dist2: distinct_n(&texts, 2).unwrap_or(0.0),
        sentence_count: texts.len(),
        mean_reward: None,
    })
}
