//! Pretraining and the alternating adversarial loop.
//!
//! Every random choice draws from a stream derived from the config seed and
//! the phase/epoch/round index, so a run resumed from a round checkpoint
//! replays exactly the rounds an uninterrupted run would have.

mod config;
mod records;

use std::time::Instant;

use rand::seq::index::sample as sample_indices;
use rand::Rng as _;

pub use self::config::TrainingConfig;
pub use self::records::{to_jsonl, write_jsonl, EpochRecord, RoundRecord, TrainingLog};

use crate::corpus::{
    batch_iter, build_vocabulary, SenseInventory, SensePair, TaggedSentence, TaggedText, Vocabulary,
};
use crate::discriminator::{
    classify, discriminator_loss, discriminator_train_step, DiscriminatorBatch,
    DiscriminatorParams, DiscriminatorShape,
};
use crate::error::{Error, Result};
use crate::generator::{
    mle_loss, mle_pretrain_step, policy_gradient_step, sample_sentence, supports, Budget,
    GeneratorParams, GeneratorShape,
};
use crate::reward::batch_rewards;
use crate::rng::{self, Rng};

const INIT_GENERATOR: u64 = 1;
const INIT_DISCRIMINATOR: u64 = 2;
const PRETRAIN_GENERATOR: u64 = 3;
const PRETRAIN_DISCRIMINATOR: u64 = 4;
const ADVERSARIAL: u64 = 5;

/// Encoded corpora plus the vocabulary and inventory they were encoded with.
#[derive(Debug, Clone)]
pub struct TrainingData {
    pub vocab: Vocabulary,
    pub inventory: SenseInventory,
    pub labeled: Vec<TaggedSentence>,
    pub unlabeled: Vec<TaggedSentence>,
    /// Sense pairs sampled during adversarial training.
    pub pairs: Vec<SensePair>,
}

impl TrainingData {
    /// Builds the vocabulary from both corpora and encodes them.
    pub fn from_texts(
        inventory: SenseInventory,
        labeled: &[TaggedText],
        unlabeled: &[TaggedText],
        pairs: Vec<SensePair>,
        min_count: usize,
    ) -> Result<Self> {
        let vocab = build_vocabulary(&[labeled, unlabeled], &inventory, min_count);
        Self::encode(vocab, inventory, labeled, unlabeled, pairs)
    }

    /// Encodes both corpora with an existing vocabulary.
    pub fn encode(
        vocab: Vocabulary,
        inventory: SenseInventory,
        labeled: &[TaggedText],
        unlabeled: &[TaggedText],
        pairs: Vec<SensePair>,
    ) -> Result<Self> {
        let enc = |texts: &[TaggedText]| -> Result<Vec<TaggedSentence>> {
            texts
                .iter()
                .map(|t| {
                    let s = vocab.encode(t);
                    vocab.validate(&s, &inventory)?;
                    Ok(s)
                })
                .collect()
        };
        let labeled = enc(labeled)?;
        let unlabeled = enc(unlabeled)?;
        if let Some(s) = labeled.iter().find(|s| !s.is_labeled()) {
            return Err(Error::InvalidArgument(format!(
                "labeled corpus contains an unlabeled sentence for `{}`",
                s.lemma
            )));
        }
        for p in &pairs {
            p.validate(&inventory)?;
        }
        Ok(TrainingData {
            vocab,
            inventory,
            labeled,
            unlabeled,
            pairs,
        })
    }
}

pub fn init_generator(config: &TrainingConfig, vocab: &Vocabulary) -> GeneratorParams {
    let shape = GeneratorShape {
        vocab_size: vocab.len(),
        embedding_dim: config.embedding_dim,
        hidden: config.gen_hidden,
    };
    GeneratorParams::init(
        shape,
        config.init_range,
        &mut rng::stream(config.seed, &[INIT_GENERATOR]),
    )
}

pub fn init_discriminator(config: &TrainingConfig, data: &TrainingData) -> DiscriminatorParams {
    let shape = DiscriminatorShape {
        vocab_size: data.vocab.len(),
        embedding_dim: config.embedding_dim,
        hidden: config.disc_hidden,
    };
    DiscriminatorParams::init(
        shape,
        &data.inventory,
        config.init_range,
        &mut rng::stream(config.seed, &[INIT_DISCRIMINATOR]),
    )
}

/// Labeled sentences the generator can assign likelihood to.
pub fn mle_trainable<'a>(
    vocab: &Vocabulary,
    labeled: &'a [TaggedSentence],
) -> Vec<&'a TaggedSentence> {
    let kept: Vec<_> = labeled
        .iter()
        .filter(|s| supports(vocab, s, Budget::Unbounded))
        .collect();
    if kept.len() < labeled.len() {
        log::warn!(
            "{} of {} labeled sentences have a masked word next to the pun and are not used for MLE",
            labeled.len() - kept.len(),
            labeled.len()
        );
    }
    kept
}

/// Mean negative log-likelihood of `sentences` without a parameter update.
pub fn corpus_nll(
    params: &GeneratorParams,
    vocab: &Vocabulary,
    sentences: &[&TaggedSentence],
    batch_size: usize,
) -> Result<f64> {
    let mut total = 0.0;
    for chunk in sentences.chunks(batch_size.max(1)) {
        total += mle_loss(params, vocab, chunk)?.0 * chunk.len() as f64;
    }
    Ok(total / sentences.len().max(1) as f64)
}

/// Initializes the generator and runs `gen_pretrain_epochs` of MLE over
/// shuffled batches of the labeled corpus.
pub fn pretrain_generator(
    config: &TrainingConfig,
    data: &TrainingData,
) -> Result<(GeneratorParams, Vec<EpochRecord>)> {
    config.validate()?;
    let mut params = init_generator(config, &data.vocab);
    let log = continue_generator_pretraining(config, data, &mut params)?;
    Ok((params, log))
}

/// MLE epochs on existing generator parameters.
pub fn continue_generator_pretraining(
    config: &TrainingConfig,
    data: &TrainingData,
    params: &mut GeneratorParams,
) -> Result<Vec<EpochRecord>> {
    let items = mle_trainable(&data.vocab, &data.labeled);
    if items.is_empty() {
        return Err(Error::InvalidArgument(
            "generator pretraining needs a non-empty labeled corpus".into(),
        ));
    }
    let mut log = Vec::with_capacity(config.gen_pretrain_epochs);
    for epoch in 1..=config.gen_pretrain_epochs {
        let seed = rng::derive_seed(config.seed, &[PRETRAIN_GENERATOR, epoch as u64]);
        let mut acc = 0.0;
        let mut batches = 0;
        for batch in batch_iter(&items, config.batch_size, seed)? {
            let batch: Vec<&TaggedSentence> = batch.into_iter().copied().collect();
            acc += mle_pretrain_step(params, &data.vocab, &batch, config.lr, config.grad_clip)?;
            batches += 1;
        }
        let record = EpochRecord {
            epoch,
            mean_batch_loss: acc / batches as f64,
            end_loss: corpus_nll(params, &data.vocab, &items, config.batch_size)?,
            batches,
        };
        if !record.end_loss.is_finite() {
            return Err(Error::Diverged(format!(
                "generator loss is not finite after epoch {epoch}"
            )));
        }
        log::info!("generator epoch {epoch}: loss {:.4}", record.end_loss);
        log.push(record);
    }
    Ok(log)
}

/// Draws `n` sentences from the generator with uniformly chosen pairs.
fn generated_batch(
    gen: &GeneratorParams,
    data: &TrainingData,
    n: usize,
    max_len: usize,
    rng: &mut Rng,
) -> Result<Vec<TaggedSentence>> {
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let pair = &data.pairs[rng.gen_range(0..data.pairs.len())];
        out.push(sample_sentence(gen, &data.vocab, pair, rng, max_len)?.sentence());
    }
    Ok(out)
}

/// `n` items drawn without replacement (all of them, shuffled, if fewer).
fn draw<'a, T>(items: &'a [T], n: usize, rng: &mut Rng) -> Vec<&'a T> {
    let n = n.min(items.len());
    sample_indices(rng, items.len(), n)
        .into_iter()
        .map(|i| &items[i])
        .collect()
}

fn check_sources(config: &TrainingConfig, data: &TrainingData) -> Result<()> {
    if config.use_generated && data.pairs.is_empty() {
        return Err(Error::InvalidArgument(
            "the generated term needs at least one sense pair".into(),
        ));
    }
    Ok(())
}

/// Initializes the discriminator and trains it for `disc_pretrain_epochs`
/// over the labeled corpus. Each labeled batch is paired with an equally
/// sized unlabeled batch and a fresh generated batch, as enabled by config.
pub fn pretrain_discriminator(
    config: &TrainingConfig,
    data: &TrainingData,
    gen: &GeneratorParams,
) -> Result<(DiscriminatorParams, Vec<EpochRecord>)> {
    config.validate()?;
    if data.labeled.is_empty() {
        return Err(Error::InvalidArgument(
            "discriminator pretraining needs a non-empty labeled corpus".into(),
        ));
    }
    check_sources(config, data)?;
    let mut params = init_discriminator(config, data);
    let mut log = Vec::with_capacity(config.disc_pretrain_epochs);
    for epoch in 1..=config.disc_pretrain_epochs {
        let seed = rng::derive_seed(config.seed, &[PRETRAIN_DISCRIMINATOR, epoch as u64]);
        let mut rng = rng::seeded(rng::derive_seed(seed, &[0]));
        let mut acc = 0.0;
        let mut batches = 0;
        for labeled in batch_iter(&data.labeled, config.batch_size, seed)? {
            let unlabeled = if config.use_unlabeled {
                draw(&data.unlabeled, labeled.len(), &mut rng)
            } else {
                Vec::new()
            };
            let generated = if config.use_generated {
                generated_batch(gen, data, labeled.len(), config.max_len, &mut rng)?
            } else {
                Vec::new()
            };
            let generated: Vec<&TaggedSentence> = generated.iter().collect();
            let batch = DiscriminatorBatch {
                labeled: &labeled,
                unlabeled: &unlabeled,
                generated: &generated,
            };
            acc += discriminator_train_step(
                &mut params,
                &data.vocab,
                batch,
                config.lr,
                config.grad_clip,
            )?;
            batches += 1;
        }
        let labeled: Vec<&TaggedSentence> = data.labeled.iter().collect();
        let end_loss = discriminator_loss(
            &params,
            &data.vocab,
            DiscriminatorBatch {
                labeled: &labeled,
                ..Default::default()
            },
        )?
        .0;
        if !end_loss.is_finite() {
            return Err(Error::Diverged(format!(
                "discriminator loss is not finite after epoch {epoch}"
            )));
        }
        log::info!("discriminator epoch {epoch}: supervised loss {end_loss:.4}");
        log.push(EpochRecord {
            epoch,
            mean_batch_loss: acc / batches as f64,
            end_loss,
            batches,
        });
    }
    Ok((params, log))
}

/// Fraction of labeled sentences whose most probable real sense is the label.
pub fn sense_accuracy(
    disc: &DiscriminatorParams,
    vocab: &Vocabulary,
    sentences: &[TaggedSentence],
) -> Result<f64> {
    let mut correct = 0usize;
    let mut total = 0usize;
    for s in sentences {
        let Some(label) = &s.sense else { continue };
        let head = disc.head(&s.lemma)?;
        let dist = classify(disc, vocab, s)?;
        total += 1;
        if head.senses.get(dist.predicted_sense()) == Some(label) {
            correct += 1;
        }
    }
    if total == 0 {
        return Err(Error::InvalidArgument(
            "accuracy over no labeled sentences".into(),
        ));
    }
    Ok(correct as f64 / total as f64)
}

/// Model state between adversarial rounds; `round` counts completed rounds.
#[derive(Debug, Clone, PartialEq)]
pub struct AdversarialState {
    pub round: usize,
    pub generator: GeneratorParams,
    pub discriminator: DiscriminatorParams,
}

/// Runs round `state.round + 1`: generator policy-gradient steps on
/// discriminator rewards, then discriminator steps with fresh fakes.
pub fn adversarial_round(
    config: &TrainingConfig,
    data: &TrainingData,
    state: &mut AdversarialState,
) -> Result<RoundRecord> {
    if data.pairs.is_empty() {
        return Err(Error::InvalidArgument(
            "adversarial training needs at least one sense pair".into(),
        ));
    }
    let started = Instant::now();
    let round = state.round + 1;
    let mut rng = rng::stream(config.seed, &[ADVERSARIAL, round as u64]);

    let mut rewards = Vec::new();
    let mut gen_loss = 0.0;
    let mut samples = Vec::new();
    for _ in 0..config.gen_steps_per_round {
        let pair = &data.pairs[rng.gen_range(0..data.pairs.len())];
        let traces = (0..config.k_samples)
            .map(|_| {
                sample_sentence(
                    &state.generator,
                    &data.vocab,
                    pair,
                    &mut rng,
                    config.max_len,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let batch = batch_rewards(&state.discriminator, &data.vocab, traces, pair)?;
        for s in batch.samples.iter() {
            if samples.len() < config.log_samples {
                samples.push(format!(
                    "[{:.3}] {}",
                    s.reward,
                    data.vocab.surface_text(&s.trace.sentence())
                ));
            }
        }
        rewards.extend(batch.rewards());
        gen_loss += policy_gradient_step(
            &mut state.generator,
            &data.vocab,
            &batch,
            config.lr,
            config.reward_baseline,
            config.grad_clip,
        )?;
    }
    gen_loss /= config.gen_steps_per_round as f64;

    let mut disc_loss = None;
    if config.disc_steps_per_round > 0 {
        check_sources(config, data)?;
        let mut acc = 0.0;
        for _ in 0..config.disc_steps_per_round {
            let labeled = draw(&data.labeled, config.batch_size, &mut rng);
            let unlabeled = if config.use_unlabeled {
                draw(&data.unlabeled, config.batch_size, &mut rng)
            } else {
                Vec::new()
            };
            let generated = if config.use_generated {
                generated_batch(
                    &state.generator,
                    data,
                    config.batch_size,
                    config.max_len,
                    &mut rng,
                )?
            } else {
                Vec::new()
            };
            let generated: Vec<&TaggedSentence> = generated.iter().collect();
            let batch = DiscriminatorBatch {
                labeled: &labeled,
                unlabeled: &unlabeled,
                generated: &generated,
            };
            acc += discriminator_train_step(
                &mut state.discriminator,
                &data.vocab,
                batch,
                config.lr,
                config.grad_clip,
            )?;
        }
        disc_loss = Some(acc / config.disc_steps_per_round as f64);
    }

    let n = rewards.len() as f64;
    let record = RoundRecord {
        round,
        gen_loss,
        disc_loss,
        mean_reward: rewards.iter().sum::<f64>() / n,
        min_reward: rewards.iter().copied().fold(f64::INFINITY, f64::min),
        max_reward: rewards.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        samples,
        wall_clock_secs: config
            .record_wall_clock
            .then(|| started.elapsed().as_secs_f64()),
    };
    record.validate()?;
    state.round = round;
    Ok(record)
}

/// Runs rounds until `config.adversarial_rounds` are complete. `on_round`
/// sees each record and the state after it, e.g. to write checkpoints.
pub fn adversarial_train<F>(
    config: &TrainingConfig,
    data: &TrainingData,
    state: &mut AdversarialState,
    mut on_round: F,
) -> Result<TrainingLog>
where
    F: FnMut(&RoundRecord, &AdversarialState) -> Result<()>,
{
    config.validate()?;
    let mut log = TrainingLog::default();
    while state.round < config.adversarial_rounds {
        let record = adversarial_round(config, data, state)?;
        log::debug!(
            "round {}: reward {:.4} gen {:.4} disc {:?}",
            record.round,
            record.mean_reward,
            record.gen_loss,
            record.disc_loss
        );
        on_round(&record, state)?;
        log.push(record)?;
    }
    Ok(log)
}

/// Mean reward of `k` fresh samples per pair under the current models,
/// drawn from a dedicated stream so it does not disturb training streams.
pub fn measure_mean_reward(
    gen: &GeneratorParams,
    disc: &DiscriminatorParams,
    data: &TrainingData,
    k: usize,
    max_len: usize,
    seed: u64,
) -> Result<f64> {
    if data.pairs.is_empty() || k == 0 {
        return Err(Error::InvalidArgument(
            "reward measurement needs pairs and samples".into(),
        ));
    }
    let mut total = 0.0;
    let mut n = 0usize;
    for (i, pair) in data.pairs.iter().enumerate() {
        let mut rng = rng::stream(seed, &[i as u64]);
        let traces = (0..k)
            .map(|_| sample_sentence(gen, &data.vocab, pair, &mut rng, max_len))
            .collect::<Result<Vec<_>>>()?;
        let batch = batch_rewards(disc, &data.vocab, traces, pair)?;
        total += batch.rewards().sum::<f64>();
        n += batch.len();
    }
    Ok(total / n as f64)
}
