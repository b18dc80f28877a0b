use pungen::checkpoint::Checkpoint;
use pungen::corpus::TaggedText;
use pungen::rng;
use pungen::synthetic::ToyGrammar;
use pungen::trainer::{
    adversarial_round, adversarial_train, pretrain_discriminator, pretrain_generator,
    sense_accuracy, AdversarialState, TrainingConfig, TrainingData, TrainingLog,
};
use pungen::Error;

fn data(labeled: usize, unlabeled: usize, seed: u64) -> TrainingData {
    let g = ToyGrammar::default();
    let mut r = rng::seeded(seed);
    let l = g.labeled_corpus(labeled, &mut r);
    let u = g.unlabeled_corpus(unlabeled, &mut r);
    TrainingData::from_texts(g.inventory(), &l, &u, vec![g.pair()], 1).unwrap()
}

fn config() -> TrainingConfig {
    TrainingConfig {
        embedding_dim: 8,
        gen_hidden: 8,
        disc_hidden: 8,
        lr: 0.5,
        init_range: 0.3,
        max_len: 6,
        batch_size: 10,
        k_samples: 8,
        adversarial_rounds: 6,
        seed: 11,
        ..Default::default()
    }
}

fn pretrained(c: &TrainingConfig, d: &TrainingData) -> AdversarialState {
    let (generator, _) = pretrain_generator(c, d).unwrap();
    let (discriminator, _) = pretrain_discriminator(c, d, &generator).unwrap();
    AdversarialState {
        round: 0,
        generator,
        discriminator,
    }
}

#[test]
fn generator_pretraining_loss_does_not_rise() {
    let d = data(50, 0, 1);
    let c = TrainingConfig {
        gen_pretrain_epochs: 8,
        ..config()
    };
    let (_, log) = pretrain_generator(&c, &d).unwrap();
    assert_eq!(log.len(), 8);
    for w in log.windows(2) {
        assert!(
            w[1].end_loss <= w[0].end_loss * 1.05,
            "epoch {} loss {} after {}",
            w[1].epoch,
            w[1].end_loss,
            w[0].end_loss
        );
    }
    assert!(log.last().unwrap().end_loss < log[0].end_loss);
}

#[test]
fn generator_pretraining_is_bitwise_deterministic() {
    let d = data(50, 0, 2);
    let c = config();
    let save = || {
        let (p, log) = pretrain_generator(&c, &d).unwrap();
        (
            Checkpoint::generator(&p, &d.vocab, &d.inventory, None)
                .to_json()
                .unwrap(),
            log,
        )
    };
    assert_eq!(save(), save());
    let other = TrainingConfig {
        seed: 12,
        ..c.clone()
    };
    let (p, _) = pretrain_generator(&other, &d).unwrap();
    assert_ne!(
        Checkpoint::generator(&p, &d.vocab, &d.inventory, None)
            .to_json()
            .unwrap(),
        save().0
    );
}

#[test]
fn empty_corpora_rejected() {
    let g = ToyGrammar::default();
    let mut r = rng::seeded(3);
    let u = g.unlabeled_corpus(10, &mut r);
    let d = TrainingData::from_texts(g.inventory(), &[], &u, vec![g.pair()], 1).unwrap();
    assert!(matches!(
        pretrain_generator(&config(), &d),
        Err(Error::InvalidArgument(_))
    ));
    let gen = pretrained(&config(), &data(20, 5, 3)).generator;
    assert!(matches!(
        pretrain_discriminator(&config(), &d, &gen),
        Err(Error::InvalidArgument(_))
    ));
}

#[test]
fn zero_epoch_config_rejected() {
    let c = TrainingConfig {
        gen_pretrain_epochs: 0,
        ..config()
    };
    assert!(matches!(
        pretrain_generator(&c, &data(10, 0, 4)),
        Err(Error::Config(_))
    ));
}

#[test]
fn discriminator_beats_uniform_on_held_out_data() {
    let d = data(200, 100, 5);
    let c = TrainingConfig {
        disc_pretrain_epochs: 6,
        disc_hidden: 12,
        lr: 1.0,
        ..config()
    };
    let (gen, _) = pretrain_generator(&c, &d).unwrap();
    let (disc, log) = pretrain_discriminator(&c, &d, &gen).unwrap();
    assert_eq!(log.len(), 6);
    let held = data(100, 0, 6);
    let acc = sense_accuracy(&disc, &d.vocab, &held.labeled).unwrap();
    assert!(acc > 0.5, "accuracy {acc}");
}

#[test]
fn supervised_only_discriminator_ignores_generator() {
    let d = data(40, 20, 7);
    let c = TrainingConfig {
        use_unlabeled: false,
        use_generated: false,
        ..config()
    };
    let (gen_a, _) = pretrain_generator(&c, &d).unwrap();
    let gen_b = pretrain_generator(
        &TrainingConfig {
            seed: 99,
            ..c.clone()
        },
        &d,
    )
    .unwrap()
    .0;
    let (a, _) = pretrain_discriminator(&c, &d, &gen_a).unwrap();
    let (b, _) = pretrain_discriminator(&c, &d, &gen_b).unwrap();
    assert_eq!(a, b);
    let with_fakes = pretrain_discriminator(&config(), &d, &gen_a).unwrap().0;
    assert_ne!(a, with_fakes);
}

#[test]
fn frozen_discriminator_is_never_updated() {
    let d = data(40, 20, 8);
    let c = TrainingConfig {
        disc_steps_per_round: 0,
        ..config()
    };
    let mut state = pretrained(&c, &d);
    let before = state.clone();
    let log = adversarial_train(&c, &d, &mut state, |_, _| Ok(())).unwrap();
    assert_eq!(log.rounds.len(), 6);
    assert!(log.rounds.iter().all(|r| r.disc_loss.is_none()));
    let bits = |p: &pungen::discriminator::DiscriminatorParams| {
        Checkpoint::discriminator(p, &d.vocab, &d.inventory, None)
            .to_json()
            .unwrap()
    };
    assert_eq!(bits(&state.discriminator), bits(&before.discriminator));
    assert_ne!(state.generator, before.generator);
}

#[test]
fn rounds_are_logged_in_order_with_valid_values() {
    let d = data(40, 20, 9);
    let c = config();
    let mut state = pretrained(&c, &d);
    let log = adversarial_train(&c, &d, &mut state, |_, _| Ok(())).unwrap();
    let rounds: Vec<usize> = log.rounds.iter().map(|r| r.round).collect();
    assert_eq!(rounds, (1..=6).collect::<Vec<_>>());
    for r in &log.rounds {
        assert!((0.0..=1.0).contains(&r.mean_reward));
        assert!(r.min_reward <= r.mean_reward && r.mean_reward <= r.max_reward);
        assert!(r.gen_loss.is_finite() && r.disc_loss.unwrap().is_finite());
        assert_eq!(r.samples.len(), c.log_samples);
        assert!(r.wall_clock_secs.is_none());
    }
    let parsed = TrainingLog::parse_jsonl(&log.to_jsonl().unwrap()).unwrap();
    assert_eq!(parsed, log);
}

#[test]
fn resuming_from_a_checkpoint_matches_an_uninterrupted_run() {
    let d = data(40, 20, 10);
    let c = config();
    let start = pretrained(&c, &d);

    let mut full = start.clone();
    let full_log = adversarial_train(&c, &d, &mut full, |_, _| Ok(())).unwrap();

    let mut first = start.clone();
    let half = TrainingConfig {
        adversarial_rounds: 3,
        ..c.clone()
    };
    adversarial_train(&half, &d, &mut first, |_, _| Ok(())).unwrap();
    let g = Checkpoint::from_json(
        &Checkpoint::generator(&first.generator, &d.vocab, &d.inventory, Some(3))
            .to_json()
            .unwrap(),
    )
    .unwrap();
    let k = Checkpoint::from_json(
        &Checkpoint::discriminator(&first.discriminator, &d.vocab, &d.inventory, Some(3))
            .to_json()
            .unwrap(),
    )
    .unwrap();
    let mut resumed = AdversarialState {
        round: g.round.unwrap(),
        generator: g.to_generator().unwrap(),
        discriminator: k.to_discriminator().unwrap(),
    };
    let record = adversarial_round(&c, &d, &mut resumed).unwrap();
    assert_eq!(record, full_log.rounds[3]);
    let rest = adversarial_train(&c, &d, &mut resumed, |_, _| Ok(())).unwrap();
    assert_eq!(rest.rounds[..], full_log.rounds[4..]);
    assert_eq!(resumed, full);
}

#[test]
fn adversarial_training_needs_pairs() {
    let g = ToyGrammar::default();
    let mut r = rng::seeded(11);
    let l: Vec<TaggedText> = g.labeled_corpus(20, &mut r);
    let with_pairs = TrainingData::from_texts(g.inventory(), &l, &[], vec![g.pair()], 1).unwrap();
    let mut state = pretrained(&config(), &with_pairs);
    let no_pairs = TrainingData {
        pairs: Vec::new(),
        ..with_pairs
    };
    assert!(matches!(
        adversarial_train(&config(), &no_pairs, &mut state, |_, _| Ok(())),
        Err(Error::InvalidArgument(_))
    ));
}

#[test]
fn callback_sees_every_round() {
    let d = data(30, 10, 12);
    let c = TrainingConfig {
        adversarial_rounds: 4,
        ..config()
    };
    let mut state = pretrained(&c, &d);
    let mut seen = Vec::new();
    adversarial_train(&c, &d, &mut state, |rec, st| {
        assert_eq!(rec.round, st.round);
        seen.push(rec.round);
        Ok(())
    })
    .unwrap();
    assert_eq!(seen, vec![1, 2, 3, 4]);
}
