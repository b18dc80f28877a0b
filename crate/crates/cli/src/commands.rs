use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;

use pungen::checkpoint::{Checkpoint, ModelType};
use pungen::corpus::{
    all_sense_pairs, load_sense_inventory, load_sense_pairs, load_tagged_corpus_with,
    SenseInventory, SensePair, TaggedSentence, TaggedText, Vocabulary,
};
use pungen::discriminator::DiscriminatorParams;
use pungen::evalmetrics::{evaluate_run, self_comparison, DecodeMode, EvalConfig, EvalModels};
use pungen::generator::{generate as decode_sentence, Decode, GeneratorParams};
use pungen::rng;
use pungen::trainer::{
    adversarial_train, pretrain_discriminator, pretrain_generator, write_jsonl, AdversarialState,
    TrainingConfig, TrainingData, TrainingLog,
};

use crate::manifest::RunManifest;
use crate::{
    DecodeArg, EvaluateArgs, GenerateArgs, GlobalArgs, MissingPrerequisite, Mode, PrepareArgs,
    TrainArgs,
};

const GENERATE_STREAM: u64 = 0x6E4;

fn load_config(global: &GlobalArgs, manifest_inputs: &mut Vec<PathBuf>) -> Result<TrainingConfig> {
    let mut config = match &global.config {
        Some(path) => {
            manifest_inputs.push(path.clone());
            TrainingConfig::load(path)?
        }
        None => TrainingConfig::default(),
    };
    if let Some(seed) = global.seed {
        config.seed = seed;
    }
    config.validate()?;
    Ok(config)
}

fn start(
    step: &str,
    global: &GlobalArgs,
    args: Vec<String>,
) -> Result<(TrainingConfig, RunManifest)> {
    let mut inputs = Vec::new();
    let config = load_config(global, &mut inputs)?;
    let mut manifest = RunManifest::new(step, args, &config);
    for p in inputs {
        manifest.input(&p)?;
    }
    Ok((config, manifest))
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    create_parent(path)?;
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn require(path: &Path, what: &str) -> Result<()> {
    if !path.is_file() {
        return Err(MissingPrerequisite(format!("{what} not found at {}", path.display())).into());
    }
    Ok(())
}

/// Corpus record in the input format: the bare lemma at `target`.
#[derive(Serialize)]
struct SurfaceRecord<'a> {
    tokens: Vec<&'a str>,
    target: usize,
    lemma: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    sense: Option<&'a str>,
}

fn corpus_jsonl(texts: &[TaggedText]) -> Result<String> {
    let mut out = String::new();
    for t in texts {
        let mut tokens: Vec<&str> = t.tokens.iter().map(String::as_str).collect();
        tokens[t.target] = &t.lemma;
        let rec = SurfaceRecord {
            tokens,
            target: t.target,
            lemma: &t.lemma,
            sense: t.sense.as_deref(),
        };
        out.push_str(&serde_json::to_string(&rec)?);
        out.push('\n');
    }
    Ok(out)
}

fn pairs_jsonl(pairs: &[SensePair]) -> Result<String> {
    let mut out = String::new();
    for p in pairs {
        out.push_str(&serde_json::to_string(p)?);
        out.push('\n');
    }
    Ok(out)
}

struct DataFiles {
    dir: PathBuf,
}

impl DataFiles {
    fn new(out_dir: &Path) -> Self {
        DataFiles {
            dir: out_dir.join("data"),
        }
    }
    fn labeled(&self) -> PathBuf {
        self.dir.join("labeled.jsonl")
    }
    fn unlabeled(&self) -> PathBuf {
        self.dir.join("unlabeled.jsonl")
    }
    fn inventory(&self) -> PathBuf {
        self.dir.join("inventory.tsv")
    }
    fn pairs(&self) -> PathBuf {
        self.dir.join("pairs.jsonl")
    }
    fn vocab(&self) -> PathBuf {
        self.dir.join("vocab.txt")
    }
    fn all(&self) -> [PathBuf; 5] {
        [
            self.inventory(),
            self.labeled(),
            self.unlabeled(),
            self.pairs(),
            self.vocab(),
        ]
    }
}

pub fn prepare_data(global: &GlobalArgs, a: &PrepareArgs, args: Vec<String>) -> Result<()> {
    let (config, mut manifest) = start("prepare-data", global, args)?;
    let inventory = load_sense_inventory(&a.inventory)?;
    manifest.input(&a.inventory)?;
    let labeled = load_tagged_corpus_with(&a.labeled, &inventory, a.max_sentence_len)?;
    manifest.input(&a.labeled)?;
    let unlabeled = match &a.unlabeled {
        Some(p) => {
            manifest.input(p)?;
            load_tagged_corpus_with(p, &inventory, a.max_sentence_len)?
        }
        None => Vec::new(),
    };
    let pairs = match &a.pairs {
        Some(p) => {
            manifest.input(p)?;
            load_sense_pairs(p, &inventory)?
        }
        None => all_sense_pairs(&inventory),
    };
    if let Some(t) = labeled.iter().find(|t| t.sense.is_none()) {
        bail!(pungen::Error::InvalidArgument(format!(
            "{}: labeled corpus has a record for `{}` without a sense",
            a.labeled.display(),
            t.lemma
        )));
    }
    let data = TrainingData::from_texts(inventory, &labeled, &unlabeled, pairs, config.min_count)?;

    let files = DataFiles::new(&global.out_dir);
    write_file(&files.inventory(), &data.inventory.to_tsv())?;
    write_file(&files.labeled(), &corpus_jsonl(&labeled)?)?;
    write_file(&files.unlabeled(), &corpus_jsonl(&unlabeled)?)?;
    write_file(&files.pairs(), &pairs_jsonl(&data.pairs)?)?;
    let mut vocab_text = data.vocab.tokens().join("\n");
    vocab_text.push('\n');
    write_file(&files.vocab(), &vocab_text)?;
    for p in files.all() {
        manifest.output(&p)?;
    }
    manifest.write(&global.out_dir)?;

    let labeled_tokens: usize = labeled.iter().map(|t| t.tokens.len()).sum();
    println!("lemmas            {}", data.inventory.len());
    println!("sense pairs       {}", data.pairs.len());
    println!("labeled           {}", data.labeled.len());
    println!("unlabeled         {}", data.unlabeled.len());
    println!("labeled tokens    {labeled_tokens}");
    println!("vocabulary        {}", data.vocab.len());
    Ok(())
}

fn load_prepared(dir: &Path, manifest: &mut RunManifest) -> Result<TrainingData> {
    let files = DataFiles {
        dir: dir.to_path_buf(),
    };
    for p in files.all() {
        require(&p, "prepared data file (run prepare-data first)")?;
        manifest.input(&p)?;
    }
    let inventory = load_sense_inventory(files.inventory())?;
    let labeled = load_tagged_corpus_with(files.labeled(), &inventory, usize::MAX)?;
    let unlabeled = load_tagged_corpus_with(files.unlabeled(), &inventory, usize::MAX)?;
    let pairs = load_sense_pairs(files.pairs(), &inventory)?;
    let vocab_path = files.vocab();
    let tokens: Vec<String> = fs::read_to_string(&vocab_path)
        .with_context(|| format!("reading {}", vocab_path.display()))?
        .lines()
        .map(str::to_string)
        .collect();
    let vocab = Vocabulary::from_tokens(tokens, &inventory)?;
    Ok(TrainingData::encode(
        vocab, inventory, &labeled, &unlabeled, pairs,
    )?)
}

fn checkpoint_dir(out_dir: &Path) -> PathBuf {
    out_dir.join("checkpoints")
}

fn pretrained_generator_path(out_dir: &Path) -> PathBuf {
    checkpoint_dir(out_dir).join("generator-pretrained.json")
}

fn pretrained_discriminator_path(out_dir: &Path) -> PathBuf {
    checkpoint_dir(out_dir).join("discriminator-pretrained.json")
}

fn load_checkpoint(path: &Path, kind: ModelType, what: &str) -> Result<Checkpoint> {
    require(path, what)?;
    let ckpt = Checkpoint::load(path)?;
    if ckpt.model_type != kind {
        bail!(pungen::Error::Checkpoint(format!(
            "{} holds a {:?} model, expected {:?}",
            path.display(),
            ckpt.model_type,
            kind
        )));
    }
    Ok(ckpt)
}

/// Loads a checkpoint that must match the prepared vocabulary.
fn load_matching(
    path: &Path,
    kind: ModelType,
    what: &str,
    data: &TrainingData,
) -> Result<Checkpoint> {
    let ckpt = load_checkpoint(path, kind, what)?;
    if ckpt.vocabulary != data.vocab.tokens() || ckpt.inventory != data.inventory {
        bail!(pungen::Error::Checkpoint(format!(
            "{} was trained on a different vocabulary or inventory",
            path.display()
        )));
    }
    Ok(ckpt)
}

fn save(ckpt: &Checkpoint, path: &Path, manifest: &mut RunManifest) -> Result<()> {
    create_parent(path)?;
    ckpt.save(path)?;
    manifest.output(path)?;
    Ok(())
}

pub fn train(global: &GlobalArgs, a: &TrainArgs, args: Vec<String>) -> Result<()> {
    let mode = a.mode;
    let (mut config, mut manifest) = start(&format!("train-{mode}"), global, args)?;
    let out = global.out_dir.as_path();
    let data = load_prepared(&DataFiles::new(out).dir, &mut manifest)?;
    let log_path = out.join("logs").join(format!("{mode}.jsonl"));
    if a.resume_round.is_some() && matches!(mode, Mode::PretrainGen | Mode::PretrainDisc) {
        bail!(pungen::Error::InvalidArgument(
            "--resume-round applies only to gan modes".into()
        ));
    }

    match mode {
        Mode::PretrainGen => {
            let (params, log) = pretrain_generator(&config, &data)?;
            create_parent(&log_path)?;
            write_jsonl(&log_path, &log)?;
            manifest.output(&log_path)?;
            let ckpt = Checkpoint::generator(&params, &data.vocab, &data.inventory, None);
            save(&ckpt, &pretrained_generator_path(out), &mut manifest)?;
            if let Some(last) = log.last() {
                log::info!(
                    "generator pretraining done: epoch {} loss {:.4}",
                    last.epoch,
                    last.end_loss
                );
            }
        }
        Mode::PretrainDisc => {
            let gen_path = pretrained_generator_path(out);
            let gen = load_matching(
                &gen_path,
                ModelType::Generator,
                "pretrained generator",
                &data,
            )?;
            manifest.input(&gen_path)?;
            let (params, log) = pretrain_discriminator(&config, &data, &gen.to_generator()?)?;
            create_parent(&log_path)?;
            write_jsonl(&log_path, &log)?;
            manifest.output(&log_path)?;
            let ckpt = Checkpoint::discriminator(&params, &data.vocab, &data.inventory, None);
            save(&ckpt, &pretrained_discriminator_path(out), &mut manifest)?;
            if let Some(last) = log.last() {
                log::info!(
                    "discriminator pretraining done: epoch {} loss {:.4}",
                    last.epoch,
                    last.end_loss
                );
            }
        }
        Mode::Gan | Mode::GanFrozenDisc => {
            if mode == Mode::GanFrozenDisc {
                config.disc_steps_per_round = 0;
            }
            let dir = checkpoint_dir(out).join(mode.to_string());
            let round_path = |kind: &str, r: usize| dir.join(format!("{kind}-round-{r:06}.json"));
            let (gen_path, disc_path, mut previous) = match a.resume_round {
                None => (
                    pretrained_generator_path(out),
                    pretrained_discriminator_path(out),
                    TrainingLog::default(),
                ),
                Some(r) => {
                    let text = fs::read_to_string(&log_path).map_err(|_| {
                        MissingPrerequisite(format!("training log {}", log_path.display()))
                    })?;
                    let mut previous = TrainingLog::default();
                    for rec in TrainingLog::parse_jsonl(&text)?
                        .rounds
                        .into_iter()
                        .filter(|x| x.round <= r)
                    {
                        previous.push(rec)?;
                    }
                    (
                        round_path("generator", r),
                        round_path("discriminator", r),
                        previous,
                    )
                }
            };
            let gen = load_matching(
                &gen_path,
                ModelType::Generator,
                "generator checkpoint",
                &data,
            )?;
            let disc = load_matching(
                &disc_path,
                ModelType::Discriminator,
                "discriminator checkpoint",
                &data,
            )?;
            manifest.input(&gen_path)?;
            manifest.input(&disc_path)?;
            let mut state = AdversarialState {
                round: a.resume_round.unwrap_or(0),
                generator: gen.to_generator()?,
                discriminator: disc.to_discriminator()?,
            };
            let mut written = Vec::new();
            let log = adversarial_train(&config, &data, &mut state, |rec, st| {
                let last = rec.round == config.adversarial_rounds;
                let periodic =
                    config.checkpoint_every > 0 && rec.round % config.checkpoint_every == 0;
                if last || periodic {
                    for (kind, ckpt) in [
                        (
                            "generator",
                            Checkpoint::generator(
                                &st.generator,
                                &data.vocab,
                                &data.inventory,
                                Some(rec.round),
                            ),
                        ),
                        (
                            "discriminator",
                            Checkpoint::discriminator(
                                &st.discriminator,
                                &data.vocab,
                                &data.inventory,
                                Some(rec.round),
                            ),
                        ),
                    ] {
                        let path = round_path(kind, rec.round);
                        create_parent(&path)
                            .map_err(|e| pungen::Error::Checkpoint(format!("{e:#}")))?;
                        ckpt.save(&path)?;
                        written.push(path);
                    }
                }
                if let Some(s) = rec.samples.first() {
                    log::info!("round {} reward {:.4}: {s}", rec.round, rec.mean_reward);
                }
                Ok(())
            })?;
            for p in &written {
                manifest.output(p)?;
            }
            for rec in log.rounds {
                previous.push(rec)?;
            }
            write_file(&log_path, &previous.to_jsonl()?)?;
            manifest.output(&log_path)?;
            let r = state.round;
            save(
                &Checkpoint::generator(&state.generator, &data.vocab, &data.inventory, Some(r)),
                &dir.join("generator-final.json"),
                &mut manifest,
            )?;
            save(
                &Checkpoint::discriminator(
                    &state.discriminator,
                    &data.vocab,
                    &data.inventory,
                    Some(r),
                ),
                &dir.join("discriminator-final.json"),
                &mut manifest,
            )?;
            log::info!("{mode} finished after {r} rounds");
        }
    }
    manifest.write(out)?;
    Ok(())
}

fn decode_mode(d: DecodeArg) -> DecodeMode {
    match d {
        DecodeArg::Sample => DecodeMode::Sample,
        DecodeArg::Greedy => DecodeMode::Greedy,
    }
}

fn emit(output: Option<&Path>, text: &str, manifest: &mut RunManifest) -> Result<()> {
    match output {
        Some(path) => {
            write_file(path, text)?;
            manifest.output(path)?;
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
        }
    }
    Ok(())
}

/// Loads a generator checkpoint with its vocabulary and inventory.
fn load_generator(path: &Path) -> Result<(GeneratorParams, Vocabulary, SenseInventory)> {
    let ckpt = load_checkpoint(path, ModelType::Generator, "generator checkpoint")?;
    Ok((ckpt.to_generator()?, ckpt.vocab()?, ckpt.inventory))
}

pub fn generate(global: &GlobalArgs, a: &GenerateArgs, args: Vec<String>) -> Result<()> {
    let (config, mut manifest) = start("generate", global, args)?;
    let (params, vocab, inventory) = load_generator(&a.checkpoint)?;
    manifest.input(&a.checkpoint)?;
    let pairs = load_sense_pairs(&a.pairs, &inventory)?;
    manifest.input(&a.pairs)?;
    let max_len = a.max_len.unwrap_or(config.max_len);

    let mut text = String::new();
    for (j, pair) in pairs.iter().enumerate() {
        for i in 0..a.count {
            let mut r = rng::stream(config.seed, &[GENERATE_STREAM, j as u64, i as u64]);
            let decode = match a.decode {
                DecodeArg::Sample => Decode::Sample(&mut r),
                DecodeArg::Greedy => Decode::Greedy,
            };
            let trace = decode_sentence(&params, &vocab, pair, decode, max_len)?;
            let sentence = vocab.surface_text(&trace.sentence());
            text.push_str(&format!(
                "{}\t{}\t{}\t{:.6}\t{}\n",
                pair.lemma, pair.s1, pair.s2, trace.logprob, sentence
            ));
        }
    }
    emit(a.output.as_deref(), &text, &mut manifest)?;
    manifest.write(&global.out_dir)?;
    Ok(())
}

pub fn evaluate(global: &GlobalArgs, a: &EvaluateArgs, args: Vec<String>) -> Result<()> {
    let (config, mut manifest) = start("evaluate", global, args)?;
    let (params, vocab, inventory) = load_generator(&a.checkpoint)?;
    manifest.input(&a.checkpoint)?;
    let lm_path = a
        .scoring_lm
        .clone()
        .unwrap_or_else(|| pretrained_generator_path(&global.out_dir));
    let (lm, lm_vocab, _) = load_generator(&lm_path)?;
    manifest.input(&lm_path)?;
    if lm_vocab != vocab {
        bail!(pungen::Error::Checkpoint(format!(
            "scoring model {} uses a different vocabulary",
            lm_path.display()
        )));
    }
    let disc: Option<DiscriminatorParams> = match &a.discriminator {
        Some(p) => {
            let ckpt = load_checkpoint(p, ModelType::Discriminator, "discriminator checkpoint")?;
            if ckpt.vocabulary != vocab.tokens() {
                bail!(pungen::Error::Checkpoint(format!(
                    "{} uses a different vocabulary",
                    p.display()
                )));
            }
            manifest.input(p)?;
            Some(ckpt.to_discriminator()?)
        }
        None => None,
    };
    let pairs = load_sense_pairs(&a.pairs, &inventory)?;
    manifest.input(&a.pairs)?;
    let sample: Vec<TaggedSentence> =
        load_tagged_corpus_with(&a.training_sample, &inventory, usize::MAX)?
            .iter()
            .map(|t| {
                let s = vocab.encode(t);
                vocab.validate(&s, &inventory).map(|()| s)
            })
            .collect::<pungen::Result<_>>()?;
    manifest.input(&a.training_sample)?;

    let report = if a.self_compare {
        self_comparison(&lm, &vocab, &sample)?
    } else {
        let models = EvalModels {
            generator: &params,
            scoring_lm: &lm,
            discriminator: disc.as_ref(),
            vocab: &vocab,
        };
        let eval = EvalConfig {
            count: a.count,
            seed: config.seed,
            max_len: a.max_len.unwrap_or(config.max_len),
            decode: decode_mode(a.decode),
        };
        evaluate_run(&models, &pairs, &sample, &eval)?
    };
    let mut json = serde_json::to_string_pretty(&report)?;
    json.push('\n');
    emit(a.output.as_deref(), &json, &mut manifest)?;
    if a.table {
        eprint!("{}", report.to_table());
    }
    manifest.write(&global.out_dir)?;
    Ok(())
}
