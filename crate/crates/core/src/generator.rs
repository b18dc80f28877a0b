//! Constrained dual-sense language model.
//!
//! A sentence is generated outward from the pun word. The backward LSTM reads
//! the pun word and emits the preceding words right to left until `<bos>`,
//! then the forward LSTM reads `<bos>`, the prefix and the pun word and emits
//! the following words until `<eos>`. Each emission is drawn from the equal
//! mixture of two softmaxes that share the output projection: one computed on
//! the path where the pun word is embedded as `lemma#s1`, one where it is
//! `lemma#s2`. All other inputs are identical on both paths.
//!
//! Every emission is restricted to ordinary words: sense-tagged tokens, the
//! bare lemma, and the terminator of the opposite direction are masked out
//! before the softmax. This keeps the pun word present exactly once.
//!
//! Under a length budget `L` at most `L / 2` words precede the pun word and the
//! sentence holds at most `L` words; a side that fills its budget stops without
//! emitting its terminator. [`sentence_logprob`] scores exactly this process,
//! so `exp(sentence_logprob)` is a distribution over the bounded sentence space.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{SensePair, TaggedSentence, TokenId, Vocabulary, BOS, EOS};
use crate::error::{Error, Result};
use crate::numerics::{
    masked_softmax, sgd_step, LstmCellParams, LstmIds, LstmNodes, LstmState, Matrix, NodeId,
    ParamGrads, ParamId, Parameters, Tape,
};

const EMBEDDING: ParamId = ParamId(0);
const FORWARD: LstmIds = LstmIds {
    w_ih: ParamId(1),
    w_hh: ParamId(2),
    bias: ParamId(3),
};
const BACKWARD: LstmIds = LstmIds {
    w_ih: ParamId(4),
    w_hh: ParamId(5),
    bias: ParamId(6),
};
const OUT_W: ParamId = ParamId(7);
const OUT_B: ParamId = ParamId(8);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorShape {
    pub vocab_size: usize,
    pub embedding_dim: usize,
    pub hidden: usize,
}

/// Embeddings shared by both directions, one LSTM per direction, and one
/// output projection shared by both directions and both sense paths.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorParams {
    pub embedding: Matrix,
    pub forward: LstmCellParams,
    pub backward: LstmCellParams,
    pub out_w: Matrix,
    pub out_b: Matrix,
}

impl Parameters for GeneratorParams {
    fn named_tensors(&self) -> Vec<(String, &Matrix)> {
        vec![
            ("embedding".into(), &self.embedding),
            ("forward.w_ih".into(), &self.forward.w_ih),
            ("forward.w_hh".into(), &self.forward.w_hh),
            ("forward.bias".into(), &self.forward.bias),
            ("backward.w_ih".into(), &self.backward.w_ih),
            ("backward.w_hh".into(), &self.backward.w_hh),
            ("backward.bias".into(), &self.backward.bias),
            ("out.w".into(), &self.out_w),
            ("out.b".into(), &self.out_b),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        vec![
            &mut self.embedding,
            &mut self.forward.w_ih,
            &mut self.forward.w_hh,
            &mut self.forward.bias,
            &mut self.backward.w_ih,
            &mut self.backward.w_hh,
            &mut self.backward.bias,
            &mut self.out_w,
            &mut self.out_b,
        ]
    }
}

impl GeneratorParams {
    pub fn zeros(shape: GeneratorShape) -> Self {
        let GeneratorShape {
            vocab_size: v,
            embedding_dim: d,
            hidden: h,
        } = shape;
        GeneratorParams {
            embedding: Matrix::zeros(v, d),
            forward: LstmCellParams::zeros(d, h),
            backward: LstmCellParams::zeros(d, h),
            out_w: Matrix::zeros(v, h),
            out_b: Matrix::zeros(v, 1),
        }
    }

    /// Every weight drawn from `U[-init_range, init_range]`.
    pub fn init<R: Rng + ?Sized>(shape: GeneratorShape, init_range: f64, rng: &mut R) -> Self {
        let mut p = Self::zeros(shape);
        for m in p.tensors_mut() {
            crate::numerics::fill_uniform(m, init_range, rng);
        }
        p
    }

    pub fn shape(&self) -> GeneratorShape {
        GeneratorShape {
            vocab_size: self.embedding.rows(),
            embedding_dim: self.embedding.cols(),
            hidden: self.forward.hidden(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let GeneratorShape {
            vocab_size: v,
            embedding_dim: d,
            hidden: h,
        } = self.shape();
        self.forward.validate()?;
        self.backward.validate()?;
        let ok = self.forward.input() == d
            && self.backward.input() == d
            && self.backward.hidden() == h
            && self.out_w.shape() == (v, h)
            && self.out_b.shape() == (v, 1);
        if !ok {
            return Err(Error::InvalidShape("inconsistent generator tensors".into()));
        }
        Ok(())
    }

    fn embed(&self, tok: TokenId) -> Result<&[f64]> {
        if tok.index() >= self.embedding.rows() {
            return Err(Error::InvalidArgument(format!(
                "token id {} out of range",
                tok.0
            )));
        }
        Ok(self.embedding.row(tok.index()))
    }

    fn logits(&self, h: &[f64]) -> Result<Vec<f64>> {
        let mut z = self.out_w.matvec(h)?;
        for (zi, bi) in z.iter_mut().zip(self.out_b.data()) {
            *zi += bi;
        }
        Ok(z)
    }
}

/// Which side of the pun word is being generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Backward,
    Forward,
}

/// Tokens an emission step may produce for a given pun lemma.
#[derive(Debug, Clone)]
pub struct StepMasks {
    backward: Vec<bool>,
    forward: Vec<bool>,
}

impl StepMasks {
    pub fn new(vocab: &Vocabulary, lemma: &str) -> Result<Self> {
        let surface = vocab.surface_id(lemma)?;
        let base: Vec<bool> = (0..vocab.len())
            .map(|i| {
                let id = TokenId(i as u32);
                id != surface && !vocab.is_sense_token(id)
            })
            .collect();
        let mut backward = base.clone();
        backward[EOS.index()] = false;
        let mut forward = base;
        forward[BOS.index()] = false;
        Ok(StepMasks { backward, forward })
    }

    pub fn get(&self, dir: Direction) -> &[bool] {
        match dir {
            Direction::Backward => &self.backward,
            Direction::Forward => &self.forward,
        }
    }
}

/// Length limit of the decoding process being scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Budget {
    /// Both terminators are always emitted (ordinary LM likelihood).
    Unbounded,
    /// At most `L / 2` words before the pun word and `L` words in total.
    MaxLen(usize),
}

/// `[f(W h1 + b) + f(W h2 + b)] / 2` where `f` is the softmax, optionally
/// restricted to the tokens allowed by `mask`.
pub fn mixture_step(
    params: &GeneratorParams,
    h1: &[f64],
    h2: &[f64],
    mask: Option<&[bool]>,
) -> Result<Vec<f64>> {
    let p1 = masked_softmax(&params.logits(h1)?, mask)?;
    let p2 = masked_softmax(&params.logits(h2)?, mask)?;
    Ok(p1.iter().zip(&p2).map(|(a, b)| 0.5 * (a + b)).collect())
}

/// The two sense-tagged pun tokens for `pair`.
fn pun_inputs(vocab: &Vocabulary, pair: &SensePair) -> Result<(TokenId, TokenId)> {
    Ok((
        vocab.sense_id(&pair.lemma, &pair.s1)?,
        vocab.sense_id(&pair.lemma, &pair.s2)?,
    ))
}

/// Emission targets of the decoding process that yields `sentence`.
#[derive(Debug)]
struct Plan {
    /// `<bos>`, then the words before the pun word.
    prefix: Vec<TokenId>,
    /// Preceding words right to left, then `<bos>` if emitted.
    backward_targets: Vec<TokenId>,
    /// Following words, then `<eos>` if emitted.
    forward_targets: Vec<TokenId>,
}

impl Plan {
    fn new(sentence: &TaggedSentence, budget: Budget, masks: &StepMasks) -> Result<Plan> {
        let n = sentence.tokens.len();
        let p = sentence.target;
        if p >= n {
            return Err(Error::InvalidArgument("target outside sentence".into()));
        }
        let (emit_bos, emit_eos) = match budget {
            Budget::Unbounded => (true, true),
            Budget::MaxLen(max_len) => {
                if max_len == 0 {
                    return Err(Error::InvalidArgument("max_len must be at least 1".into()));
                }
                let back = max_len / 2;
                if p > back || n > max_len {
                    return Err(Error::InvalidArgument(format!(
                        "sentence of {n} words with {p} before the pun word exceeds budget {max_len}"
                    )));
                }
                (p < back, n < max_len)
            }
        };
        let mut backward_targets: Vec<TokenId> =
            sentence.tokens[..p].iter().rev().copied().collect();
        if emit_bos {
            backward_targets.push(BOS);
        }
        let mut forward_targets = sentence.tokens[p + 1..].to_vec();
        if emit_eos {
            forward_targets.push(EOS);
        }
        for (targets, dir) in [
            (&backward_targets, Direction::Backward),
            (&forward_targets, Direction::Forward),
        ] {
            let mask = masks.get(dir);
            if let Some(t) = targets
                .iter()
                .find(|t| !mask.get(t.index()).copied().unwrap_or(false))
            {
                return Err(Error::InvalidArgument(format!(
                    "token id {} cannot be emitted next to the pun word `{}`",
                    t.0, sentence.lemma
                )));
            }
        }
        let mut prefix = vec![BOS];
        prefix.extend_from_slice(&sentence.tokens[..p]);
        Ok(Plan {
            prefix,
            backward_targets,
            forward_targets,
        })
    }
}

fn check_pair(vocab: &Vocabulary, sentence: &TaggedSentence, pair: &SensePair) -> Result<()> {
    if sentence.lemma != pair.lemma {
        return Err(Error::InvalidArgument(format!(
            "sentence lemma `{}` does not match pair lemma `{}`",
            sentence.lemma, pair.lemma
        )));
    }
    let at_target = sentence.tokens.get(sentence.target);
    if !at_target.is_some_and(|&t| vocab.is_lemma_form(t, &pair.lemma)) {
        return Err(Error::InvalidArgument(format!(
            "no form of `{}` at the target position",
            pair.lemma
        )));
    }
    Ok(())
}

/// Per-emission mixture log-probabilities of `sentence` under `pair`, in
/// emission order (backward side first).
pub fn step_logprobs(
    params: &GeneratorParams,
    vocab: &Vocabulary,
    sentence: &TaggedSentence,
    pair: &SensePair,
    budget: Budget,
) -> Result<Vec<f64>> {
    check_pair(vocab, sentence, pair)?;
    let masks = StepMasks::new(vocab, &pair.lemma)?;
    let plan = Plan::new(sentence, budget, &masks)?;
    let (pun1, pun2) = pun_inputs(vocab, pair)?;
    let mut out = Vec::with_capacity(plan.backward_targets.len() + plan.forward_targets.len());

    let hidden = params.backward.hidden();
    let (mut s1, mut s2) = (LstmState::zeros(hidden), LstmState::zeros(hidden));
    let (mut in1, mut in2) = (pun1, pun2);
    for &t in &plan.backward_targets {
        s1 = params.backward.step(params.embed(in1)?, &s1)?;
        s2 = params.backward.step(params.embed(in2)?, &s2)?;
        let p = mixture_step(params, &s1.h, &s2.h, Some(masks.get(Direction::Backward)))?;
        out.push(p[t.index()].ln());
        (in1, in2) = (t, t);
    }

    let mut shared = LstmState::zeros(params.forward.hidden());
    for &t in &plan.prefix {
        shared = params.forward.step(params.embed(t)?, &shared)?;
    }
    let mut s1 = params.forward.step(params.embed(pun1)?, &shared)?;
    let mut s2 = params.forward.step(params.embed(pun2)?, &shared)?;
    for (i, &t) in plan.forward_targets.iter().enumerate() {
        if i > 0 {
            let prev = plan.forward_targets[i - 1];
            s1 = params.forward.step(params.embed(prev)?, &s1)?;
            s2 = params.forward.step(params.embed(prev)?, &s2)?;
        }
        let p = mixture_step(params, &s1.h, &s2.h, Some(masks.get(Direction::Forward)))?;
        out.push(p[t.index()].ln());
    }
    Ok(out)
}

/// `log G(x | s1, s2)`: sum of per-emission mixture log-probabilities.
pub fn sentence_logprob(
    params: &GeneratorParams,
    vocab: &Vocabulary,
    sentence: &TaggedSentence,
    pair: &SensePair,
    budget: Budget,
) -> Result<f64> {
    Ok(step_logprobs(params, vocab, sentence, pair, budget)?
        .iter()
        .sum())
}

/// Whether `sentence` can be scored at all (no masked word next to the pun).
pub fn supports(vocab: &Vocabulary, sentence: &TaggedSentence, budget: Budget) -> bool {
    StepMasks::new(vocab, &sentence.lemma)
        .and_then(|m| Plan::new(sentence, budget, &m))
        .is_ok()
}

/// Records `log G(x | s1, s2)` on `tape` and returns the scalar node.
pub fn sentence_logprob_on_tape(
    params: &GeneratorParams,
    tape: &mut Tape,
    vocab: &Vocabulary,
    sentence: &TaggedSentence,
    pair: &SensePair,
    budget: Budget,
) -> Result<NodeId> {
    check_pair(vocab, sentence, pair)?;
    let masks = StepMasks::new(vocab, &pair.lemma)?;
    let plan = Plan::new(sentence, budget, &masks)?;
    let (pun1, pun2) = pun_inputs(vocab, pair)?;
    let mut terms = Vec::with_capacity(plan.backward_targets.len() + plan.forward_targets.len());

    let embed =
        |tape: &mut Tape, t: TokenId| tape.param_row(EMBEDDING, &params.embedding, t.index());
    let w = tape.param(OUT_W, &params.out_w);
    let b = tape.param(OUT_B, &params.out_b);
    let emit = |tape: &mut Tape,
                h1: NodeId,
                h2: NodeId,
                target: TokenId,
                dir: Direction|
     -> Result<NodeId> {
        let mask = Some(masks.get(dir));
        let mut picks = [h1, h2];
        for slot in &mut picks {
            let z = tape.matmul(w, *slot)?;
            let z = tape.add(z, b)?;
            let p = tape.softmax(z, mask)?;
            *slot = tape.pick(p, target.index())?;
        }
        let total = tape.add(picks[0], picks[1])?;
        let mean = tape.scale(total, 0.5);
        Ok(tape.ln(mean))
    };

    let zero = params.backward.zero_state_on_tape(tape);
    let (mut s1, mut s2) = (zero, zero);
    let (mut in1, mut in2) = (embed(tape, pun1)?, embed(tape, pun2)?);
    for &t in &plan.backward_targets {
        s1 = params.backward.step_on_tape(tape, BACKWARD, in1, s1)?;
        s2 = params.backward.step_on_tape(tape, BACKWARD, in2, s2)?;
        terms.push(emit(tape, s1.h, s2.h, t, Direction::Backward)?);
        let x = embed(tape, t)?;
        (in1, in2) = (x, x);
    }

    let mut shared: LstmNodes = params.forward.zero_state_on_tape(tape);
    for &t in &plan.prefix {
        let x = embed(tape, t)?;
        shared = params.forward.step_on_tape(tape, FORWARD, x, shared)?;
    }
    let x1 = embed(tape, pun1)?;
    let x2 = embed(tape, pun2)?;
    let mut s1 = params.forward.step_on_tape(tape, FORWARD, x1, shared)?;
    let mut s2 = params.forward.step_on_tape(tape, FORWARD, x2, shared)?;
    for (i, &t) in plan.forward_targets.iter().enumerate() {
        if i > 0 {
            let x = embed(tape, plan.forward_targets[i - 1])?;
            s1 = params.forward.step_on_tape(tape, FORWARD, x, s1)?;
            s2 = params.forward.step_on_tape(tape, FORWARD, x, s2)?;
        }
        terms.push(emit(tape, s1.h, s2.h, t, Direction::Forward)?);
    }
    tape.add_n(&terms)
}

/// A generated sentence with the log-probabilities of its emissions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationTrace {
    /// Surface tokens; the pun position holds the bare lemma.
    pub tokens: Vec<TokenId>,
    pub target: usize,
    pub pair: SensePair,
    /// `log G(x_t | x_<t)` per emission, backward side first.
    pub step_logprobs: Vec<f64>,
    pub logprob: f64,
    /// Length budget the sentence was generated under.
    pub max_len: usize,
}

impl GenerationTrace {
    pub fn sentence(&self) -> TaggedSentence {
        TaggedSentence {
            tokens: self.tokens.clone(),
            target: self.target,
            lemma: self.pair.lemma.clone(),
            sense: None,
        }
    }

    pub fn budget(&self) -> Budget {
        Budget::MaxLen(self.max_len)
    }
}

/// How each emission picks its token.
pub enum Decode<'r, R: Rng + ?Sized> {
    /// Multinomial draw at temperature 1.
    Sample(&'r mut R),
    /// Most probable token (lowest id on ties).
    Greedy,
}

fn choose<R: Rng + ?Sized>(probs: &[f64], decode: &mut Decode<'_, R>) -> TokenId {
    match decode {
        Decode::Greedy => {
            let mut best = 0;
            for (i, &p) in probs.iter().enumerate() {
                if p > probs[best] {
                    best = i;
                }
            }
            TokenId(best as u32)
        }
        Decode::Sample(rng) => {
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut last = 0;
            for (i, &p) in probs.iter().enumerate() {
                if p > 0.0 {
                    acc += p;
                    last = i;
                    if u < acc {
                        return TokenId(i as u32);
                    }
                }
            }
            TokenId(last as u32)
        }
    }
}

/// Draws a sentence for `pair` by constrained backward-then-forward decoding.
pub fn sample_sentence<R: Rng + ?Sized>(
    params: &GeneratorParams,
    vocab: &Vocabulary,
    pair: &SensePair,
    rng: &mut R,
    max_len: usize,
) -> Result<GenerationTrace> {
    generate(params, vocab, pair, Decode::Sample(rng), max_len)
}

pub fn generate<R: Rng + ?Sized>(
    params: &GeneratorParams,
    vocab: &Vocabulary,
    pair: &SensePair,
    mut decode: Decode<'_, R>,
    max_len: usize,
) -> Result<GenerationTrace> {
    if max_len == 0 {
        return Err(Error::InvalidArgument("max_len must be at least 1".into()));
    }
    let masks = StepMasks::new(vocab, &pair.lemma)?;
    let (pun1, pun2) = pun_inputs(vocab, pair)?;
    let surface = vocab.surface_id(&pair.lemma)?;
    let mut logps = Vec::new();

    let hidden = params.backward.hidden();
    let (mut s1, mut s2) = (LstmState::zeros(hidden), LstmState::zeros(hidden));
    let (mut in1, mut in2) = (pun1, pun2);
    let mut preceding = Vec::new();
    for _ in 0..max_len / 2 {
        s1 = params.backward.step(params.embed(in1)?, &s1)?;
        s2 = params.backward.step(params.embed(in2)?, &s2)?;
        let p = mixture_step(params, &s1.h, &s2.h, Some(masks.get(Direction::Backward)))?;
        let t = choose(&p, &mut decode);
        logps.push(p[t.index()].ln());
        if t == BOS {
            break;
        }
        preceding.push(t);
        (in1, in2) = (t, t);
    }
    preceding.reverse();

    let mut shared = LstmState::zeros(params.forward.hidden());
    for &t in std::iter::once(&BOS).chain(&preceding) {
        shared = params.forward.step(params.embed(t)?, &shared)?;
    }
    let mut s1 = params.forward.step(params.embed(pun1)?, &shared)?;
    let mut s2 = params.forward.step(params.embed(pun2)?, &shared)?;
    let mut tokens = preceding;
    let target = tokens.len();
    tokens.push(surface);
    while tokens.len() < max_len {
        let p = mixture_step(params, &s1.h, &s2.h, Some(masks.get(Direction::Forward)))?;
        let t = choose(&p, &mut decode);
        logps.push(p[t.index()].ln());
        if t == EOS {
            break;
        }
        tokens.push(t);
        s1 = params.forward.step(params.embed(t)?, &s1)?;
        s2 = params.forward.step(params.embed(t)?, &s2)?;
    }
    Ok(GenerationTrace {
        tokens,
        target,
        pair: pair.clone(),
        logprob: logps.iter().sum(),
        step_logprobs: logps,
        max_len,
    })
}

fn single_sense_pair(sentence: &TaggedSentence) -> Result<SensePair> {
    let sense = sentence.sense.as_ref().ok_or_else(|| {
        Error::InvalidArgument("MLE pretraining needs sense-labeled sentences".into())
    })?;
    Ok(SensePair::single(&sentence.lemma, sense))
}

/// Mean negative log-likelihood of labeled sentences (both mixture paths
/// use the labeled sense) and its gradient.
pub fn mle_loss(
    params: &GeneratorParams,
    vocab: &Vocabulary,
    batch: &[&TaggedSentence],
) -> Result<(f64, ParamGrads)> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let mut tape = Tape::new();
    let mut terms = Vec::with_capacity(batch.len());
    for s in batch {
        let pair = single_sense_pair(s)?;
        terms.push(sentence_logprob_on_tape(
            params,
            &mut tape,
            vocab,
            s,
            &pair,
            Budget::Unbounded,
        )?);
    }
    let total = tape.add_n(&terms)?;
    let loss = tape.scale(total, -1.0 / batch.len() as f64);
    let value = tape.value(loss).item()?;
    Ok((value, tape.param_grads(loss, &params.tensor_shapes())?))
}

/// One SGD step on the MLE loss. Returns the loss before the update.
pub fn mle_pretrain_step(
    params: &mut GeneratorParams,
    vocab: &Vocabulary,
    batch: &[&TaggedSentence],
    lr: f64,
    grad_clip: Option<f64>,
) -> Result<f64> {
    let (loss, mut grads) = mle_loss(params, vocab, batch)?;
    if let Some(c) = grad_clip {
        grads.clip_global_norm(c);
    }
    sgd_step(params, &grads, lr)?;
    Ok(loss)
}

/// A reward-annotated sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardedSample {
    pub trace: GenerationTrace,
    pub reward: f64,
}

/// `K` samples for one sense pair with their rewards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBatch {
    pub pair: SensePair,
    pub samples: Vec<RewardedSample>,
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn rewards(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.reward)
    }

    pub fn mean_reward(&self) -> f64 {
        self.rewards().sum::<f64>() / self.len().max(1) as f64
    }
}

/// Surrogate `-(1/K) sum_k (r_k - baseline) log G(x_k)` and its gradient.
/// Rewards are constants; with `mean_baseline` the batch-mean reward is
/// subtracted from every reward.
pub fn policy_gradient(
    params: &GeneratorParams,
    vocab: &Vocabulary,
    batch: &SampleBatch,
    mean_baseline: bool,
) -> Result<(f64, ParamGrads)> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument(
            "policy gradient needs at least one sample".into(),
        ));
    }
    let k = batch.len() as f64;
    let baseline = if mean_baseline {
        batch.mean_reward()
    } else {
        0.0
    };
    let mut tape = Tape::new();
    let mut terms = Vec::with_capacity(batch.len());
    for s in &batch.samples {
        let lp = sentence_logprob_on_tape(
            params,
            &mut tape,
            vocab,
            &s.trace.sentence(),
            &batch.pair,
            s.trace.budget(),
        )?;
        terms.push(tape.scale(lp, -(s.reward - baseline) / k));
    }
    let loss = tape.add_n(&terms)?;
    let value = tape.value(loss).item()?;
    Ok((value, tape.param_grads(loss, &params.tensor_shapes())?))
}

/// One SGD step on the policy-gradient surrogate. Returns the surrogate
/// value before the update.
pub fn policy_gradient_step(
    params: &mut GeneratorParams,
    vocab: &Vocabulary,
    batch: &SampleBatch,
    lr: f64,
    mean_baseline: bool,
    grad_clip: Option<f64>,
) -> Result<f64> {
    let (loss, mut grads) = policy_gradient(params, vocab, batch, mean_baseline)?;
    if let Some(c) = grad_clip {
        grads.clip_global_norm(c);
    }
    sgd_step(params, &grads, lr)?;
    Ok(loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::SenseInventory;
    use crate::numerics::Parameters;
    use crate::rng;

    fn toy() -> (Vocabulary, SensePair) {
        let mut inv = SenseInventory::new();
        inv.insert("w", "a");
        inv.insert("w", "b");
        let tokens = ["<bos>", "<eos>", "<unk>", "w", "w#a", "w#b", "x", "y", "z"];
        let vocab =
            Vocabulary::from_tokens(tokens.iter().map(|s| s.to_string()).collect(), &inv).unwrap();
        (vocab, SensePair::new(&inv, "w", "a", "b").unwrap())
    }

    fn params(vocab: &Vocabulary, seed: u64) -> GeneratorParams {
        let shape = GeneratorShape {
            vocab_size: vocab.len(),
            embedding_dim: 3,
            hidden: 4,
        };
        GeneratorParams::init(shape, 0.5, &mut rng::seeded(seed))
    }

    fn sentence(
        vocab: &Vocabulary,
        words: &[&str],
        target: usize,
        sense: Option<&str>,
    ) -> TaggedSentence {
        TaggedSentence {
            tokens: vocab.encode_tokens(words),
            target,
            lemma: "w".into(),
            sense: sense.map(str::to_string),
        }
    }

    #[test]
    fn zero_weights_give_uniform_over_allowed_tokens() {
        let (vocab, _) = toy();
        let p = GeneratorParams::zeros(GeneratorShape {
            vocab_size: vocab.len(),
            embedding_dim: 2,
            hidden: 2,
        });
        let masks = StepMasks::new(&vocab, "w").unwrap();
        let dist = mixture_step(
            &p,
            &[0.0, 0.0],
            &[0.0, 0.0],
            Some(masks.get(Direction::Forward)),
        )
        .unwrap();
        // <eos>, <unk>, x, y, z
        for (i, &q) in dist.iter().enumerate() {
            let want = if [1, 2, 6, 7, 8].contains(&i) {
                0.2
            } else {
                0.0
            };
            assert!((q - want).abs() < 1e-15, "token {i}: {q}");
        }
    }

    #[test]
    fn mixture_averages_two_softmaxes() {
        let (vocab, _) = toy();
        let p = params(&vocab, 1);
        let (h1, h2) = ([0.3, -0.2, 0.9, 0.1], [-0.5, 0.4, 0.0, 0.7]);
        let a = masked_softmax(&p.logits(&h1).unwrap(), None).unwrap();
        let b = masked_softmax(&p.logits(&h2).unwrap(), None).unwrap();
        let m = mixture_step(&p, &h1, &h2, None).unwrap();
        for i in 0..m.len() {
            assert!((m[i] - (a[i] + b[i]) / 2.0).abs() < 1e-15);
        }
        assert_eq!(mixture_step(&p, &h1, &h1, None).unwrap(), a);
    }

    #[test]
    fn trace_matches_sentence_logprob() {
        let (vocab, pair) = toy();
        let p = params(&vocab, 2);
        let mut r = rng::seeded(3);
        for max_len in 1..8 {
            let t = sample_sentence(&p, &vocab, &pair, &mut r, max_len).unwrap();
            assert!(t.tokens.len() <= max_len && t.target <= max_len / 2);
            let steps = step_logprobs(&p, &vocab, &t.sentence(), &pair, t.budget()).unwrap();
            assert_eq!(steps.len(), t.step_logprobs.len());
            for (a, b) in steps.iter().zip(&t.step_logprobs) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn tape_matches_plain_logprob() {
        let (vocab, pair) = toy();
        let p = params(&vocab, 4);
        let s = sentence(&vocab, &["x", "y", "w", "z"], 2, None);
        for budget in [Budget::Unbounded, Budget::MaxLen(4), Budget::MaxLen(9)] {
            let mut tape = Tape::new();
            let node = sentence_logprob_on_tape(&p, &mut tape, &vocab, &s, &pair, budget).unwrap();
            let plain = sentence_logprob(&p, &vocab, &s, &pair, budget).unwrap();
            assert!((tape.value(node).item().unwrap() - plain).abs() < 1e-12);
        }
    }

    #[test]
    fn full_budget_drops_terminators() {
        let (vocab, pair) = toy();
        let p = params(&vocab, 5);
        let s = sentence(&vocab, &["x", "w", "y"], 1, None);
        assert_eq!(
            step_logprobs(&p, &vocab, &s, &pair, Budget::Unbounded)
                .unwrap()
                .len(),
            4
        );
        assert_eq!(
            step_logprobs(&p, &vocab, &s, &pair, Budget::MaxLen(3))
                .unwrap()
                .len(),
            2
        );
        assert_eq!(
            step_logprobs(&p, &vocab, &s, &pair, Budget::MaxLen(4))
                .unwrap()
                .len(),
            4
        );
        let short = sentence(&vocab, &["x", "w"], 1, None);
        assert_eq!(
            step_logprobs(&p, &vocab, &short, &pair, Budget::MaxLen(2))
                .unwrap()
                .len(),
            1
        );
        assert!(sentence_logprob(&p, &vocab, &s, &pair, Budget::MaxLen(2)).is_err());
    }

    #[test]
    fn lemma_elsewhere_is_outside_the_support() {
        let (vocab, pair) = toy();
        let p = params(&vocab, 6);
        let s = sentence(&vocab, &["w", "x", "w"], 2, Some("a"));
        assert!(!supports(&vocab, &s, Budget::Unbounded));
        assert!(sentence_logprob(&p, &vocab, &s, &pair, Budget::Unbounded).is_err());
        assert!(mle_loss(&p, &vocab, &[&s]).is_err());
        let ok = sentence(&vocab, &["x", "w#a"], 1, Some("a"));
        assert!(supports(&vocab, &ok, Budget::Unbounded));
    }

    #[test]
    fn greedy_is_deterministic() {
        let (vocab, pair) = toy();
        let p = params(&vocab, 7);
        let a = generate::<rng::Rng>(&p, &vocab, &pair, Decode::Greedy, 6).unwrap();
        let b = generate::<rng::Rng>(&p, &vocab, &pair, Decode::Greedy, 6).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unit_reward_single_sample_matches_mle_gradient() {
        let (vocab, _) = toy();
        let p = params(&vocab, 8);
        let s = sentence(&vocab, &["x", "w#a", "y"], 1, Some("a"));
        let (_, mle) = mle_loss(&p, &vocab, &[&s]).unwrap();
        let pair = SensePair::single("w", "a");
        let trace = GenerationTrace {
            tokens: vocab.encode_tokens(&["x", "w", "y"]),
            target: 1,
            pair: pair.clone(),
            step_logprobs: Vec::new(),
            logprob: 0.0,
            max_len: 20,
        };
        let batch = SampleBatch {
            pair,
            samples: vec![RewardedSample { trace, reward: 1.0 }],
        };
        let (_, pg) = policy_gradient(&p, &vocab, &batch, false).unwrap();
        for (a, b) in mle.iter().zip(pg.iter()) {
            let (a, b) = (a.unwrap(), b.unwrap());
            for (x, y) in a.data().iter().zip(b.data()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mean_baseline_with_equal_rewards_gives_zero_gradient() {
        let (vocab, pair) = toy();
        let p = params(&vocab, 9);
        let mut r = rng::seeded(10);
        let samples = (0..4)
            .map(|_| RewardedSample {
                trace: sample_sentence(&p, &vocab, &pair, &mut r, 5).unwrap(),
                reward: 0.7,
            })
            .collect();
        let batch = SampleBatch { pair, samples };
        let (loss, g) = policy_gradient(&p, &vocab, &batch, true).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(g.global_norm(), 0.0);
    }

    #[test]
    fn step_moves_parameters_and_shapes_hold() {
        let (vocab, _) = toy();
        let mut p = params(&vocab, 11);
        p.validate().unwrap();
        let before = p.clone();
        let s = sentence(&vocab, &["x", "w#b", "z", "y"], 1, Some("b"));
        let l0 = mle_pretrain_step(&mut p, &vocab, &[&s], 0.5, None).unwrap();
        let l1 = mle_loss(&p, &vocab, &[&s]).unwrap().0;
        assert_ne!(p, before);
        assert!(l1 < l0);
        assert_eq!(p.tensor_shapes(), before.tensor_shapes());
        assert!(mle_loss(&p, &vocab, &[]).is_err());
    }
}
