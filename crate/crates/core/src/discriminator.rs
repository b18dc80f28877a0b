//! Per-lemma word-sense classifier with an extra "generated" class.
//!
//! A shared bi-directional LSTM encodes the sentence; the context vector is
//! the forward state at the target position concatenated with the backward
//! state at the same position. Each inventory lemma owns a head mapping that
//! vector to `k + 1` logits: its `k` senses in inventory order, then the
//! generated class.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{SenseInventory, SensePair, TaggedSentence, TokenId, Vocabulary};
use crate::error::{Error, Result};
use crate::numerics::{
    fill_uniform, sgd_step, softmax, LstmCellParams, LstmIds, LstmState, Matrix, NodeId,
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
const FIRST_HEAD: usize = 7;

#[derive(Debug, Clone, PartialEq)]
pub struct SenseHead {
    pub lemma: String,
    pub senses: Vec<String>,
    /// `(k + 1) x 2H`
    pub u: Matrix,
    /// `(k + 1) x 1`
    pub b: Matrix,
}

impl SenseHead {
    pub fn classes(&self) -> usize {
        self.senses.len() + 1
    }

    /// Index of the generated class.
    pub fn generated_class(&self) -> usize {
        self.senses.len()
    }

    pub fn sense_class(&self, sense: &str) -> Option<usize> {
        self.senses.iter().position(|s| s == sense)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminatorParams {
    pub embedding: Matrix,
    pub forward: LstmCellParams,
    pub backward: LstmCellParams,
    pub heads: Vec<SenseHead>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscriminatorShape {
    pub vocab_size: usize,
    pub embedding_dim: usize,
    pub hidden: usize,
}

impl Parameters for DiscriminatorParams {
    fn named_tensors(&self) -> Vec<(String, &Matrix)> {
        let mut out = vec![
            ("embedding".into(), &self.embedding),
            ("forward.w_ih".into(), &self.forward.w_ih),
            ("forward.w_hh".into(), &self.forward.w_hh),
            ("forward.bias".into(), &self.forward.bias),
            ("backward.w_ih".into(), &self.backward.w_ih),
            ("backward.w_hh".into(), &self.backward.w_hh),
            ("backward.bias".into(), &self.backward.bias),
        ];
        for h in &self.heads {
            out.push((format!("head.{}.u", h.lemma), &h.u));
            out.push((format!("head.{}.b", h.lemma), &h.b));
        }
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out = vec![
            &mut self.embedding,
            &mut self.forward.w_ih,
            &mut self.forward.w_hh,
            &mut self.forward.bias,
            &mut self.backward.w_ih,
            &mut self.backward.w_hh,
            &mut self.backward.bias,
        ];
        for h in &mut self.heads {
            out.push(&mut h.u);
            out.push(&mut h.b);
        }
        out
    }
}

impl DiscriminatorParams {
    /// One head per inventory lemma, all weights zero.
    pub fn zeros(shape: DiscriminatorShape, inventory: &SenseInventory) -> Self {
        let DiscriminatorShape {
            vocab_size: v,
            embedding_dim: d,
            hidden: h,
        } = shape;
        DiscriminatorParams {
            embedding: Matrix::zeros(v, d),
            forward: LstmCellParams::zeros(d, h),
            backward: LstmCellParams::zeros(d, h),
            heads: inventory
                .iter()
                .map(|(lemma, senses)| SenseHead {
                    lemma: lemma.to_string(),
                    senses: senses.to_vec(),
                    u: Matrix::zeros(senses.len() + 1, 2 * h),
                    b: Matrix::zeros(senses.len() + 1, 1),
                })
                .collect(),
        }
    }

    pub fn init<R: Rng + ?Sized>(
        shape: DiscriminatorShape,
        inventory: &SenseInventory,
        init_range: f64,
        rng: &mut R,
    ) -> Self {
        let mut p = Self::zeros(shape, inventory);
        for m in p.tensors_mut() {
            fill_uniform(m, init_range, rng);
        }
        p
    }

    pub fn shape(&self) -> DiscriminatorShape {
        DiscriminatorShape {
            vocab_size: self.embedding.rows(),
            embedding_dim: self.embedding.cols(),
            hidden: self.forward.hidden(),
        }
    }

    pub fn head_index(&self, lemma: &str) -> Result<usize> {
        self.heads
            .iter()
            .position(|h| h.lemma == lemma)
            .ok_or_else(|| Error::UnknownLemma(lemma.to_string()))
    }

    pub fn head(&self, lemma: &str) -> Result<&SenseHead> {
        Ok(&self.heads[self.head_index(lemma)?])
    }

    pub fn head_mut(&mut self, lemma: &str) -> Result<&mut SenseHead> {
        let i = self.head_index(lemma)?;
        Ok(&mut self.heads[i])
    }

    pub fn validate(&self) -> Result<()> {
        let DiscriminatorShape {
            embedding_dim: d,
            hidden: h,
            ..
        } = self.shape();
        self.forward.validate()?;
        self.backward.validate()?;
        if self.forward.input() != d || self.backward.input() != d || self.backward.hidden() != h {
            return Err(Error::InvalidShape(
                "inconsistent discriminator encoder".into(),
            ));
        }
        for head in &self.heads {
            let k1 = head.classes();
            if head.u.shape() != (k1, 2 * h) || head.b.shape() != (k1, 1) {
                return Err(Error::InvalidShape(format!(
                    "head `{}` has wrong shape",
                    head.lemma
                )));
            }
        }
        Ok(())
    }

    fn head_ids(index: usize) -> (ParamId, ParamId) {
        (
            ParamId(FIRST_HEAD + 2 * index),
            ParamId(FIRST_HEAD + 2 * index + 1),
        )
    }
}

/// The pun word is always read in its bare form, whatever the corpus stored.
fn encoder_inputs(vocab: &Vocabulary, sentence: &TaggedSentence) -> Result<Vec<TokenId>> {
    let surface = vocab.surface_id(&sentence.lemma)?;
    let mut tokens = sentence.tokens.clone();
    match tokens.get_mut(sentence.target) {
        Some(t) => *t = surface,
        None => return Err(Error::InvalidArgument("target outside sentence".into())),
    }
    if let Some(t) = tokens.iter().find(|t| t.index() >= vocab.len()) {
        return Err(Error::InvalidArgument(format!(
            "token id {} out of range",
            t.0
        )));
    }
    Ok(tokens)
}

/// `D(y | x)` over the lemma's senses (inventory order) then the generated class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SenseDistribution {
    pub lemma: String,
    pub probabilities: Vec<f64>,
}

impl SenseDistribution {
    pub fn generated(&self) -> f64 {
        *self.probabilities.last().unwrap_or(&0.0)
    }

    /// `p(y < k + 1 | x)`, computed as `1 - p(generated | x)`.
    pub fn real(&self) -> f64 {
        1.0 - self.generated()
    }

    /// Most probable real sense index.
    pub fn predicted_sense(&self) -> usize {
        let k = self.probabilities.len().saturating_sub(1);
        (0..k)
            .max_by(|&a, &b| self.probabilities[a].total_cmp(&self.probabilities[b]))
            .unwrap_or(0)
    }

    /// The coordinates of `pair.s1` and `pair.s2`, given the lemma's ordered senses.
    pub fn pair_probs(&self, senses: &[String], pair: &SensePair) -> Result<(f64, f64)> {
        if pair.lemma != self.lemma {
            return Err(Error::InvalidArgument(format!(
                "pair lemma `{}` does not match distribution lemma `{}`",
                pair.lemma, self.lemma
            )));
        }
        if senses.len() + 1 != self.probabilities.len() {
            return Err(Error::InvalidShape(
                "sense list does not match distribution".into(),
            ));
        }
        let idx = |s: &str| {
            senses.iter().position(|x| x == s).ok_or_else(|| {
                Error::InvalidArgument(format!("`{s}` is not a sense of `{}`", pair.lemma))
            })
        };
        Ok((
            self.probabilities[idx(&pair.s1)?],
            self.probabilities[idx(&pair.s2)?],
        ))
    }
}

/// Forward pass without gradients.
pub fn classify(
    params: &DiscriminatorParams,
    vocab: &Vocabulary,
    sentence: &TaggedSentence,
) -> Result<SenseDistribution> {
    let head = params.head(&sentence.lemma)?;
    let tokens = encoder_inputs(vocab, sentence)?;
    let p = sentence.target;
    let hidden = params.forward.hidden();
    let mut f = LstmState::zeros(hidden);
    for t in &tokens[..=p] {
        f = params.forward.step(params.embedding.row(t.index()), &f)?;
    }
    let mut b = LstmState::zeros(hidden);
    for t in tokens[p..].iter().rev() {
        b = params.backward.step(params.embedding.row(t.index()), &b)?;
    }
    let mut context = f.h;
    context.extend_from_slice(&b.h);
    let mut logits = head.u.matvec(&context)?;
    for (z, bias) in logits.iter_mut().zip(head.b.data()) {
        *z += bias;
    }
    Ok(SenseDistribution {
        lemma: sentence.lemma.clone(),
        probabilities: softmax(&logits)?,
    })
}

/// Records the class distribution on `tape`; returns the probability node and
/// the head used.
pub fn classify_on_tape<'p>(
    params: &'p DiscriminatorParams,
    tape: &mut Tape,
    vocab: &Vocabulary,
    sentence: &TaggedSentence,
) -> Result<(NodeId, &'p SenseHead)> {
    let hi = params.head_index(&sentence.lemma)?;
    let head = &params.heads[hi];
    let tokens = encoder_inputs(vocab, sentence)?;
    let p = sentence.target;
    let mut f = params.forward.zero_state_on_tape(tape);
    for t in &tokens[..=p] {
        let x = tape.param_row(EMBEDDING, &params.embedding, t.index())?;
        f = params.forward.step_on_tape(tape, FORWARD, x, f)?;
    }
    let mut b = params.backward.zero_state_on_tape(tape);
    for t in tokens[p..].iter().rev() {
        let x = tape.param_row(EMBEDDING, &params.embedding, t.index())?;
        b = params.backward.step_on_tape(tape, BACKWARD, x, b)?;
    }
    let context = tape.concat(f.h, b.h)?;
    let (uid, bid) = DiscriminatorParams::head_ids(hi);
    let u = tape.param(uid, &head.u);
    let bias = tape.param(bid, &head.b);
    let z = tape.matmul(u, context)?;
    let z = tape.add(z, bias)?;
    Ok((tape.softmax(z, None)?, head))
}

/// `(D(s1 | x), D(s2 | x))`.
pub fn sense_pair_probs(
    params: &DiscriminatorParams,
    vocab: &Vocabulary,
    sentence: &TaggedSentence,
    pair: &SensePair,
) -> Result<(f64, f64)> {
    if pair.lemma != sentence.lemma {
        return Err(Error::InvalidArgument(format!(
            "pair lemma `{}` does not match sentence lemma `{}`",
            pair.lemma, sentence.lemma
        )));
    }
    let head = params.head(&pair.lemma)?;
    classify(params, vocab, sentence)?.pair_probs(&head.senses, pair)
}

/// Sentences for one discriminator update.
#[derive(Debug, Clone, Copy, Default)]
pub struct DiscriminatorBatch<'a> {
    /// Real, sense-labeled.
    pub labeled: &'a [&'a TaggedSentence],
    /// Real, unlabeled; only pushed away from the generated class.
    pub unlabeled: &'a [&'a TaggedSentence],
    /// Produced by the generator.
    pub generated: &'a [&'a TaggedSentence],
}

/// Three-term objective: supervised cross-entropy on labeled sentences,
/// `-log(1 - p(generated))` on unlabeled ones and `-log p(generated)` on
/// generated ones. Each term is a batch mean; empty batches contribute
/// nothing. Returns the loss and its gradient.
pub fn discriminator_loss(
    params: &DiscriminatorParams,
    vocab: &Vocabulary,
    batch: DiscriminatorBatch<'_>,
) -> Result<(f64, ParamGrads)> {
    let mut tape = Tape::new();
    let loss = discriminator_loss_on_tape(params, &mut tape, vocab, batch)?;
    let value = tape.value(loss).item()?;
    Ok((value, tape.param_grads(loss, &params.tensor_shapes())?))
}

pub fn discriminator_loss_on_tape(
    params: &DiscriminatorParams,
    tape: &mut Tape,
    vocab: &Vocabulary,
    batch: DiscriminatorBatch<'_>,
) -> Result<NodeId> {
    let mut terms = Vec::with_capacity(3);

    if !batch.labeled.is_empty() {
        let mut logs = Vec::with_capacity(batch.labeled.len());
        for s in batch.labeled {
            let sense = s.sense.as_ref().ok_or_else(|| {
                Error::InvalidArgument("labeled batch contains an unlabeled sentence".into())
            })?;
            let (probs, head) = classify_on_tape(params, tape, vocab, s)?;
            let class = head.sense_class(sense).ok_or_else(|| {
                Error::InvalidArgument(format!("`{sense}` is not a sense of `{}`", s.lemma))
            })?;
            let p = tape.pick(probs, class)?;
            logs.push(tape.ln(p));
        }
        terms.push(batch_mean_nll(tape, &logs)?);
    }

    if !batch.unlabeled.is_empty() {
        let mut logs = Vec::with_capacity(batch.unlabeled.len());
        for s in batch.unlabeled {
            let (probs, head) = classify_on_tape(params, tape, vocab, s)?;
            let fake = tape.pick(probs, head.generated_class())?;
            let real = tape.affine(fake, -1.0, 1.0);
            logs.push(tape.ln(real));
        }
        terms.push(batch_mean_nll(tape, &logs)?);
    }

    if !batch.generated.is_empty() {
        let mut logs = Vec::with_capacity(batch.generated.len());
        for s in batch.generated {
            let (probs, head) = classify_on_tape(params, tape, vocab, s)?;
            let fake = tape.pick(probs, head.generated_class())?;
            logs.push(tape.ln(fake));
        }
        terms.push(batch_mean_nll(tape, &logs)?);
    }

    if terms.is_empty() {
        return Err(Error::InvalidArgument(
            "discriminator loss over empty batches".into(),
        ));
    }
    tape.add_n(&terms)
}

fn batch_mean_nll(tape: &mut Tape, logs: &[NodeId]) -> Result<NodeId> {
    let total = tape.add_n(logs)?;
    Ok(tape.scale(total, -1.0 / logs.len() as f64))
}

/// One SGD step on the three-term objective; returns the loss before the update.
pub fn discriminator_train_step(
    params: &mut DiscriminatorParams,
    vocab: &Vocabulary,
    batch: DiscriminatorBatch<'_>,
    lr: f64,
    grad_clip: Option<f64>,
) -> Result<f64> {
    let (loss, mut grads) = discriminator_loss(params, vocab, batch)?;
    if let Some(c) = grad_clip {
        grads.clip_global_norm(c);
    }
    sgd_step(params, &grads, lr)?;
    Ok(loss)
}
