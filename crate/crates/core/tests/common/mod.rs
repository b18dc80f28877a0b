//! Test oracles computed independently of the code under test.
#![allow(dead_code)]

use pungen::corpus::{SenseInventory, SensePair, TaggedSentence, TokenId, Vocabulary};
use pungen::generator::{sentence_logprob, Budget, GeneratorParams, GeneratorShape};
use pungen::numerics::{ParamGrads, Parameters};
use pungen::rng;

pub const LEMMA: &str = "w";
pub const SENSES: [&str; 2] = ["a", "b"];

/// Inventory `w: a, b` and a vocabulary of the reserved tokens, the lemma
/// forms and `words`, in that order.
pub fn toy_vocab(words: &[&str]) -> (SenseInventory, Vocabulary) {
    let mut inv = SenseInventory::new();
    for s in SENSES {
        inv.insert(LEMMA, s);
    }
    let mut tokens: Vec<String> = ["<bos>", "<eos>", "<unk>", "w", "w#a", "w#b"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    tokens.extend(words.iter().map(|s| s.to_string()));
    let vocab = Vocabulary::from_tokens(tokens, &inv).unwrap();
    (inv, vocab)
}

pub fn toy_pair() -> SensePair {
    SensePair {
        lemma: LEMMA.into(),
        s1: SENSES[0].into(),
        s2: SENSES[1].into(),
    }
}

/// Ids a decoder may emit as words: everything except the two terminators,
/// the lemma and any `lemma#sense` token. Decided from token strings.
pub fn word_ids(vocab: &Vocabulary) -> Vec<TokenId> {
    vocab
        .tokens()
        .iter()
        .enumerate()
        .filter(|(_, t)| *t != "<bos>" && *t != "<eos>" && *t != LEMMA && !t.contains('#'))
        .map(|(i, _)| TokenId(i as u32))
        .collect()
}

fn sequences(alphabet: &[TokenId], len: usize) -> Vec<Vec<TokenId>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                alphabet.iter().map(move |&t| {
                    let mut s = prefix.clone();
                    s.push(t);
                    s
                })
            })
            .collect();
    }
    out
}

/// Every sentence the length-`max_len` decoder can produce: up to
/// `max_len / 2` words, the lemma, then words up to `max_len` in total.
pub fn enumerate_sentences(vocab: &Vocabulary, max_len: usize) -> Vec<TaggedSentence> {
    let alphabet = word_ids(vocab);
    let lemma = vocab.id(LEMMA).unwrap();
    let mut out = Vec::new();
    for before in 0..=max_len / 2 {
        for after in 0..max_len - before {
            for pre in sequences(&alphabet, before) {
                for post in sequences(&alphabet, after) {
                    let mut tokens = pre.clone();
                    tokens.push(lemma);
                    tokens.extend(post);
                    out.push(TaggedSentence {
                        tokens,
                        target: before,
                        lemma: LEMMA.into(),
                        sense: None,
                    });
                }
            }
        }
    }
    out
}

pub fn random_generator(
    vocab: &Vocabulary,
    embedding_dim: usize,
    hidden: usize,
    range: f64,
    seed: u64,
) -> GeneratorParams {
    let shape = GeneratorShape {
        vocab_size: vocab.len(),
        embedding_dim,
        hidden,
    };
    GeneratorParams::init(shape, range, &mut rng::seeded(seed))
}

/// `E[r] = sum_x G(x) r(x)` over the enumerated sentence space.
pub fn expected_reward(
    params: &GeneratorParams,
    vocab: &Vocabulary,
    space: &[TaggedSentence],
    max_len: usize,
    reward: &dyn Fn(&TaggedSentence) -> f64,
) -> f64 {
    let pair = toy_pair();
    space
        .iter()
        .map(|s| {
            sentence_logprob(params, vocab, s, &pair, Budget::MaxLen(max_len))
                .unwrap()
                .exp()
                * reward(s)
        })
        .sum()
}

/// Central-difference gradient of `f` with respect to every parameter
/// scalar, flattened in tensor order.
pub fn finite_difference<P: Parameters + Clone>(
    params: &P,
    eps: f64,
    f: &dyn Fn(&P) -> f64,
) -> Vec<f64> {
    let mut probe = params.clone();
    let sizes: Vec<usize> = probe.tensors_mut().iter().map(|m| m.len()).collect();
    let mut out = Vec::new();
    for (t, &n) in sizes.iter().enumerate() {
        for i in 0..n {
            let orig = probe.tensors_mut()[t].data()[i];
            probe.tensors_mut()[t].data_mut()[i] = orig + eps;
            let up = f(&probe);
            probe.tensors_mut()[t].data_mut()[i] = orig - eps;
            let down = f(&probe);
            probe.tensors_mut()[t].data_mut()[i] = orig;
            out.push((up - down) / (2.0 * eps));
        }
    }
    out
}

/// Gradient as a flat vector; absent tensors count as zeros.
pub fn flatten<P: Parameters>(params: &P, grads: &ParamGrads) -> Vec<f64> {
    let shapes = params.tensor_shapes();
    let mut out = Vec::new();
    for (g, (r, c)) in grads.iter().zip(shapes) {
        match g {
            Some(m) => out.extend_from_slice(m.data()),
            None => out.extend(std::iter::repeat_n(0.0, r * c)),
        }
    }
    out
}
