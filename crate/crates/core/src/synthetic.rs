//! A small two-sense grammar for tests, demos and smoke runs.
//!
//! Sentences follow `the C <lemma> P the C`, where `P` is a preposition and
//! each `C` is a context word. Real sentences of sense `i` draw their
//! context words from set `i`; the two sets are disjoint, so the sense is
//! recoverable from either context word.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::corpus::{sense_token, SenseInventory, SensePair, TaggedText};

#[derive(Debug, Clone, PartialEq)]
pub struct ToyGrammar {
    pub lemma: String,
    pub senses: [String; 2],
    /// Context words indicating each sense.
    pub context: [Vec<String>; 2],
    pub prepositions: Vec<String>,
    pub determiner: String,
}

fn words(ws: &[&str]) -> Vec<String> {
    ws.iter().map(|w| w.to_string()).collect()
}

impl Default for ToyGrammar {
    fn default() -> Self {
        ToyGrammar {
            lemma: "bank".into(),
            senses: ["river".into(), "money".into()],
            context: [
                words(&["water", "fish", "reeds", "mud"]),
                words(&["cash", "loan", "coins", "vault"]),
            ],
            prepositions: words(&["by", "near"]),
            determiner: "the".into(),
        }
    }
}

/// Position of the lemma in every grammatical sentence.
pub const TARGET: usize = 2;
/// Length of every grammatical sentence.
pub const SENTENCE_LEN: usize = 6;

impl ToyGrammar {
    pub fn inventory(&self) -> SenseInventory {
        let mut inv = SenseInventory::new();
        for s in &self.senses {
            inv.insert(&self.lemma, s);
        }
        inv
    }

    pub fn pair(&self) -> SensePair {
        SensePair {
            lemma: self.lemma.clone(),
            s1: self.senses[0].clone(),
            s2: self.senses[1].clone(),
        }
    }

    /// Surface tokens of a random sentence of sense `sense`.
    pub fn surface<R: Rng + ?Sized>(&self, sense: usize, rng: &mut R) -> Vec<String> {
        let ctx = &self.context[sense];
        vec![
            self.determiner.clone(),
            ctx.choose(rng).expect("empty context set").clone(),
            self.lemma.clone(),
            self.prepositions
                .choose(rng)
                .expect("no prepositions")
                .clone(),
            self.determiner.clone(),
            ctx.choose(rng).expect("empty context set").clone(),
        ]
    }

    pub fn labeled<R: Rng + ?Sized>(&self, sense: usize, rng: &mut R) -> TaggedText {
        let mut tokens = self.surface(sense, rng);
        tokens[TARGET] = sense_token(&self.lemma, &self.senses[sense]);
        TaggedText {
            tokens,
            target: TARGET,
            lemma: self.lemma.clone(),
            sense: Some(self.senses[sense].clone()),
        }
    }

    pub fn unlabeled<R: Rng + ?Sized>(&self, sense: usize, rng: &mut R) -> TaggedText {
        TaggedText {
            tokens: self.surface(sense, rng),
            target: TARGET,
            lemma: self.lemma.clone(),
            sense: None,
        }
    }

    /// `n` labeled sentences, senses alternating.
    pub fn labeled_corpus<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<TaggedText> {
        (0..n).map(|i| self.labeled(i % 2, rng)).collect()
    }

    /// `n` unlabeled sentences, senses alternating.
    pub fn unlabeled_corpus<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<TaggedText> {
        (0..n).map(|i| self.unlabeled(i % 2, rng)).collect()
    }

    /// Whether surface `tokens` follow the sentence template.
    pub fn is_grammatical(&self, tokens: &[String]) -> bool {
        let is_ctx = |w: &String| self.context.iter().any(|c| c.contains(w));
        tokens.len() == SENTENCE_LEN
            && tokens[0] == self.determiner
            && is_ctx(&tokens[1])
            && tokens[TARGET] == self.lemma
            && self.prepositions.contains(&tokens[3])
            && tokens[4] == self.determiner
            && is_ctx(&tokens[5])
    }

    /// An unlabeled fake: the words of a real sentence in an ungrammatical order.
    pub fn scrambled<R: Rng + ?Sized>(&self, rng: &mut R) -> TaggedText {
        let sense = rng.gen_range(0..2);
        let mut tokens = self.surface(sense, rng);
        while self.is_grammatical(&tokens) {
            tokens.shuffle(rng);
        }
        let target = tokens
            .iter()
            .position(|t| *t == self.lemma)
            .expect("lemma survives shuffling");
        TaggedText {
            tokens,
            target,
            lemma: self.lemma.clone(),
            sense: None,
        }
    }
}
