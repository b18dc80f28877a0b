use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::inventory::SenseInventory;
use super::sentence::{sense_token, TaggedSentence, TaggedText};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenId(pub u32);

impl TokenId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

pub const BOS: TokenId = TokenId(0);
pub const EOS: TokenId = TokenId(1);
pub const UNK: TokenId = TokenId(2);
pub const RESERVED: [&str; 3] = ["<bos>", "<eos>", "<unk>"];

/// Bijective token/id map. Ids are contiguous from zero; the three reserved
/// tokens hold ids 0..3. Every inventory lemma contributes its bare form and
/// one `lemma#sense` token per sense.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    ids: HashMap<String, TokenId>,
    /// For each id, the (lemma index, sense index) it tags, if any.
    sense_of: Vec<Option<(usize, usize)>>,
}

impl Vocabulary {
    /// Rebuilds a vocabulary from its id-ordered token list.
    pub fn from_tokens(tokens: Vec<String>, inventory: &SenseInventory) -> Result<Self> {
        if tokens.len() < RESERVED.len() || tokens[..RESERVED.len()] != RESERVED {
            return Err(Error::InvalidArgument(
                "vocabulary must start with <bos>, <eos>, <unk>".into(),
            ));
        }
        let mut ids = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if ids.insert(t.clone(), TokenId(i as u32)).is_some() {
                return Err(Error::InvalidArgument(format!(
                    "duplicate vocabulary token `{t}`"
                )));
            }
        }
        let mut sense_of = vec![None; tokens.len()];
        for (li, (lemma, senses)) in inventory.iter().enumerate() {
            for (si, sense) in senses.iter().enumerate() {
                let tok = sense_token(lemma, sense);
                let id = ids.get(&tok).ok_or_else(|| {
                    Error::InvalidArgument(format!("vocabulary lacks sense token `{tok}`"))
                })?;
                sense_of[id.index()] = Some((li, si));
            }
            if !ids.contains_key(lemma) {
                return Err(Error::InvalidArgument(format!(
                    "vocabulary lacks lemma `{lemma}`"
                )));
            }
        }
        Ok(Vocabulary {
            tokens,
            ids,
            sense_of,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.ids.get(token).copied()
    }

    /// Id of `token`, or `<unk>` if it is out of vocabulary.
    pub fn id_or_unk(&self, token: &str) -> TokenId {
        self.id(token).unwrap_or(UNK)
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id.index()).map(String::as_str)
    }

    pub fn is_sense_token(&self, id: TokenId) -> bool {
        self.sense_of.get(id.index()).is_some_and(Option::is_some)
    }

    pub fn surface_id(&self, lemma: &str) -> Result<TokenId> {
        self.id(lemma)
            .ok_or_else(|| Error::UnknownLemma(lemma.to_string()))
    }

    pub fn sense_id(&self, lemma: &str, sense: &str) -> Result<TokenId> {
        self.id(&sense_token(lemma, sense)).ok_or_else(|| {
            Error::InvalidArgument(format!("no token for sense `{sense}` of `{lemma}`"))
        })
    }

    /// True for `lemma` itself and all of its sense-tagged tokens.
    pub fn is_lemma_form(&self, id: TokenId, lemma: &str) -> bool {
        match self.token(id) {
            Some(t) => {
                t == lemma
                    || (self.is_sense_token(id)
                        && t.split_once('#').is_some_and(|(l, _)| l == lemma))
            }
            None => false,
        }
    }

    pub fn encode_tokens<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<TokenId> {
        tokens.iter().map(|t| self.id_or_unk(t.as_ref())).collect()
    }

    pub fn decode(&self, ids: &[TokenId]) -> Vec<String> {
        ids.iter()
            .map(|&id| self.token(id).unwrap_or(RESERVED[UNK.index()]).to_string())
            .collect()
    }

    /// Decodes with the annotated position written as the bare lemma.
    pub fn surface_text(&self, sentence: &TaggedSentence) -> String {
        let mut words = self.decode(&sentence.tokens);
        if let Some(w) = words.get_mut(sentence.target) {
            *w = sentence.lemma.clone();
        }
        words.join(" ")
    }

    pub fn encode(&self, text: &TaggedText) -> TaggedSentence {
        TaggedSentence {
            tokens: self.encode_tokens(&text.tokens),
            target: text.target,
            lemma: text.lemma.clone(),
            sense: text.sense.clone(),
        }
    }

    /// Checks the sentence invariants against this vocabulary and `inventory`.
    pub fn validate(&self, s: &TaggedSentence, inventory: &SenseInventory) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidArgument(msg));
        let Some(&tok) = s.tokens.get(s.target) else {
            return fail(format!(
                "target {} outside a {}-token sentence",
                s.target,
                s.len()
            ));
        };
        let senses = inventory
            .senses(&s.lemma)
            .ok_or_else(|| Error::UnknownLemma(s.lemma.clone()))?;
        if !self.is_lemma_form(tok, &s.lemma) {
            return fail(format!("token at target is not a form of `{}`", s.lemma));
        }
        if let Some(sense) = &s.sense {
            if !senses.contains(sense) {
                return fail(format!("`{sense}` is not a sense of `{}`", s.lemma));
            }
        }
        if s.tokens.iter().any(|t| t.index() >= self.len()) {
            return fail("token id out of vocabulary range".into());
        }
        Ok(())
    }
}

/// Builds the vocabulary: reserved tokens, then every inventory lemma with
/// its sense tokens (always present), then corpus tokens seen at least
/// `min_count` times, in first-seen order.
pub fn build_vocabulary(
    corpora: &[&[TaggedText]],
    inventory: &SenseInventory,
    min_count: usize,
) -> Vocabulary {
    let mut tokens: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
    for (lemma, senses) in inventory.iter() {
        tokens.push(lemma.to_string());
        tokens.extend(senses.iter().map(|s| sense_token(lemma, s)));
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    let mut order: Vec<&str> = Vec::new();
    for corpus in corpora {
        for text in corpus.iter() {
            for t in &text.tokens {
                let c = counts.entry(t.as_str()).or_insert_with(|| {
                    order.push(t.as_str());
                    0
                });
                *c += 1;
            }
        }
    }
    let mut seen: std::collections::HashSet<String> = tokens.iter().cloned().collect();
    for t in order {
        if counts[t] >= min_count.max(1) && seen.insert(t.to_string()) {
            tokens.push(t.to_string());
        }
    }
    Vocabulary::from_tokens(tokens, inventory).expect("constructed vocabulary is consistent")
}
