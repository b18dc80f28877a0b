use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::inventory::{SenseInventory, SENSE_SEPARATOR};
use super::vocab::TokenId;
use crate::error::{Error, Result};

/// Default ingestion length cap, in tokens.
pub const DEFAULT_MAX_SENTENCE_LEN: usize = 20;

/// `lemma#sense`, the token that stands for a sense-annotated occurrence.
pub fn sense_token(lemma: &str, sense: &str) -> String {
    format!("{lemma}{SENSE_SEPARATOR}{sense}")
}

/// A validated corpus record in string form. When `sense` is present the
/// token at `target` is the sense-tagged token, otherwise it is the bare lemma.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggedText {
    pub tokens: Vec<String>,
    pub target: usize,
    pub lemma: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sense: Option<String>,
}

/// A corpus sentence as token ids, with the one annotated position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggedSentence {
    pub tokens: Vec<TokenId>,
    pub target: usize,
    pub lemma: String,
    pub sense: Option<String>,
}

impl TaggedSentence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn is_labeled(&self) -> bool {
        self.sense.is_some()
    }
}

/// Two distinct senses of one lemma.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SensePair {
    pub lemma: String,
    pub s1: String,
    pub s2: String,
}

impl SensePair {
    pub fn new(inventory: &SenseInventory, lemma: &str, s1: &str, s2: &str) -> Result<Self> {
        let pair = SensePair {
            lemma: lemma.to_string(),
            s1: s1.to_string(),
            s2: s2.to_string(),
        };
        pair.validate(inventory)?;
        Ok(pair)
    }

    /// Same sense on both sides. Not a valid pun input; used for ordinary
    /// single-sense language modelling, where the dual-sense mixture
    /// collapses to one distribution.
    pub fn single(lemma: &str, sense: &str) -> Self {
        SensePair {
            lemma: lemma.to_string(),
            s1: sense.to_string(),
            s2: sense.to_string(),
        }
    }

    pub fn validate(&self, inventory: &SenseInventory) -> Result<()> {
        let senses = inventory
            .senses(&self.lemma)
            .ok_or_else(|| Error::UnknownLemma(self.lemma.clone()))?;
        for s in [&self.s1, &self.s2] {
            if !senses.contains(s) {
                return Err(Error::InvalidArgument(format!(
                    "sense `{s}` is not a sense of `{}`",
                    self.lemma
                )));
            }
        }
        if self.s1 == self.s2 {
            return Err(Error::InvalidArgument(format!(
                "pair for `{}` repeats sense `{}`",
                self.lemma, self.s1
            )));
        }
        Ok(())
    }

    pub fn describe(&self) -> String {
        format!("{} ({} / {})", self.lemma, self.s1, self.s2)
    }
}

#[derive(Debug, Deserialize)]
struct RawRecord {
    tokens: Vec<String>,
    #[serde(default)]
    target: Option<usize>,
    #[serde(default)]
    lemma: Option<String>,
    #[serde(default)]
    sense: Option<String>,
}

/// Validates one JSONL record. Returns `Ok(None)` for an unlabeled record
/// with no lemma/target whose tokens contain no inventory lemma.
fn validate_record(
    raw: RawRecord,
    inventory: &SenseInventory,
    max_len: usize,
) -> std::result::Result<Option<TaggedText>, String> {
    if raw.tokens.is_empty() {
        return Err("empty token list".into());
    }
    let mut tokens = Vec::with_capacity(raw.tokens.len());
    for t in &raw.tokens {
        let t = t.trim().to_lowercase();
        if t.is_empty() || t.contains(char::is_whitespace) {
            return Err(format!("token {t:?} is empty or contains whitespace"));
        }
        tokens.push(t);
    }

    let (target, lemma) = match (raw.target, raw.lemma) {
        (Some(t), Some(l)) => (t, l.trim().to_lowercase()),
        (None, None) if raw.sense.is_none() => {
            match tokens.iter().position(|t| inventory.contains_lemma(t)) {
                Some(i) => (i, tokens[i].clone()),
                None => return Ok(None),
            }
        }
        _ => return Err("`target` and `lemma` must be given together".into()),
    };
    if target >= tokens.len() {
        return Err(format!(
            "target index {target} out of range for a {}-token sentence",
            tokens.len()
        ));
    }
    let senses = inventory
        .senses(&lemma)
        .ok_or_else(|| format!("unknown lemma `{lemma}`"))?;
    if tokens[target] != lemma {
        return Err(format!(
            "token `{}` at target {target} is not the lemma `{lemma}`",
            tokens[target]
        ));
    }
    if let Some(sense) = &raw.sense {
        if !senses.contains(sense) {
            return Err(format!("unknown sense `{sense}` for lemma `{lemma}`"));
        }
    }
    for (i, t) in tokens.iter().enumerate() {
        if i != target && is_inventory_sense_token(t, inventory) {
            return Err(format!(
                "sense-tagged token `{t}` outside the target position"
            ));
        }
    }

    let (tokens, target) = cap_length(tokens, target, max_len);
    let mut text = TaggedText {
        tokens,
        target,
        lemma,
        sense: raw.sense,
    };
    if let Some(sense) = &text.sense {
        text.tokens[text.target] = sense_token(&text.lemma, sense);
    }
    Ok(Some(text))
}

fn is_inventory_sense_token(token: &str, inventory: &SenseInventory) -> bool {
    token
        .split_once(SENSE_SEPARATOR)
        .is_some_and(|(lemma, sense)| {
            inventory
                .senses(lemma)
                .is_some_and(|s| s.iter().any(|x| x == sense))
        })
}

/// Keeps a window of at most `max_len` tokens, centred on the target where
/// the sentence allows.
fn cap_length(tokens: Vec<String>, target: usize, max_len: usize) -> (Vec<String>, usize) {
    if tokens.len() <= max_len || max_len == 0 {
        return (tokens, target);
    }
    let start = target
        .saturating_sub(max_len / 2)
        .min(tokens.len() - max_len);
    let window = tokens[start..start + max_len].to_vec();
    (window, target - start)
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Loads a sense-tagged (or unlabeled) JSONL corpus, capping sentences at
/// [`DEFAULT_MAX_SENTENCE_LEN`].
pub fn load_tagged_corpus(
    path: impl AsRef<Path>,
    inventory: &SenseInventory,
) -> Result<Vec<TaggedText>> {
    load_tagged_corpus_with(path, inventory, DEFAULT_MAX_SENTENCE_LEN)
}

pub fn load_tagged_corpus_with(
    path: impl AsRef<Path>,
    inventory: &SenseInventory,
    max_len: usize,
) -> Result<Vec<TaggedText>> {
    let path = path.as_ref();
    parse_tagged_corpus(&read(path)?, path, inventory, max_len)
}

pub fn parse_tagged_corpus(
    text: &str,
    path: &Path,
    inventory: &SenseInventory,
    max_len: usize,
) -> Result<Vec<TaggedText>> {
    let mut out = Vec::new();
    let mut skipped = 0usize;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            msg: e.to_string(),
        })?;
        match validate_record(raw, inventory, max_len) {
            Ok(Some(t)) => out.push(t),
            Ok(None) => skipped += 1,
            Err(msg) => {
                return Err(Error::Validation {
                    path: path.to_path_buf(),
                    line: i + 1,
                    msg,
                })
            }
        }
    }
    if skipped > 0 {
        log::info!(
            "{}: skipped {skipped} unlabeled sentences with no inventory lemma",
            path.display()
        );
    }
    Ok(out)
}

/// Loads the evaluation pair file: JSONL with `lemma`, `s1`, `s2`.
pub fn load_sense_pairs(
    path: impl AsRef<Path>,
    inventory: &SenseInventory,
) -> Result<Vec<SensePair>> {
    let path = path.as_ref();
    parse_sense_pairs(&read(path)?, path, inventory)
}

pub fn parse_sense_pairs(
    text: &str,
    path: &Path,
    inventory: &SenseInventory,
) -> Result<Vec<SensePair>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut pair: SensePair = serde_json::from_str(line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            msg: e.to_string(),
        })?;
        pair.lemma = pair.lemma.trim().to_lowercase();
        pair.validate(inventory).map_err(|e| Error::Validation {
            path: path.to_path_buf(),
            line: i + 1,
            msg: format!("{}: {e}", pair.describe()),
        })?;
        out.push(pair);
    }
    Ok(out)
}

/// Every two-sense combination of every lemma, in inventory order.
pub fn all_sense_pairs(inventory: &SenseInventory) -> Vec<SensePair> {
    let mut out = Vec::new();
    for (lemma, senses) in inventory.iter() {
        for i in 0..senses.len() {
            for j in i + 1..senses.len() {
                out.push(SensePair {
                    lemma: lemma.to_string(),
                    s1: senses[i].clone(),
                    s2: senses[j].clone(),
                });
            }
        }
    }
    out
}
