use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Separator between a lemma and a sense id in sense-tagged tokens.
pub const SENSE_SEPARATOR: char = '#';

/// Lemma to ordered sense list. Lemmas keep first-seen order and senses keep
/// file order; both orders are part of the model layout (discriminator heads,
/// class indices) and are preserved by serialization.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(
    from = "Vec<(String, Vec<String>)>",
    into = "Vec<(String, Vec<String>)>"
)]
pub struct SenseInventory {
    entries: Vec<(String, Vec<String>)>,
    index: HashMap<String, usize>,
}

impl From<Vec<(String, Vec<String>)>> for SenseInventory {
    fn from(entries: Vec<(String, Vec<String>)>) -> Self {
        let index = entries
            .iter()
            .enumerate()
            .map(|(i, (l, _))| (l.clone(), i))
            .collect();
        SenseInventory { entries, index }
    }
}

impl From<SenseInventory> for Vec<(String, Vec<String>)> {
    fn from(inv: SenseInventory) -> Self {
        inv.entries
    }
}

impl SenseInventory {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends `sense` to `lemma`'s list. Returns false if the pair is
    /// already present.
    pub fn insert(&mut self, lemma: &str, sense: &str) -> bool {
        match self.index.get(lemma) {
            Some(&i) => {
                let senses = &mut self.entries[i].1;
                if senses.iter().any(|s| s == sense) {
                    return false;
                }
                senses.push(sense.to_string());
            }
            None => {
                self.index.insert(lemma.to_string(), self.entries.len());
                self.entries
                    .push((lemma.to_string(), vec![sense.to_string()]));
            }
        }
        true
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains_lemma(&self, lemma: &str) -> bool {
        self.index.contains_key(lemma)
    }

    pub fn senses(&self, lemma: &str) -> Option<&[String]> {
        self.index.get(lemma).map(|&i| self.entries[i].1.as_slice())
    }

    /// `k_w`, the number of senses of `lemma`.
    pub fn sense_count(&self, lemma: &str) -> Option<usize> {
        self.senses(lemma).map(<[String]>::len)
    }

    pub fn sense_index(&self, lemma: &str, sense: &str) -> Option<usize> {
        self.senses(lemma)?.iter().position(|s| s == sense)
    }

    pub fn lemma_index(&self, lemma: &str) -> Option<usize> {
        self.index.get(lemma).copied()
    }

    /// Lemmas with their senses, in canonical order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &[String])> {
        self.entries.iter().map(|(l, s)| (l.as_str(), s.as_slice()))
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (lemma, senses) in self.iter() {
            for s in senses {
                out.push_str(lemma);
                out.push('\t');
                out.push_str(s);
                out.push('\n');
            }
        }
        out
    }

    pub fn parse_tsv(text: &str, path: &Path) -> Result<Self> {
        let mut inv = SenseInventory::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            let parse_err = |msg: &str| Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                msg: msg.to_string(),
            };
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 2 {
                return Err(parse_err("expected `lemma<TAB>sense-id`"));
            }
            let lemma = fields[0].trim().to_lowercase();
            let sense = fields[1].trim();
            if lemma.is_empty() || sense.is_empty() {
                return Err(parse_err("empty lemma or sense id"));
            }
            if lemma.contains(SENSE_SEPARATOR) || lemma.contains(char::is_whitespace) {
                return Err(parse_err("lemma may not contain `#` or whitespace"));
            }
            if sense.contains(char::is_whitespace) {
                return Err(parse_err("sense id may not contain whitespace"));
            }
            if !inv.insert(&lemma, sense) {
                return Err(Error::Duplicate {
                    path: path.to_path_buf(),
                    line: line_no,
                    lemma,
                    sense: sense.to_string(),
                });
            }
        }
        Ok(inv)
    }
}

/// Reads a `lemma<TAB>sense-id` file. File order defines sense order.
pub fn load_sense_inventory(path: impl AsRef<Path>) -> Result<SenseInventory> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    SenseInventory::parse_tsv(&text, path)
}
