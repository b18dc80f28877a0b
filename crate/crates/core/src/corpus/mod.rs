//! Sense inventory, tagged-corpus ingestion, vocabulary and batching.
//!
//! File formats:
//! - sense inventory: UTF-8 TSV, one `lemma<TAB>sense-id` per line; file
//!   order is sense order.
//! - tagged / unlabeled corpus: UTF-8 JSONL with `tokens` (array of strings),
//!   `target` (index), `lemma`, and optional `sense`. Unlabeled records may
//!   omit `target` and `lemma`; the first token that is an inventory lemma
//!   is used instead.
//! - sense pairs: JSONL with `lemma`, `s1`, `s2`.
//!
//! Tokens are lowercased. Only the annotated position carries a sense-tagged
//! token (`lemma#sense`).

mod batch;
mod inventory;
mod sentence;
mod vocab;

pub use batch::{batch_indices, batch_iter};
pub use inventory::{load_sense_inventory, SenseInventory, SENSE_SEPARATOR};
pub use sentence::{
    all_sense_pairs, load_sense_pairs, load_tagged_corpus, load_tagged_corpus_with,
    parse_sense_pairs, parse_tagged_corpus, sense_token, SensePair, TaggedSentence, TaggedText,
    DEFAULT_MAX_SENTENCE_LEN,
};
pub use vocab::{build_vocabulary, TokenId, Vocabulary, BOS, EOS, RESERVED, UNK};
