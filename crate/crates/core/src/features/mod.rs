//! Text → integer sequences.
//!
//! Two schemes: word-index sequences over a fitted [`Vocabulary`] for the
//! recurrent models, and `[CLS] … [SEP]` subword sequences for the pretrained
//! transformers. Both produce a post-padded [`TokenizedBatch`].

mod subword;
mod text;
mod vocab;

use serde::{Deserialize, Serialize};

pub use subword::{encode_transformer, SubwordFamily, SubwordTokenizer};
pub use text::word_tokens;
pub use vocab::{fit_vocabulary, fit_vocabulary_from_texts, Vocabulary, PAD, UNK};

pub const DEFAULT_WORD_MAX_LEN: usize = 100;
pub const DEFAULT_SUBWORD_MAX_LEN: usize = 128;

#[derive(Debug, thiserror::Error)]
pub enum FeatureError {
    #[error("vocabulary: {0}")]
    Vocabulary(String),
    #[error("tokenizer: {0}")]
    Tokenizer(String),
    #[error("tokenizer fingerprint {found} does not match the model's {expected}")]
    FingerprintMismatch { expected: String, found: String },
    #[error("max_len {0} is too small")]
    MaxLen(usize),
    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncodingScheme {
    WordIndex,
    TransformerSubword,
}

/// Padded id matrix with its mask. `attention_mask[i][j] == 1` exactly when
/// `j < lengths[i]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedBatch {
    pub token_ids: Vec<Vec<u32>>,
    pub attention_mask: Vec<Vec<u8>>,
    pub lengths: Vec<usize>,
    pub max_len: usize,
    pub scheme: EncodingScheme,
    /// Fingerprint of the vocabulary the ids index into.
    pub vocab_fingerprint: String,
}

impl TokenizedBatch {
    /// Rows must already be at most `max_len` long.
    fn from_rows(
        rows: Vec<Vec<u32>>,
        max_len: usize,
        pad: u32,
        scheme: EncodingScheme,
        vocab_fingerprint: String,
    ) -> Self {
        let lengths: Vec<usize> = rows.iter().map(Vec::len).collect();
        let attention_mask = lengths
            .iter()
            .map(|&n| (0..max_len).map(|j| u8::from(j < n)).collect())
            .collect();
        let token_ids = rows
            .into_iter()
            .map(|mut r| {
                r.resize(max_len, pad);
                r
            })
            .collect();
        Self {
            token_ids,
            attention_mask,
            lengths,
            max_len,
            scheme,
            vocab_fingerprint,
        }
    }

    pub fn len(&self) -> usize {
        self.token_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_ids.is_empty()
    }

    /// Unpadded ids of row `i`.
    pub fn row(&self, i: usize) -> &[u32] {
        &self.token_ids[i][..self.lengths[i]]
    }

    /// Rows `range` as a new batch.
    pub fn slice(&self, range: std::ops::Range<usize>) -> TokenizedBatch {
        TokenizedBatch {
            token_ids: self.token_ids[range.clone()].to_vec(),
            attention_mask: self.attention_mask[range.clone()].to_vec(),
            lengths: self.lengths[range].to_vec(),
            max_len: self.max_len,
            scheme: self.scheme,
            vocab_fingerprint: self.vocab_fingerprint.clone(),
        }
    }

    /// Checks the mask/length/shape invariants.
    pub fn is_consistent(&self) -> bool {
        self.token_ids.len() == self.lengths.len()
            && self.attention_mask.len() == self.lengths.len()
            && self
                .token_ids
                .iter()
                .zip(&self.attention_mask)
                .zip(&self.lengths)
                .all(|((ids, mask), &n)| {
                    ids.len() == self.max_len
                        && mask.len() == self.max_len
                        && n <= self.max_len
                        && mask.iter().enumerate().all(|(j, &m)| (m == 1) == (j < n))
                })
    }
}

/// Word-index encoding: unknown words map to `UNK`, long texts are cut from
/// the tail, short ones post-padded with `PAD`.
pub fn encode_word_index(texts: &[&str], vocab: &Vocabulary, max_len: usize) -> TokenizedBatch {
    let max_len = max_len.max(1);
    let rows = texts
        .iter()
        .map(|t| {
            word_tokens(t)
                .iter()
                .take(max_len)
                .map(|w| vocab.id_or_unk(w))
                .collect()
        })
        .collect();
    TokenizedBatch::from_rows(
        rows,
        max_len,
        PAD,
        EncodingScheme::WordIndex,
        vocab.fingerprint(),
    )
}
