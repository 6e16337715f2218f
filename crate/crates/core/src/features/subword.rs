use std::path::Path;

use serde::{Deserialize, Serialize};
use tokenizers::decoders::byte_level::ByteLevel as ByteLevelDecoder;
use tokenizers::decoders::wordpiece::WordPiece as WordPieceDecoder;
use tokenizers::models::bpe::BPE;
use tokenizers::models::wordpiece::WordPiece;
use tokenizers::normalizers::bert::BertNormalizer;
use tokenizers::pre_tokenizers::bert::BertPreTokenizer;
use tokenizers::pre_tokenizers::byte_level::ByteLevel;
use tokenizers::Tokenizer;

use super::{EncodingScheme, FeatureError, TokenizedBatch};
use crate::seed::hex_digest;

/// Which pretrained family a subword vocabulary belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubwordFamily {
    /// WordPiece with `[CLS]` / `[SEP]` / `[PAD]` (BERT, multilingual BERT).
    WordPiece,
    /// Byte-level BPE where `<|endoftext|>` doubles as every marker (GPT-2).
    ByteLevelBpe,
}

/// A pretrained subword tokenizer plus the marker ids its model expects.
#[derive(Clone)]
pub struct SubwordTokenizer {
    inner: Tokenizer,
    family: SubwordFamily,
    cls_id: u32,
    sep_id: u32,
    pad_id: u32,
    fingerprint: String,
}

impl std::fmt::Debug for SubwordTokenizer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SubwordTokenizer")
            .field("family", &self.family)
            .field("vocab_size", &self.vocab_size())
            .field("fingerprint", &self.fingerprint)
            .finish()
    }
}

fn tok_err(e: impl std::fmt::Display) -> FeatureError {
    FeatureError::Tokenizer(e.to_string())
}

#[derive(Deserialize, Default)]
struct TokenizerConfig {
    do_lower_case: Option<bool>,
}

impl SubwordTokenizer {
    /// Loads from a checkpoint directory: `tokenizer.json` when present,
    /// otherwise `vocab.txt` (WordPiece) or `vocab.json` + `merges.txt`
    /// (byte-level BPE).
    pub fn from_dir(dir: &Path) -> Result<Self, FeatureError> {
        let json = dir.join("tokenizer.json");
        if json.exists() {
            let inner = Tokenizer::from_file(&json).map_err(tok_err)?;
            let family = if inner.token_to_id("[CLS]").is_some() {
                SubwordFamily::WordPiece
            } else {
                SubwordFamily::ByteLevelBpe
            };
            return Self::wrap(inner, family);
        }
        let vocab_txt = dir.join("vocab.txt");
        if vocab_txt.exists() {
            let config: TokenizerConfig = std::fs::read_to_string(dir.join("tokenizer_config.json"))
                .ok()
                .and_then(|s| serde_json::from_str(&s).ok())
                .unwrap_or_default();
            return Self::wordpiece(&vocab_txt, config.do_lower_case.unwrap_or(true));
        }
        let (vocab_json, merges) = (dir.join("vocab.json"), dir.join("merges.txt"));
        if vocab_json.exists() && merges.exists() {
            return Self::byte_level_bpe(&vocab_json, &merges);
        }
        Err(FeatureError::Tokenizer(format!(
            "{}: no tokenizer.json, vocab.txt or vocab.json/merges.txt",
            dir.display()
        )))
    }

    pub fn wordpiece(vocab: &Path, lowercase: bool) -> Result<Self, FeatureError> {
        let model = WordPiece::from_file(&vocab.to_string_lossy())
            .unk_token("[UNK]".into())
            .build()
            .map_err(tok_err)?;
        let mut inner = Tokenizer::new(model);
        inner
            .with_normalizer(Some(BertNormalizer::new(true, true, None, lowercase)))
            .map_err(tok_err)?;
        inner.with_pre_tokenizer(Some(BertPreTokenizer));
        inner.with_decoder(Some(WordPieceDecoder::default()));
        Self::wrap(inner, SubwordFamily::WordPiece)
    }

    pub fn byte_level_bpe(vocab: &Path, merges: &Path) -> Result<Self, FeatureError> {
        let model = BPE::from_file(&vocab.to_string_lossy(), &merges.to_string_lossy())
            .build()
            .map_err(tok_err)?;
        let mut inner = Tokenizer::new(model);
        inner.with_pre_tokenizer(Some(ByteLevel::new(false, true, true)));
        inner.with_decoder(Some(ByteLevelDecoder::default()));
        Self::wrap(inner, SubwordFamily::ByteLevelBpe)
    }

    fn wrap(inner: Tokenizer, family: SubwordFamily) -> Result<Self, FeatureError> {
        let id = |token: &str| {
            inner.token_to_id(token).ok_or_else(|| {
                FeatureError::Tokenizer(format!("vocabulary has no {token} token"))
            })
        };
        let (cls_id, sep_id, pad_id) = match family {
            SubwordFamily::WordPiece => (id("[CLS]")?, id("[SEP]")?, id("[PAD]")?),
            SubwordFamily::ByteLevelBpe => {
                let eos = id("<|endoftext|>")?;
                (eos, eos, eos)
            }
        };
        let mut vocab: Vec<(u32, String)> = inner
            .get_vocab(true)
            .into_iter()
            .map(|(t, i)| (i, t))
            .collect();
        vocab.sort();
        let listing: Vec<String> = vocab.into_iter().map(|(i, t)| format!("{i}\t{t}")).collect();
        let fingerprint = hex_digest(listing.join("\n").as_bytes());
        Ok(Self {
            inner,
            family,
            cls_id,
            sep_id,
            pad_id,
            fingerprint,
        })
    }

    pub fn family(&self) -> SubwordFamily {
        self.family
    }

    pub fn cls_id(&self) -> u32 {
        self.cls_id
    }

    pub fn sep_id(&self) -> u32 {
        self.sep_id
    }

    pub fn pad_id(&self) -> u32 {
        self.pad_id
    }

    pub fn vocab_size(&self) -> usize {
        self.inner.get_vocab_size(true)
    }

    /// SHA-256 over the id-sorted vocabulary.
    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    /// Fails unless this tokenizer's vocabulary is the one a model was built with.
    pub fn ensure_fingerprint(&self, expected: &str) -> Result<(), FeatureError> {
        if self.fingerprint == expected {
            Ok(())
        } else {
            Err(FeatureError::FingerprintMismatch {
                expected: expected.to_string(),
                found: self.fingerprint.clone(),
            })
        }
    }

    /// Content subword ids, no markers.
    pub fn content_ids(&self, text: &str) -> Result<Vec<u32>, FeatureError> {
        let encoding = self.inner.encode(text, false).map_err(tok_err)?;
        Ok(encoding.get_ids().to_vec())
    }

    pub fn decode(&self, ids: &[u32]) -> Result<String, FeatureError> {
        self.inner.decode(ids, true).map_err(tok_err)
    }
}

/// `[CLS] content [SEP]` rows, post-padded to `max_len`. Content is cut from
/// the tail so both markers always survive truncation.
pub fn encode_transformer(
    texts: &[&str],
    tokenizer: &SubwordTokenizer,
    max_len: usize,
) -> Result<TokenizedBatch, FeatureError> {
    if max_len < 2 {
        return Err(FeatureError::MaxLen(max_len));
    }
    let mut rows = Vec::with_capacity(texts.len());
    for text in texts {
        let mut content = tokenizer.content_ids(text)?;
        content.truncate(max_len - 2);
        let mut row = Vec::with_capacity(content.len() + 2);
        row.push(tokenizer.cls_id);
        row.extend(content);
        row.push(tokenizer.sep_id);
        rows.push(row);
    }
    Ok(TokenizedBatch::from_rows(
        rows,
        max_len,
        tokenizer.pad_id,
        EncodingScheme::TransformerSubword,
        tokenizer.fingerprint.clone(),
    ))
}
