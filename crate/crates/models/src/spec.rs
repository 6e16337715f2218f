use aggrobench_core::corpus::Language;
use aggrobench_core::evaluation::ModelKind;
use aggrobench_core::features::{DEFAULT_SUBWORD_MAX_LEN, DEFAULT_WORD_MAX_LEN};
use serde::{Deserialize, Serialize};

use crate::ModelError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SkipGramSettings {
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f64,
}

impl Default for SkipGramSettings {
    fn default() -> Self {
        Self {
            window: 2,
            negatives: 5,
            epochs: 5,
            learning_rate: 0.025,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AutoencoderSettings {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Keep the pretrained embedding and encoder fixed while the head trains.
    pub freeze_encoder: bool,
}

impl Default for AutoencoderSettings {
    fn default() -> Self {
        Self {
            epochs: 10,
            learning_rate: 1e-2,
            freeze_encoder: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparameters {
    pub embedding_dim: usize,
    pub hidden_size: usize,
    pub dropout: f64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Epochs without validation-loss improvement before stopping.
    pub patience: usize,
    pub max_len: usize,
    pub vocab_size: usize,
    pub min_frequency: usize,
    /// Pretrained checkpoint id or directory (transformer kinds).
    pub checkpoint: Option<String>,
    pub skipgram: SkipGramSettings,
    pub autoencoder: AutoencoderSettings,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Self {
            embedding_dim: 128,
            hidden_size: 128,
            dropout: 0.3,
            batch_size: 32,
            learning_rate: 1e-3,
            max_epochs: 30,
            patience: 3,
            max_len: DEFAULT_WORD_MAX_LEN,
            vocab_size: 20_000,
            min_frequency: 1,
            checkpoint: None,
            skipgram: SkipGramSettings::default(),
            autoencoder: AutoencoderSettings::default(),
        }
    }
}

impl Hyperparameters {
    /// Defaults for `kind`: the recurrent values above, or the fine-tuning
    /// values (lr 2e-5, batch 16, ≤4 epochs, 128 subwords) for transformers.
    pub fn for_kind(kind: ModelKind) -> Self {
        let base = Self::default();
        if !kind.is_transformer() {
            return base;
        }
        Self {
            learning_rate: 2e-5,
            batch_size: 16,
            max_epochs: 4,
            max_len: DEFAULT_SUBWORD_MAX_LEN,
            dropout: 0.0,
            checkpoint: Some(default_checkpoint(kind).to_string()),
            ..base
        }
    }
}

/// Hub id used when a transformer spec names no checkpoint.
pub fn default_checkpoint(kind: ModelKind) -> &'static str {
    match kind {
        ModelKind::BertBase => "bert-base-uncased",
        ModelKind::BertMultilingual => "bert-base-multilingual-cased",
        ModelKind::Gpt2Medium => "gpt2-medium",
        _ => "",
    }
}

/// Which model, for which language, with which settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub language: Language,
    pub hyper: Hyperparameters,
    pub num_classes: usize,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, language: Language) -> Result<Self, ModelError> {
        Self::with_hyper(kind, language, Hyperparameters::for_kind(kind))
    }

    pub fn with_hyper(
        kind: ModelKind,
        language: Language,
        hyper: Hyperparameters,
    ) -> Result<Self, ModelError> {
        let spec = Self {
            kind,
            language,
            hyper,
            num_classes: 3,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// The English-only BERT checkpoint is not used for Bangla or Hindi;
    /// those go through multilingual BERT.
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.kind == ModelKind::BertBase && self.language != Language::En {
            return Err(ModelError::LanguageMismatch {
                kind: self.kind,
                language: self.language,
            });
        }
        if self.num_classes != 3 {
            return Err(ModelError::Config("exactly three classes are supported".into()));
        }
        let h = &self.hyper;
        if !(0.0..1.0).contains(&h.dropout) {
            return Err(ModelError::Config(format!("dropout {} outside [0, 1)", h.dropout)));
        }
        if h.batch_size == 0 || h.max_len == 0 || h.learning_rate < 0.0 {
            return Err(ModelError::Config(
                "batch_size and max_len must be positive, learning_rate non-negative".into(),
            ));
        }
        if !self.kind.is_transformer() && (h.embedding_dim == 0 || h.hidden_size == 0 || h.vocab_size < 3) {
            return Err(ModelError::Config(
                "embedding_dim and hidden_size must be positive and vocab_size at least 3".into(),
            ));
        }
        Ok(())
    }

    /// The BERT flavour a language calls for.
    pub fn bert_for(language: Language) -> ModelKind {
        if language == Language::En {
            ModelKind::BertBase
        } else {
            ModelKind::BertMultilingual
        }
    }

    pub fn checkpoint_id(&self) -> String {
        self.hyper
            .checkpoint
            .clone()
            .unwrap_or_else(|| default_checkpoint(self.kind).to_string())
    }
}
