//! Aggression classifiers: LSTM, BiLSTM, LSTM autoencoder, skip-gram
//! embeddings, and fine-tuned BERT / GPT-2, behind one training loop.

pub mod autoencoder;
pub mod bilstm;
pub mod classifier;
pub mod embedding;
pub mod lstm;
pub mod nn;
pub mod recurrent;
pub mod skipgram;
pub mod spec;
pub mod train;
pub mod transformer;

use std::io;

use aggrobench_core::corpus::Language;
use aggrobench_core::evaluation::ModelKind;
use aggrobench_core::features::{EncodingScheme, FeatureError};
use thiserror::Error;

pub use autoencoder::{autoencoder_fit, AutoencoderConfig, AutoencoderPretraining, SequenceAutoencoder};
pub use bilstm::{bilstm_forward, bilstm_sequence, BiLstmOutput, BiLstmParams, PlainRnnParams, Recurrence};
pub use classifier::{build_classifier, Classifier, Prediction, RecurrentClassifier, TrainedModel};
pub use embedding::EmbeddingMatrix;
pub use lstm::{lstm_forward, lstm_step, LstmParams, LstmState};
pub use recurrent::{RecurrentNet, NUM_CLASSES};
pub use skipgram::{skipgram_train, SkipGram, SkipGramConfig};
pub use spec::{default_checkpoint, AutoencoderSettings, Hyperparameters, ModelSpec, SkipGramSettings};
pub use train::{train, TrainOptions, TrainingRun};
pub use transformer::checkpoint::{
    write_stand_in_checkpoint, CheckpointResolver, StandInFamily, PRETRAINED_DIR_ENV,
};
pub use transformer::TransformerClassifier;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{} is not available for {}", kind.as_str(), language.name())]
    LanguageMismatch { kind: ModelKind, language: Language },
    #[error("expected a {expected:?} batch, got {found:?}")]
    SchemeMismatch {
        expected: EncodingScheme,
        found: EncodingScheme,
    },
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("loss became non-finite in epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("only {words} distinct words for {negatives} negative samples")]
    VocabularyTooSmall { words: usize, negatives: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error("{0}: {1}")]
    Io(String, #[source] io::Error),
    #[error(transparent)]
    Candle(#[from] candle_core::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
