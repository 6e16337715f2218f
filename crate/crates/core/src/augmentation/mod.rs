//! Noise addition, data translation and class balancing.

mod balance;
mod lexicon;
mod noise;

pub use balance::{
    balance_corpus, build_translated_corpus, plan_balance, BalancePlan, BalanceStrategy,
    SourceQuota, DEFAULT_TRANSLATION_SHARE,
};
pub use lexicon::{load_stopwords, parse_stopwords, Replacement, SynonymLexicon};
pub use noise::{
    insert_stopwords, noise_tokens, replace_with_synonyms, shuffle_words, NoiseAugmenter,
    NoiseConfig, NoiseStats,
};

use crate::corpus::{Corpus, CorpusError, Label, Language};
use crate::translator::TranslateError;

#[derive(Debug, thiserror::Error)]
pub enum AugmentError {
    #[error("invalid noise configuration: {0}")]
    InvalidConfig(String),
    #[error("stop-word insertion requested with an empty stop-word list")]
    EmptyStopwords,
    #[error("lexicon: {0}")]
    Lexicon(String),
    #[error("comment {0:?} is not raw; noise is only applied to raw comments")]
    NotRaw(String),
    #[error("comment {0:?} has no tokens")]
    EmptyText(String),
    #[error("invalid balance plan: {0}")]
    InvalidPlan(String),
    #[error("target {target} for {label} is below the current count {current}")]
    TargetBelowCurrent {
        label: Label,
        target: usize,
        current: usize,
    },
    #[error("cannot fill {missing} {label} comment(s): no raw comments and not enough donors")]
    UnfillableDeficit { label: Label, missing: usize },
    #[error("comment {id:?} is already in {language}")]
    SameLanguageSource { id: String, language: Language },
    #[error("translation failed for {} comment(s): {}", ids.len(), ids.join(", "))]
    TranslationFailed { ids: Vec<String> },
    #[error("{} comment(s) left untranslated: {}", untranslated.len(), untranslated.join(", "))]
    IncompleteTranslation {
        untranslated: Vec<String>,
        partial: Box<Corpus>,
    },
    #[error(transparent)]
    Translate(#[from] TranslateError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}
