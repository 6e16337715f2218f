//! Data layer of the aggression-detection workbench.
//!
//! Everything that does not need a neural network lives here: labeled comment
//! corpora and their on-disk format, the noise/translation augmentation used to
//! balance training sets, the cached machine-translation client, text encoding
//! for recurrent and transformer models, and the metric/report machinery.

pub mod augmentation;
pub mod corpus;
pub mod evaluation;
pub mod features;
pub mod seed;
pub mod translator;

pub use corpus::{
    ColumnMap, Corpus, CorpusError, LabelDistribution, LabeledComment, Label, Language,
    LanguageTag, Provenance, Split,
};
