//! Labeled comment corpora in the three-class aggression shape.
//!
//! A [`Corpus`] is an ordered, validated, immutable list of
//! [`LabeledComment`]s. Comments carry their language and provenance so that
//! synthetic (noise-augmented or translated) text can always be traced back to
//! the raw comment it came from.

mod io;
mod split;

use std::collections::HashSet;
use std::fmt;
use std::ops::Add;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use io::{load_corpus, save_corpus, write_manifest, ColumnMap, CorpusManifest};
pub use split::{split_train_validation, DEFAULT_VALIDATION_FRACTION};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Csv { path: PathBuf, message: String },
    #[error("{path}: header has no column named {column:?}")]
    MissingColumn { path: PathBuf, column: String },
    #[error("{path}: line {line}: expected {expected} columns, found {found}")]
    MalformedRow {
        path: PathBuf,
        line: u64,
        expected: usize,
        found: usize,
    },
    #[error("{path}: line {line}: unknown label {value:?}")]
    UnknownLabel { path: PathBuf, line: u64, value: String },
    #[error("{path}: line {line}: {message}")]
    InvalidRow {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("duplicate comment id {0:?}")]
    DuplicateId(String),
    #[error("comment {id:?}: {message}")]
    InvalidComment { id: String, message: String },
    #[error("comment {id:?} has language {found}, corpus is tagged {expected}")]
    LanguageMismatch {
        id: String,
        expected: LanguageTag,
        found: Language,
    },
    #[error("validation fraction {0} is outside (0, 1)")]
    InvalidFraction(f64),
    #[error("corpus of {size} comments is too small to split with fraction {fraction}")]
    TooSmallToSplit { size: usize, fraction: f64 },
    #[error("cannot concatenate corpora with different splits")]
    SplitMismatch,
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// The three aggression classes, in the canonical index order used by every
/// matrix and probability vector in the workspace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Label {
    /// Non-aggressive.
    Nag,
    /// Overtly aggressive.
    Oag,
    /// Covertly aggressive.
    Cag,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::Nag, Label::Oag, Label::Cag];
    pub const COUNT: usize = 3;

    pub fn index(self) -> usize {
        match self {
            Label::Nag => 0,
            Label::Oag => 1,
            Label::Cag => 2,
        }
    }

    pub fn from_index(index: usize) -> Option<Label> {
        Label::ALL.get(index).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Nag => "NAG",
            Label::Oag => "OAG",
            Label::Cag => "CAG",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown label {0:?}")]
pub struct ParseLabelError(pub String);

impl FromStr for Label {
    type Err = ParseLabelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "NAG" => Ok(Label::Nag),
            "OAG" => Ok(Label::Oag),
            "CAG" => Ok(Label::Cag),
            _ => Err(ParseLabelError(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    En,
    Bn,
    Hi,
}

impl Language {
    pub const ALL: [Language; 3] = [Language::En, Language::Bn, Language::Hi];

    pub fn code(self) -> &'static str {
        match self {
            Language::En => "en",
            Language::Bn => "bn",
            Language::Hi => "hi",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Language::En => "English",
            Language::Bn => "Bangla",
            Language::Hi => "Hindi",
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown language {0:?}")]
pub struct ParseLanguageError(pub String);

impl FromStr for Language {
    type Err = ParseLanguageError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "en" | "eng" | "english" => Ok(Language::En),
            "bn" | "ben" | "bangla" | "bengali" => Ok(Language::Bn),
            "hi" | "hin" | "hindi" => Ok(Language::Hi),
            _ => Err(ParseLanguageError(s.to_string())),
        }
    }
}

/// Where a comment's text came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Raw,
    NoiseAug,
    Translated,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Raw => "raw",
            Provenance::NoiseAug => "noise_aug",
            Provenance::Translated => "translated",
        }
    }
}

impl FromStr for Provenance {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "raw" => Ok(Provenance::Raw),
            "noise_aug" => Ok(Provenance::NoiseAug),
            "translated" => Ok(Provenance::Translated),
            other => Err(format!("unknown provenance {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Training,
    Testing,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Training => "training",
            Split::Testing => "testing",
        })
    }
}

/// Language of a whole corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LanguageTag {
    Single(Language),
    Mixed,
}

impl LanguageTag {
    pub fn admits(self, language: Language) -> bool {
        match self {
            LanguageTag::Single(l) => l == language,
            LanguageTag::Mixed => true,
        }
    }
}

impl fmt::Display for LanguageTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LanguageTag::Single(l) => write!(f, "{l}"),
            LanguageTag::Mixed => f.write_str("mixed"),
        }
    }
}

/// One social-media comment with its aggression label.
///
/// The text is stored trimmed; it is never empty. A raw comment has no
/// `source_id`, a derived one always has one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledComment {
    id: String,
    text: String,
    label: Label,
    language: Language,
    provenance: Provenance,
    source_id: Option<String>,
}

impl LabeledComment {
    pub fn raw(
        id: impl Into<String>,
        text: &str,
        label: Label,
        language: Language,
    ) -> Result<Self, CorpusError> {
        Self::build(id.into(), text, label, language, Provenance::Raw, None)
    }

    /// A comment produced from `source_id` by augmentation or translation.
    pub fn derived(
        id: impl Into<String>,
        text: &str,
        label: Label,
        language: Language,
        provenance: Provenance,
        source_id: impl Into<String>,
    ) -> Result<Self, CorpusError> {
        Self::build(
            id.into(),
            text,
            label,
            language,
            provenance,
            Some(source_id.into()),
        )
    }

    pub(crate) fn build(
        id: String,
        text: &str,
        label: Label,
        language: Language,
        provenance: Provenance,
        source_id: Option<String>,
    ) -> Result<Self, CorpusError> {
        let invalid = |message: &str| CorpusError::InvalidComment {
            id: id.clone(),
            message: message.to_string(),
        };
        if id.is_empty() {
            return Err(invalid("empty id"));
        }
        let text = text.trim();
        if text.is_empty() {
            return Err(invalid("text is empty after trimming"));
        }
        match (provenance, &source_id) {
            (Provenance::Raw, Some(_)) => return Err(invalid("raw comment with a source id")),
            (Provenance::NoiseAug | Provenance::Translated, None) => {
                return Err(invalid("derived comment without a source id"))
            }
            _ => {}
        }
        Ok(Self {
            id,
            text: text.to_string(),
            label,
            language,
            provenance,
            source_id,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn label(&self) -> Label {
        self.label
    }

    pub fn language(&self) -> Language {
        self.language
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn source_id(&self) -> Option<&str> {
        self.source_id.as_deref()
    }
}

/// Per-label comment counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabelDistribution {
    pub count_nag: usize,
    pub count_oag: usize,
    pub count_cag: usize,
    pub total: usize,
}

impl LabelDistribution {
    pub fn new(count_nag: usize, count_oag: usize, count_cag: usize) -> Self {
        Self {
            count_nag,
            count_oag,
            count_cag,
            total: count_nag + count_oag + count_cag,
        }
    }

    pub fn from_counts(counts: [usize; 3]) -> Self {
        Self::new(counts[0], counts[1], counts[2])
    }

    pub fn counts(&self) -> [usize; 3] {
        [self.count_nag, self.count_oag, self.count_cag]
    }

    pub fn get(&self, label: Label) -> usize {
        self.counts()[label.index()]
    }

    pub fn max_count(&self) -> usize {
        self.counts().into_iter().max().unwrap_or(0)
    }
}

impl Add for LabelDistribution {
    type Output = LabelDistribution;

    fn add(self, rhs: Self) -> Self::Output {
        let (a, b) = (self.counts(), rhs.counts());
        LabelDistribution::new(a[0] + b[0], a[1] + b[1], a[2] + b[2])
    }
}

impl fmt::Display for LabelDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "NAG {} / OAG {} / CAG {} (total {})",
            self.count_nag, self.count_oag, self.count_cag, self.total
        )
    }
}

/// An ordered, split-tagged collection of comments with unique ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    comments: Vec<LabeledComment>,
    split: Split,
    language_tag: LanguageTag,
}

impl Corpus {
    pub fn new(
        comments: Vec<LabeledComment>,
        split: Split,
        language_tag: LanguageTag,
    ) -> Result<Self, CorpusError> {
        let mut seen = HashSet::with_capacity(comments.len());
        for c in &comments {
            if !seen.insert(c.id.as_str()) {
                return Err(CorpusError::DuplicateId(c.id.clone()));
            }
            if !language_tag.admits(c.language) {
                return Err(CorpusError::LanguageMismatch {
                    id: c.id.clone(),
                    expected: language_tag,
                    found: c.language,
                });
            }
        }
        Ok(Self {
            comments,
            split,
            language_tag,
        })
    }

    pub fn empty(split: Split, language_tag: LanguageTag) -> Self {
        Self {
            comments: Vec::new(),
            split,
            language_tag,
        }
    }

    pub fn comments(&self) -> &[LabeledComment] {
        &self.comments
    }

    pub fn into_comments(self) -> Vec<LabeledComment> {
        self.comments
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn language_tag(&self) -> LanguageTag {
        self.language_tag
    }

    pub fn len(&self) -> usize {
        self.comments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.comments.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&LabeledComment> {
        self.comments.iter().find(|c| c.id == id)
    }

    pub fn ids(&self) -> HashSet<&str> {
        self.comments.iter().map(|c| c.id.as_str()).collect()
    }

    pub fn texts(&self) -> Vec<&str> {
        self.comments.iter().map(|c| c.text.as_str()).collect()
    }

    pub fn labels(&self) -> Vec<Label> {
        self.comments.iter().map(|c| c.label).collect()
    }

    pub fn with_label(&self, label: Label) -> impl Iterator<Item = &LabeledComment> {
        self.comments.iter().filter(move |c| c.label == label)
    }

    pub fn distribution(&self) -> LabelDistribution {
        distribution(self)
    }

    /// Appends `other`; the language tag widens to `Mixed` when they differ.
    pub fn concat(&self, other: &Corpus) -> Result<Corpus, CorpusError> {
        if self.split != other.split {
            return Err(CorpusError::SplitMismatch);
        }
        let tag = if self.language_tag == other.language_tag {
            self.language_tag
        } else {
            LanguageTag::Mixed
        };
        let mut comments = self.comments.clone();
        comments.extend(other.comments.iter().cloned());
        Corpus::new(comments, self.split, tag)
    }
}

pub fn distribution(corpus: &Corpus) -> LabelDistribution {
    let mut counts = [0usize; 3];
    for c in &corpus.comments {
        counts[c.label.index()] += 1;
    }
    LabelDistribution::from_counts(counts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn comment(id: &str, label: Label) -> LabeledComment {
        LabeledComment::raw(id, "some text", label, Language::En).unwrap()
    }

    #[test]
    fn label_parsing_is_strict_about_the_class_set() {
        assert_eq!("oag".parse::<Label>().unwrap(), Label::Oag);
        assert_eq!(" CAG ".parse::<Label>().unwrap(), Label::Cag);
        assert!("GEN".parse::<Label>().is_err());
        assert!("".parse::<Label>().is_err());
    }

    #[test]
    fn comment_invariants() {
        assert!(LabeledComment::raw("a", "   ", Label::Nag, Language::En).is_err());
        let c = LabeledComment::raw("a", "  hi there \n", Label::Nag, Language::En).unwrap();
        assert_eq!(c.text(), "hi there");
        assert!(LabeledComment::build(
            "b".into(),
            "x",
            Label::Nag,
            Language::En,
            Provenance::Raw,
            Some("a".into())
        )
        .is_err());
        assert!(LabeledComment::build(
            "b".into(),
            "x",
            Label::Nag,
            Language::En,
            Provenance::Translated,
            None
        )
        .is_err());
    }

    #[test]
    fn corpus_rejects_duplicates_and_foreign_languages() {
        let dup = Corpus::new(
            vec![comment("a", Label::Nag), comment("a", Label::Oag)],
            Split::Training,
            LanguageTag::Single(Language::En),
        );
        assert!(matches!(dup, Err(CorpusError::DuplicateId(id)) if id == "a"));

        let bn = LabeledComment::raw("b", "x", Label::Nag, Language::Bn).unwrap();
        let mixed = Corpus::new(
            vec![comment("a", Label::Nag), bn.clone()],
            Split::Training,
            LanguageTag::Single(Language::En),
        );
        assert!(matches!(mixed, Err(CorpusError::LanguageMismatch { .. })));
        assert!(Corpus::new(
            vec![comment("a", Label::Nag), bn],
            Split::Training,
            LanguageTag::Mixed
        )
        .is_ok());
    }

    #[test]
    fn empty_corpus_distribution_is_zero() {
        let c = Corpus::empty(Split::Testing, LanguageTag::Mixed);
        assert_eq!(c.distribution(), LabelDistribution::new(0, 0, 0));
    }

    #[test]
    fn distribution_is_additive_under_concat() {
        let a = Corpus::new(
            vec![comment("a1", Label::Nag), comment("a2", Label::Cag)],
            Split::Training,
            LanguageTag::Single(Language::En),
        )
        .unwrap();
        let b = Corpus::new(
            vec![
                comment("b1", Label::Oag),
                comment("b2", Label::Oag),
                comment("b3", Label::Nag),
            ],
            Split::Training,
            LanguageTag::Single(Language::En),
        )
        .unwrap();
        let joined = a.concat(&b).unwrap();
        // brute-force recount
        let mut counts = [0; 3];
        for c in joined.comments() {
            counts[c.label().index()] += 1;
        }
        assert_eq!(joined.distribution(), LabelDistribution::from_counts(counts));
        assert_eq!(joined.distribution(), a.distribution() + b.distribution());
    }
}
