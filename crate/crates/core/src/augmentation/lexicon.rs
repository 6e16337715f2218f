use std::collections::HashMap;
use std::path::Path;

use super::AugmentError;
use crate::corpus::Language;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Replacement {
    pub word: String,
    pub antonym: bool,
}

/// Word → replacement table used by the synonym-swap operator.
///
/// Keys are lowercased, so lookups ignore case for cased scripts. File format:
/// one entry per line, `word<TAB>repl[,repl...]`, a `!` before a replacement
/// marks it as an antonym.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SynonymLexicon {
    language: Option<Language>,
    entries: HashMap<String, Vec<Replacement>>,
}

impl SynonymLexicon {
    pub fn new(language: Language) -> Self {
        Self {
            language: Some(language),
            entries: HashMap::new(),
        }
    }

    pub fn language(&self) -> Option<Language> {
        self.language
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn insert(&mut self, word: &str, replacements: Vec<Replacement>) -> Result<(), AugmentError> {
        let key = word.to_lowercase();
        let replacements: Vec<Replacement> = replacements
            .into_iter()
            .filter(|r| r.word.to_lowercase() != key)
            .collect();
        if replacements.is_empty() {
            return Err(AugmentError::Lexicon(format!(
                "entry {word:?} has no replacement other than itself"
            )));
        }
        self.entries.entry(key).or_default().extend(replacements);
        Ok(())
    }

    pub fn with_synonyms(mut self, word: &str, synonyms: &[&str]) -> Self {
        let reps = synonyms
            .iter()
            .map(|s| Replacement {
                word: s.to_string(),
                antonym: false,
            })
            .collect();
        self.insert(word, reps).expect("synonym list maps to other words");
        self
    }

    /// Replacement candidates for `word`, antonyms included only on request.
    pub fn candidates(&self, word: &str, allow_antonyms: bool) -> Vec<&str> {
        self.entries
            .get(&word.to_lowercase())
            .map(|reps| {
                reps.iter()
                    .filter(|r| allow_antonyms || !r.antonym)
                    .map(|r| r.word.as_str())
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn parse(language: Language, contents: &str) -> Result<Self, AugmentError> {
        let mut lexicon = SynonymLexicon::new(language);
        for (n, line) in contents.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (word, reps) = line.split_once('\t').ok_or_else(|| {
                AugmentError::Lexicon(format!("line {}: expected word<TAB>replacements", n + 1))
            })?;
            let reps = reps
                .split(',')
                .map(str::trim)
                .filter(|r| !r.is_empty())
                .map(|r| match r.strip_prefix('!') {
                    Some(w) => Replacement {
                        word: w.to_string(),
                        antonym: true,
                    },
                    None => Replacement {
                        word: r.to_string(),
                        antonym: false,
                    },
                })
                .collect();
            lexicon
                .insert(word.trim(), reps)
                .map_err(|e| AugmentError::Lexicon(format!("line {}: {e}", n + 1)))?;
        }
        Ok(lexicon)
    }

    pub fn load(language: Language, path: &Path) -> Result<Self, AugmentError> {
        let contents = std::fs::read_to_string(path)
            .map_err(|e| AugmentError::Lexicon(format!("{}: {e}", path.display())))?;
        Self::parse(language, &contents)
    }
}

/// Stop-word list: one word per line.
pub fn load_stopwords(path: &Path) -> Result<Vec<String>, AugmentError> {
    let contents = std::fs::read_to_string(path)
        .map_err(|e| AugmentError::Lexicon(format!("{}: {e}", path.display())))?;
    Ok(parse_stopwords(&contents))
}

pub fn parse_stopwords(contents: &str) -> Vec<String> {
    contents
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}
