use std::collections::HashMap;
use std::path::Path;

use super::{word_tokens, FeatureError};
use crate::corpus::Corpus;
use crate::seed::hex_digest;

pub const PAD: u32 = 0;
pub const UNK: u32 = 1;
const PAD_TOKEN: &str = "<pad>";
const UNK_TOKEN: &str = "<unk>";

/// Word → index map with `PAD = 0`, `UNK = 1` and contiguous indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, u32>,
    max_size: usize,
}

impl Vocabulary {
    fn from_words(real: Vec<String>, max_size: usize) -> Self {
        let mut words = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
        words.extend(real);
        let index = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();
        Self {
            words,
            index,
            max_size,
        }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.len() <= 2
    }

    pub fn max_size(&self) -> usize {
        self.max_size
    }

    pub fn get(&self, word: &str) -> Option<u32> {
        self.index.get(word).copied().filter(|&i| i > UNK)
    }

    pub fn id_or_unk(&self, word: &str) -> u32 {
        self.get(word).unwrap_or(UNK)
    }

    pub fn word(&self, id: u32) -> Option<&str> {
        self.words.get(id as usize).map(String::as_str)
    }

    /// Real words in index order (specials excluded).
    pub fn words(&self) -> &[String] {
        &self.words[2..]
    }

    /// Maps ids back to words, dropping padding.
    pub fn decode(&self, ids: &[u32]) -> Vec<String> {
        ids.iter()
            .filter(|&&i| i != PAD)
            .filter_map(|&i| self.word(i))
            .map(str::to_string)
            .collect()
    }

    pub fn fingerprint(&self) -> String {
        hex_digest(self.words.join("\n").as_bytes())
    }

    /// Two columns per line: `word<TAB>index`.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (i, w) in self.words.iter().enumerate() {
            out.push_str(w);
            out.push('\t');
            out.push_str(&i.to_string());
            out.push('\n');
        }
        out
    }

    pub fn from_tsv(contents: &str, max_size: usize) -> Result<Self, FeatureError> {
        let mut rows: Vec<(u32, String)> = Vec::new();
        for (n, line) in contents.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let (word, idx) = line
                .rsplit_once('\t')
                .ok_or_else(|| FeatureError::Vocabulary(format!("line {}: missing tab", n + 1)))?;
            let idx: u32 = idx
                .parse()
                .map_err(|_| FeatureError::Vocabulary(format!("line {}: bad index", n + 1)))?;
            rows.push((idx, word.to_string()));
        }
        rows.sort();
        let contiguous = rows.iter().enumerate().all(|(i, (idx, _))| *idx as usize == i);
        if !contiguous || rows.len() < 2 || rows[0].1 != PAD_TOKEN || rows[1].1 != UNK_TOKEN {
            return Err(FeatureError::Vocabulary(
                "indices must be contiguous from 0 with <pad> and <unk> first".into(),
            ));
        }
        Ok(Self::from_words(
            rows.into_iter().skip(2).map(|(_, w)| w).collect(),
            max_size,
        ))
    }

    pub fn save(&self, path: &Path) -> Result<(), FeatureError> {
        std::fs::write(path, self.to_tsv()).map_err(|e| FeatureError::Io(path.display().to_string(), e))
    }

    pub fn load(path: &Path, max_size: usize) -> Result<Self, FeatureError> {
        let contents = std::fs::read_to_string(path)
            .map_err(|e| FeatureError::Io(path.display().to_string(), e))?;
        Self::from_tsv(&contents, max_size)
    }
}

/// Keeps the `max_size - 2` most frequent tokens with frequency at least
/// `min_frequency`; ties go to the token seen first.
pub fn fit_vocabulary(
    corpus: &Corpus,
    max_size: usize,
    min_frequency: usize,
) -> Result<Vocabulary, FeatureError> {
    fit_vocabulary_from_texts(corpus.texts(), max_size, min_frequency)
}

pub fn fit_vocabulary_from_texts<'a>(
    texts: impl IntoIterator<Item = &'a str>,
    max_size: usize,
    min_frequency: usize,
) -> Result<Vocabulary, FeatureError> {
    if max_size < 3 {
        return Err(FeatureError::Vocabulary(format!(
            "max_size {max_size} leaves no room for a real word"
        )));
    }
    // word → (count, first occurrence)
    let mut stats: HashMap<String, (usize, usize)> = HashMap::new();
    let mut position = 0;
    for text in texts {
        for token in word_tokens(text) {
            let entry = stats.entry(token).or_insert((0, position));
            entry.0 += 1;
            position += 1;
        }
    }
    let mut ranked: Vec<(String, usize, usize)> = stats
        .into_iter()
        .filter(|(w, (count, _))| *count >= min_frequency && w != PAD_TOKEN && w != UNK_TOKEN)
        .map(|(w, (count, first))| (w, count, first))
        .collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
    ranked.truncate(max_size - 2);
    Ok(Vocabulary::from_words(
        ranked.into_iter().map(|(w, _, _)| w).collect(),
        max_size,
    ))
}
