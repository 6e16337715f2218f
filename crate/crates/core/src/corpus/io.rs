use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{
    Corpus, CorpusError, LabelDistribution, Label, LabeledComment, Language, LanguageTag,
    Provenance, Split,
};
use crate::seed::hex_digest;

const LANGUAGE_COLUMN: &str = "language";
const PROVENANCE_COLUMN: &str = "provenance";
const SOURCE_COLUMN: &str = "source_id";

/// Names the columns that hold each comment field in a delimited file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMap {
    pub id: String,
    pub text: String,
    pub label: String,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
}

fn default_delimiter() -> char {
    ','
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            id: "id".into(),
            text: "text".into(),
            label: "label".into(),
            delimiter: ',',
        }
    }
}

impl ColumnMap {
    /// Column names used by the TRAC-2 release files.
    pub fn trac2() -> Self {
        Self {
            id: "ID".into(),
            text: "Text".into(),
            label: "Sub-task A".into(),
            delimiter: ',',
        }
    }
}

/// Loads a delimited UTF-8 file with a header row.
///
/// Files written by [`save_corpus`] carry `language`, `provenance` and
/// `source_id` columns which are read back when present; otherwise every row
/// is a raw comment in `language`. Row order is preserved.
pub fn load_corpus(
    path: &Path,
    language: Language,
    split: Split,
    columns: &ColumnMap,
) -> Result<Corpus, CorpusError> {
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let delimiter = u8::try_from(columns.delimiter).map_err(|_| CorpusError::Csv {
        path: path.to_path_buf(),
        message: format!("delimiter {:?} is not a single byte", columns.delimiter),
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .flexible(true)
        .from_reader(BufReader::new(file));
    let csv_err = |e: csv::Error| CorpusError::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    };

    let headers = reader.headers().map_err(csv_err)?.clone();
    let width = headers.len();
    let find = |name: &str| headers.iter().position(|h| h.trim() == name);
    let require = |name: &str| {
        find(name).ok_or_else(|| CorpusError::MissingColumn {
            path: path.to_path_buf(),
            column: name.to_string(),
        })
    };
    let id_col = require(&columns.id)?;
    let text_col = require(&columns.text)?;
    let label_col = require(&columns.label)?;
    let lang_col = find(LANGUAGE_COLUMN);
    let prov_col = find(PROVENANCE_COLUMN);
    let source_col = find(SOURCE_COLUMN);

    let mut comments = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != width {
            return Err(CorpusError::MalformedRow {
                path: path.to_path_buf(),
                line,
                expected: width,
                found: record.len(),
            });
        }
        let invalid = |message: String| CorpusError::InvalidRow {
            path: path.to_path_buf(),
            line,
            message,
        };
        let label_raw = &record[label_col];
        let label: Label = label_raw.parse().map_err(|_| CorpusError::UnknownLabel {
            path: path.to_path_buf(),
            line,
            value: label_raw.to_string(),
        })?;
        let row_language = match lang_col {
            Some(i) => record[i].parse().map_err(|e| invalid(format!("{e}")))?,
            None => language,
        };
        if row_language != language {
            return Err(invalid(format!(
                "row language {row_language} does not match requested {language}"
            )));
        }
        let provenance = match prov_col {
            Some(i) => record[i].parse().map_err(invalid)?,
            None => Provenance::Raw,
        };
        let source_id = source_col
            .map(|i| record[i].trim())
            .filter(|s| !s.is_empty())
            .map(str::to_string);
        let comment = LabeledComment::build(
            record[id_col].trim().to_string(),
            &record[text_col],
            label,
            row_language,
            provenance,
            source_id,
        )
        .map_err(|e| invalid(e.to_string()))?;
        comments.push(comment);
    }
    Corpus::new(comments, split, LanguageTag::Single(language))
}

/// Writes `corpus` as comma-separated UTF-8 with the three provenance
/// columns appended. Fields containing delimiters, quotes or line breaks are
/// quoted so [`load_corpus`] reproduces them exactly.
pub fn save_corpus(corpus: &Corpus, path: &Path) -> Result<(), CorpusError> {
    let bytes = serialize(corpus);
    let io_err = |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut file = File::create(path).map_err(io_err)?;
    file.write_all(&bytes).map_err(io_err)?;
    file.flush().map_err(io_err)
}

fn serialize(corpus: &Corpus) -> Vec<u8> {
    let mut writer = csv::WriterBuilder::new().from_writer(Vec::new());
    // writing into a Vec cannot fail
    writer
        .write_record([
            "id",
            "text",
            "label",
            LANGUAGE_COLUMN,
            PROVENANCE_COLUMN,
            SOURCE_COLUMN,
        ])
        .unwrap();
    for c in corpus.comments() {
        writer
            .write_record([
                c.id(),
                c.text(),
                c.label().as_str(),
                c.language().code(),
                c.provenance().as_str(),
                c.source_id().unwrap_or(""),
            ])
            .unwrap();
    }
    writer.into_inner().expect("in-memory writer")
}

impl Corpus {
    /// SHA-256 of the corpus's canonical serialization.
    pub fn content_hash(&self) -> String {
        hex_digest(&serialize(self))
    }
}

/// Bookkeeping written next to every persisted corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub language: LanguageTag,
    pub split: Split,
    pub distribution: LabelDistribution,
    pub provenance_counts: ProvenanceCounts,
    pub source_files: Vec<PathBuf>,
    pub seeds: Vec<u64>,
    pub content_hash: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProvenanceCounts {
    pub raw: usize,
    pub noise_aug: usize,
    pub translated: usize,
}

impl CorpusManifest {
    pub fn describe(corpus: &Corpus, source_files: Vec<PathBuf>, seeds: Vec<u64>) -> Self {
        let mut provenance_counts = ProvenanceCounts::default();
        for c in corpus.comments() {
            match c.provenance() {
                Provenance::Raw => provenance_counts.raw += 1,
                Provenance::NoiseAug => provenance_counts.noise_aug += 1,
                Provenance::Translated => provenance_counts.translated += 1,
            }
        }
        Self {
            language: corpus.language_tag(),
            split: corpus.split(),
            distribution: corpus.distribution(),
            provenance_counts,
            source_files,
            seeds,
            content_hash: corpus.content_hash(),
        }
    }
}

pub fn write_manifest(manifest: &CorpusManifest, path: &Path) -> Result<(), CorpusError> {
    let json = serde_json::to_string_pretty(manifest)?;
    std::fs::write(path, json + "\n").map_err(|source| CorpusError::Io {
        path: PathBuf::from(path),
        source,
    })
}
