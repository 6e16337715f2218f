//! Confusion matrices, precision/recall/F1/accuracy and the result tables.

mod report;

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Label, Language};

pub use report::{render_report, EpochRecord, ReportFiles, RunSummary};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("{golds} gold labels but {preds} predictions")]
    LengthMismatch { golds: usize, preds: usize },
    #[error("nothing to evaluate")]
    Empty,
    #[error("{} test id(s) also appear in training: {}", ids.len(), ids.join(", "))]
    TrainTestOverlap { ids: Vec<String> },
    #[error("prediction failed: {0}")]
    Predict(String),
    #[error("no runs to report")]
    NoRuns,
    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),
    #[error("unknown {kind} {value:?}")]
    Parse { kind: &'static str, value: String },
}

/// The six classifier families (BERT comes in two checkpoints).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    LstmAutoencoder,
    Lstm,
    Bilstm,
    Word2vecClassifier,
    BertBase,
    BertMultilingual,
    Gpt2Medium,
}

impl ModelKind {
    /// Table row order.
    pub const ALL: [ModelKind; 7] = [
        ModelKind::LstmAutoencoder,
        ModelKind::Lstm,
        ModelKind::Bilstm,
        ModelKind::Word2vecClassifier,
        ModelKind::BertBase,
        ModelKind::BertMultilingual,
        ModelKind::Gpt2Medium,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Lstm => "lstm",
            ModelKind::Bilstm => "bilstm",
            ModelKind::LstmAutoencoder => "lstm_autoencoder",
            ModelKind::Word2vecClassifier => "word2vec_classifier",
            ModelKind::BertBase => "bert_base",
            ModelKind::BertMultilingual => "bert_multilingual",
            ModelKind::Gpt2Medium => "gpt2_medium",
        }
    }

    /// Row label used in the result tables.
    pub fn display_name(self) -> &'static str {
        match self {
            ModelKind::Lstm => "LSTM",
            ModelKind::Bilstm => "BiLSTM",
            ModelKind::LstmAutoencoder => "Autoencoder",
            ModelKind::Word2vecClassifier => "Word2vec",
            ModelKind::BertBase => "BERT",
            ModelKind::BertMultilingual => "BERT Multilingual",
            ModelKind::Gpt2Medium => "gpt2",
        }
    }

    pub fn is_transformer(self) -> bool {
        matches!(
            self,
            ModelKind::BertBase | ModelKind::BertMultilingual | ModelKind::Gpt2Medium
        )
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == norm)
            .or(match norm.as_str() {
                "bert" => Some(ModelKind::BertBase),
                "mbert" => Some(ModelKind::BertMultilingual),
                "gpt2" => Some(ModelKind::Gpt2Medium),
                "word2vec" => Some(ModelKind::Word2vecClassifier),
                _ => None,
            })
            .ok_or(EvalError::Parse {
                kind: "model kind",
                value: s.to_string(),
            })
    }
}

/// Which training set a model saw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetVariant {
    Raw,
    SemiNoisy,
    MachineTranslated,
}

impl DatasetVariant {
    pub const ALL: [DatasetVariant; 3] = [
        DatasetVariant::Raw,
        DatasetVariant::SemiNoisy,
        DatasetVariant::MachineTranslated,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DatasetVariant::Raw => "raw",
            DatasetVariant::SemiNoisy => "semi_noisy",
            DatasetVariant::MachineTranslated => "machine_translated",
        }
    }
}

impl fmt::Display for DatasetVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DatasetVariant {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        DatasetVariant::ALL
            .into_iter()
            .find(|v| v.as_str() == norm)
            .or(match norm.as_str() {
                "noisy" | "augmented" => Some(DatasetVariant::SemiNoisy),
                "mt" | "translated" => Some(DatasetVariant::MachineTranslated),
                _ => None,
            })
            .ok_or(EvalError::Parse {
                kind: "dataset variant",
                value: s.to_string(),
            })
    }
}

/// 3×3 counts, rows = gold, columns = predicted, in `Label::ALL` order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub cells: [[u64; 3]; 3],
}

/// One-vs-rest counts for a single class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClassCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn from_cells(cells: [[u64; 3]; 3]) -> Self {
        Self { cells }
    }

    pub fn get(&self, gold: Label, pred: Label) -> u64 {
        self.cells[gold.index()][pred.index()]
    }

    pub fn add(&mut self, gold: Label, pred: Label) {
        self.cells[gold.index()][pred.index()] += 1;
    }

    pub fn total(&self) -> u64 {
        self.cells.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..3).map(|i| self.cells[i][i]).sum()
    }

    /// Row sum: how many test samples carry `label`.
    pub fn support(&self, label: Label) -> u64 {
        self.cells[label.index()].iter().sum()
    }

    /// Column sum: how often `label` was predicted.
    pub fn predicted(&self, label: Label) -> u64 {
        self.cells.iter().map(|row| row[label.index()]).sum()
    }

    pub fn class_counts(&self, label: Label) -> ClassCounts {
        let tp = self.get(label, label);
        let fp = self.predicted(label) - tp;
        let fn_ = self.support(label) - tp;
        ClassCounts {
            tp,
            fp,
            fn_,
            tn: self.total() - tp - fp - fn_,
        }
    }
}

/// Tallies `cell[gold][pred]`.
pub fn confusion(golds: &[Label], preds: &[Label]) -> Result<ConfusionMatrix, EvalError> {
    if golds.len() != preds.len() {
        return Err(EvalError::LengthMismatch {
            golds: golds.len(),
            preds: preds.len(),
        });
    }
    if golds.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut cm = ConfusionMatrix::default();
    for (&g, &p) in golds.iter().zip(preds) {
        cm.add(g, p);
    }
    Ok(cm)
}

/// A ratio that may have hit a zero denominator, in which case `value` is 0
/// and `degenerate` is set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ratio {
    pub value: f64,
    pub degenerate: bool,
}

impl Ratio {
    fn of(num: f64, den: f64) -> Self {
        if den == 0.0 {
            Ratio {
                value: 0.0,
                degenerate: true,
            }
        } else {
            Ratio {
                value: num / den,
                degenerate: false,
            }
        }
    }
}

pub fn precision(cm: &ConfusionMatrix, label: Label) -> Ratio {
    let c = cm.class_counts(label);
    Ratio::of(c.tp as f64, (c.tp + c.fp) as f64)
}

pub fn recall(cm: &ConfusionMatrix, label: Label) -> Ratio {
    let c = cm.class_counts(label);
    Ratio::of(c.tp as f64, (c.tp + c.fn_) as f64)
}

pub fn f1(cm: &ConfusionMatrix, label: Label) -> Ratio {
    let p = precision(cm, label);
    let r = recall(cm, label);
    let f = Ratio::of(2.0 * p.value * r.value, p.value + r.value);
    Ratio {
        value: f.value,
        degenerate: f.degenerate || p.degenerate || r.degenerate,
    }
}

pub fn accuracy(cm: &ConfusionMatrix) -> f64 {
    Ratio::of(cm.trace() as f64, cm.total() as f64).value
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    /// Per-class values weighted by support.
    #[default]
    Weighted,
    Macro,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: Label,
    pub precision: Ratio,
    pub recall: Ratio,
    pub f1: Ratio,
    pub support: u64,
}

/// Aggregate scores plus the per-class breakdown they came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub averaging: Averaging,
    pub per_class: Vec<ClassMetrics>,
    pub total: u64,
}

impl Metrics {
    pub fn class(&self, label: Label) -> &ClassMetrics {
        &self.per_class[label.index()]
    }
}

pub fn aggregate_metrics(cm: &ConfusionMatrix) -> Metrics {
    aggregate_metrics_with(cm, Averaging::Weighted)
}

pub fn aggregate_metrics_with(cm: &ConfusionMatrix, averaging: Averaging) -> Metrics {
    let per_class: Vec<ClassMetrics> = Label::ALL
        .iter()
        .map(|&label| ClassMetrics {
            label,
            precision: precision(cm, label),
            recall: recall(cm, label),
            f1: f1(cm, label),
            support: cm.support(label),
        })
        .collect();
    let total = cm.total();
    let mean = |get: fn(&ClassMetrics) -> f64| -> f64 {
        match averaging {
            Averaging::Weighted => {
                if total == 0 {
                    return 0.0;
                }
                per_class
                    .iter()
                    .map(|c| c.support as f64 * get(c))
                    .sum::<f64>()
                    / total as f64
            }
            Averaging::Macro => per_class.iter().map(get).sum::<f64>() / per_class.len() as f64,
        }
    };
    let precision = mean(|c| c.precision.value);
    let f1 = mean(|c| c.f1.value);
    // Weighted recall is sum_k TP_k / total, which is the accuracy itself;
    // computing it that way keeps the identity exact in floating point.
    let recall = match averaging {
        Averaging::Weighted => accuracy(cm),
        Averaging::Macro => mean(|c| c.recall.value),
    };
    Metrics {
        accuracy: accuracy(cm),
        precision,
        recall,
        f1,
        averaging,
        per_class,
        total,
    }
}

/// Metrics for one (model, language, variant) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub model: ModelKind,
    pub language: Language,
    pub variant: DatasetVariant,
    pub metrics: Metrics,
    pub confusion: ConfusionMatrix,
}

impl MetricReport {
    pub fn new(
        model: ModelKind,
        language: Language,
        variant: DatasetVariant,
        confusion: ConfusionMatrix,
        averaging: Averaging,
    ) -> Self {
        Self {
            model,
            language,
            variant,
            metrics: aggregate_metrics_with(&confusion, averaging),
            confusion,
        }
    }

    pub fn accuracy(&self) -> f64 {
        self.metrics.accuracy
    }
}

/// Anything that maps texts to labels, with the training ids it was fitted on.
pub trait Predictor {
    fn model_kind(&self) -> ModelKind;

    fn training_ids(&self) -> &HashSet<String>;

    fn predict_labels(&self, texts: &[&str]) -> Result<Vec<Label>, EvalError>;
}

pub const EVAL_BATCH_SIZE: usize = 64;

/// Predicts the test corpus batch by batch after checking it shares no ids
/// with the predictor's training data.
pub fn evaluate(
    predictor: &dyn Predictor,
    test: &Corpus,
    variant: DatasetVariant,
    language: Language,
) -> Result<MetricReport, EvalError> {
    let train = predictor.training_ids();
    let mut overlap: Vec<String> = test
        .comments()
        .iter()
        .map(|c| c.id())
        .filter(|id| train.contains(*id))
        .map(str::to_string)
        .collect();
    if !overlap.is_empty() {
        overlap.sort();
        return Err(EvalError::TrainTestOverlap { ids: overlap });
    }
    let texts = test.texts();
    let mut preds = Vec::with_capacity(texts.len());
    for chunk in texts.chunks(EVAL_BATCH_SIZE) {
        let labels = predictor.predict_labels(chunk)?;
        if labels.len() != chunk.len() {
            return Err(EvalError::LengthMismatch {
                golds: chunk.len(),
                preds: labels.len(),
            });
        }
        preds.extend(labels);
    }
    let golds = test.labels();
    let cm = confusion(&golds, &preds)?;
    Ok(MetricReport::new(
        predictor.model_kind(),
        language,
        variant,
        cm,
        Averaging::Weighted,
    ))
}
