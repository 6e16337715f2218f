//! One handle over every model family: build, predict, save, load.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use aggrobench_core::corpus::{Corpus, Label};
use aggrobench_core::evaluation::{EvalError, ModelKind, Predictor};
use aggrobench_core::features::{encode_word_index, fit_vocabulary, TokenizedBatch, Vocabulary};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::nn::argmax;
use crate::recurrent::{RecurrentNet, NUM_CLASSES};
use crate::spec::ModelSpec;
use crate::transformer::checkpoint::CheckpointResolver;
use crate::transformer::TransformerClassifier;
use crate::ModelError;

const SPEC_FILE: &str = "spec.json";
const VOCAB_FILE: &str = "vocab.tsv";
const WEIGHTS_FILE: &str = "weights.json";
const TRANSFORMER_DIR: &str = "transformer";

/// Word-index vocabulary plus a recurrent network.
#[derive(Debug, Clone)]
pub struct RecurrentClassifier {
    pub spec: ModelSpec,
    pub vocab: Vocabulary,
    pub net: RecurrentNet,
}

#[derive(Debug)]
pub enum Classifier {
    Recurrent(RecurrentClassifier),
    Transformer {
        spec: ModelSpec,
        model: TransformerClassifier,
    },
}

/// Class probabilities and the argmax label for each input.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub probabilities: Vec<[f64; NUM_CLASSES]>,
    pub labels: Vec<Label>,
}

impl Prediction {
    fn from_probabilities(probabilities: Vec<[f64; NUM_CLASSES]>) -> Self {
        let labels = probabilities
            .iter()
            .map(|p| Label::from_index(argmax(p)).expect("three classes"))
            .collect();
        Self { probabilities, labels }
    }
}

/// Fresh, untrained classifier for `spec`. Recurrent kinds fit their
/// vocabulary on `train`; transformer kinds resolve their checkpoint.
pub fn build_classifier(
    spec: &ModelSpec,
    train: &Corpus,
    resolver: &CheckpointResolver,
    seed: u64,
) -> Result<Classifier, ModelError> {
    spec.validate()?;
    if spec.kind.is_transformer() {
        let dir = resolver.resolve(&spec.checkpoint_id())?;
        let model = TransformerClassifier::from_checkpoint(spec.kind, &dir, spec.hyper.max_len, seed)?;
        return Ok(Classifier::Transformer {
            spec: spec.clone(),
            model,
        });
    }
    if train.is_empty() {
        return Err(ModelError::EmptyCorpus);
    }
    let h = &spec.hyper;
    let vocab = fit_vocabulary(train, h.vocab_size, h.min_frequency)?;
    let bidirectional = spec.kind == ModelKind::Bilstm;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let net = RecurrentNet::random(vocab.len(), h.embedding_dim, h.hidden_size, bidirectional, &mut rng);
    Ok(Classifier::Recurrent(RecurrentClassifier {
        spec: spec.clone(),
        vocab,
        net,
    }))
}

impl RecurrentClassifier {
    pub fn encode(&self, texts: &[&str]) -> TokenizedBatch {
        encode_word_index(texts, &self.vocab, self.spec.hyper.max_len)
    }

    pub fn probabilities(&self, batch: &TokenizedBatch) -> Result<Vec<[f64; NUM_CLASSES]>, ModelError> {
        if batch.vocab_fingerprint != self.vocab.fingerprint() {
            return Err(ModelError::Feature(
                aggrobench_core::features::FeatureError::FingerprintMismatch {
                    expected: self.vocab.fingerprint(),
                    found: batch.vocab_fingerprint.clone(),
                },
            ));
        }
        (0..batch.len())
            .map(|r| {
                let p = self.net.probabilities(batch.row(r))?;
                Ok([p[0], p[1], p[2]])
            })
            .collect()
    }
}

impl Classifier {
    pub fn spec(&self) -> &ModelSpec {
        match self {
            Classifier::Recurrent(r) => &r.spec,
            Classifier::Transformer { spec, .. } => spec,
        }
    }

    pub fn kind(&self) -> ModelKind {
        self.spec().kind
    }

    pub fn predict(&self, texts: &[&str]) -> Result<Prediction, ModelError> {
        let probabilities = match self {
            Classifier::Recurrent(r) => r.probabilities(&r.encode(texts))?,
            Classifier::Transformer { model, .. } => {
                let mut out = Vec::with_capacity(texts.len());
                for chunk in texts.chunks(aggrobench_core::evaluation::EVAL_BATCH_SIZE) {
                    out.extend(model.probabilities(&model.encode(chunk)?)?);
                }
                out
            }
        };
        Ok(Prediction::from_probabilities(probabilities))
    }

    pub fn save(&self, dir: &Path) -> Result<(), ModelError> {
        fs::create_dir_all(dir).map_err(|e| ModelError::Io(dir.display().to_string(), e))?;
        let write = |name: &str, contents: String| {
            let p = dir.join(name);
            fs::write(&p, contents).map_err(|e| ModelError::Io(p.display().to_string(), e))
        };
        write(SPEC_FILE, serde_json::to_string_pretty(self.spec())?)?;
        match self {
            Classifier::Recurrent(r) => {
                r.vocab.save(&dir.join(VOCAB_FILE))?;
                write(WEIGHTS_FILE, serde_json::to_string(&r.net)?)
            }
            Classifier::Transformer { model, .. } => model.save(&dir.join(TRANSFORMER_DIR)),
        }
    }

    pub fn load(dir: &Path) -> Result<Self, ModelError> {
        let read = |name: &str| {
            let p = dir.join(name);
            fs::read_to_string(&p).map_err(|e| ModelError::Io(p.display().to_string(), e))
        };
        let spec: ModelSpec = serde_json::from_str(&read(SPEC_FILE)?)?;
        spec.validate()?;
        if spec.kind.is_transformer() {
            let model = TransformerClassifier::load(&dir.join(TRANSFORMER_DIR))?;
            return Ok(Classifier::Transformer { spec, model });
        }
        let vocab = Vocabulary::load(&dir.join(VOCAB_FILE), spec.hyper.vocab_size)?;
        let net: RecurrentNet = serde_json::from_str(&read(WEIGHTS_FILE)?)?;
        if net.vocab_size() != vocab.len() {
            return Err(ModelError::Shape(format!(
                "weights cover {} words, vocabulary has {}",
                net.vocab_size(),
                vocab.len()
            )));
        }
        Ok(Classifier::Recurrent(RecurrentClassifier { spec, vocab, net }))
    }
}

/// A trained classifier together with the ids it was trained on, so
/// evaluation can refuse overlapping test sets.
#[derive(Debug)]
pub struct TrainedModel {
    pub classifier: Classifier,
    pub training_ids: HashSet<String>,
}

impl TrainedModel {
    pub fn new(classifier: Classifier, train: &Corpus) -> Self {
        Self {
            classifier,
            training_ids: train.ids().into_iter().map(str::to_string).collect(),
        }
    }
}

impl Predictor for TrainedModel {
    fn model_kind(&self) -> ModelKind {
        self.classifier.kind()
    }

    fn training_ids(&self) -> &HashSet<String> {
        &self.training_ids
    }

    fn predict_labels(&self, texts: &[&str]) -> Result<Vec<Label>, EvalError> {
        self.classifier
            .predict(texts)
            .map(|p| p.labels)
            .map_err(|e| EvalError::Predict(e.to_string()))
    }
}
