//! The shared epoch loop: seeded shuffling, mini-batch Adam, per-epoch train
//! and validation metrics, early stopping on validation loss.

use std::collections::HashMap;
use std::fs;
use std::path::PathBuf;

use aggrobench_core::corpus::{Corpus, Language};
use aggrobench_core::evaluation::EpochRecord;
use aggrobench_core::evaluation::ModelKind;
use aggrobench_core::seed::derive_seed;
use candle_core::Tensor;
use candle_nn::{AdamW, Optimizer, ParamsAdamW};
use ndarray::Array1;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autoencoder::{autoencoder_fit, AutoencoderConfig, SequenceAutoencoder};
use crate::classifier::{Classifier, RecurrentClassifier};
use crate::nn::{Adam, ParamSet};
use crate::recurrent::{ParamGroup, NUM_CLASSES};
use crate::skipgram::{skipgram_train, SkipGramConfig};
use crate::spec::Hyperparameters;
use crate::transformer::TransformerClassifier;
use crate::ModelError;

#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    pub seed: u64,
    /// Where to write the best weights and `run.json`, if anywhere.
    pub checkpoint_dir: Option<PathBuf>,
    /// Content hash of the training corpus, copied into the manifest.
    pub corpus_manifest: Option<String>,
}

/// Manifest of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRun {
    pub kind: ModelKind,
    pub language: Language,
    pub hyper: Hyperparameters,
    pub seed: u64,
    pub curve: Vec<EpochRecord>,
    /// 1-based epoch whose weights were kept.
    pub best_epoch: usize,
    pub epochs_trained: usize,
    pub checkpoint: Option<PathBuf>,
    pub corpus_manifest: Option<String>,
    /// Autoencoder reconstruction loss per pretraining epoch.
    pub pretraining_curve: Vec<f64>,
}

const RUN_FILE: &str = "run.json";
const MODEL_DIR: &str = "model";

/// Trains `classifier` in place. With an empty validation corpus the
/// training metrics stand in for validation ones, so early stopping watches
/// the training loss.
pub fn train(
    classifier: &mut Classifier,
    train: &Corpus,
    validation: &Corpus,
    options: &TrainOptions,
) -> Result<TrainingRun, ModelError> {
    if train.is_empty() {
        return Err(ModelError::EmptyCorpus);
    }
    let spec = classifier.spec().clone();
    let texts = train.texts();
    let golds: Vec<usize> = train.labels().iter().map(|l| l.index()).collect();
    let val_texts = validation.texts();
    let val_golds: Vec<usize> = validation.labels().iter().map(|l| l.index()).collect();
    let data = Split {
        texts: &texts,
        golds: &golds,
        val_texts: &val_texts,
        val_golds: &val_golds,
    };
    let (curve, best_epoch, pretraining_curve) = match classifier {
        Classifier::Recurrent(r) => train_recurrent(r, train, &data, options.seed)?,
        Classifier::Transformer { model, .. } => {
            let (curve, best) = train_transformer(model, &spec.hyper, &data, options.seed)?;
            (curve, best, Vec::new())
        }
    };
    let mut run = TrainingRun {
        kind: spec.kind,
        language: spec.language,
        hyper: spec.hyper.clone(),
        seed: options.seed,
        epochs_trained: curve.len(),
        curve,
        best_epoch,
        checkpoint: None,
        corpus_manifest: options.corpus_manifest.clone(),
        pretraining_curve,
    };
    if let Some(dir) = &options.checkpoint_dir {
        let model_dir = dir.join(MODEL_DIR);
        classifier.save(&model_dir)?;
        run.checkpoint = Some(model_dir);
        let path = dir.join(RUN_FILE);
        fs::write(&path, serde_json::to_string_pretty(&run)?)
            .map_err(|e| ModelError::Io(path.display().to_string(), e))?;
    }
    Ok(run)
}

struct Split<'a> {
    texts: &'a [&'a str],
    golds: &'a [usize],
    val_texts: &'a [&'a str],
    val_golds: &'a [usize],
}

/// Mean cross-entropy and accuracy of predicted distributions.
fn score(probs: &[[f64; NUM_CLASSES]], golds: &[usize]) -> (f64, f64) {
    if golds.is_empty() {
        return (0.0, 0.0);
    }
    let mut loss = 0.0;
    let mut hits = 0usize;
    for (p, &g) in probs.iter().zip(golds) {
        loss -= p[g].max(1e-12).ln();
        if crate::nn::argmax(p) == g {
            hits += 1;
        }
    }
    let n = golds.len() as f64;
    (loss / n, hits as f64 / n)
}

/// Tracks the best validation loss and says when patience has run out.
struct EarlyStop {
    patience: usize,
    best_loss: f64,
    best_epoch: usize,
    since_best: usize,
}

impl EarlyStop {
    fn new(patience: usize) -> Self {
        Self {
            patience,
            best_loss: f64::INFINITY,
            best_epoch: 0,
            since_best: 0,
        }
    }

    /// Returns `true` when `loss` is a new best.
    fn observe(&mut self, epoch: usize, loss: f64) -> bool {
        if loss < self.best_loss {
            self.best_loss = loss;
            self.best_epoch = epoch;
            self.since_best = 0;
            true
        } else {
            self.since_best += 1;
            false
        }
    }

    fn exhausted(&self) -> bool {
        self.patience > 0 && self.since_best >= self.patience
    }
}

fn record(epoch: usize, train: (f64, f64), val: Option<(f64, f64)>) -> EpochRecord {
    let val = val.unwrap_or(train);
    EpochRecord {
        epoch,
        train_loss: train.0,
        train_accuracy: train.1,
        validation_loss: val.0,
        validation_accuracy: val.1,
    }
}

fn train_recurrent(
    model: &mut RecurrentClassifier,
    corpus: &Corpus,
    data: &Split,
    seed: u64,
) -> Result<(Vec<EpochRecord>, usize, Vec<f64>), ModelError> {
    let h = model.spec.hyper.clone();
    let kind = model.spec.kind;
    let batch = model.encode(data.texts);
    let rows: Vec<Vec<u32>> = (0..batch.len()).map(|r| batch.row(r).to_vec()).collect();

    let mut pretraining_curve = Vec::new();
    let mut mask: Option<Vec<bool>> = None;
    match kind {
        ModelKind::Word2vecClassifier => {
            let cfg = SkipGramConfig {
                dim: h.embedding_dim,
                window: h.skipgram.window,
                negatives: h.skipgram.negatives,
                epochs: h.skipgram.epochs,
                learning_rate: h.skipgram.learning_rate,
                seed: derive_seed(seed, &[b"skipgram"]),
            };
            let sg = skipgram_train(corpus, &model.vocab, &cfg)?;
            model.net.embedding = sg.into_embedding().weights().clone();
        }
        ModelKind::LstmAutoencoder => {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[b"autoencoder-init"]));
            let ae = SequenceAutoencoder::random(model.vocab.len(), h.embedding_dim, h.hidden_size, &mut rng);
            let cfg = AutoencoderConfig {
                epochs: h.autoencoder.epochs,
                learning_rate: h.autoencoder.learning_rate,
                batch_size: h.batch_size,
                seed: derive_seed(seed, &[b"autoencoder"]),
            };
            let fitted = autoencoder_fit(ae, &rows, &cfg)?;
            model.net.embedding = fitted.model.embedding;
            model.net.forward = fitted.model.encoder;
            pretraining_curve = fitted.loss_curve;
            if h.autoencoder.freeze_encoder {
                mask = Some(model.net.groups().iter().map(|g| *g == ParamGroup::Head).collect());
            }
        }
        _ => {}
    }

    let val_batch = model.encode(data.val_texts);
    let evaluate = |m: &RecurrentClassifier| -> Result<((f64, f64), Option<(f64, f64)>), ModelError> {
        let tr = score(&m.probabilities(&batch)?, data.golds);
        let va = if data.val_golds.is_empty() {
            None
        } else {
            Some(score(&m.probabilities(&val_batch)?, data.val_golds))
        };
        Ok((tr, va))
    };

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[b"epochs"]));
    let mut adam = Adam::new(h.learning_rate);
    let mut order: Vec<usize> = (0..rows.len()).collect();
    let mut stop = EarlyStop::new(h.patience);
    let mut best = model.net.clone();
    let mut curve = Vec::new();
    let rep = model.net.representation_size();
    let keep = 1.0 - h.dropout;
    for epoch in 1..=h.max_epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(h.batch_size) {
            let mut grads = model.net.zeroed();
            for &k in chunk {
                let dropout = (h.dropout > 0.0).then(|| {
                    Array1::from_shape_fn(rep, |_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
                });
                model.net.loss_and_grad(&rows[k], data.golds[k], dropout.as_ref(), &mut grads)?;
            }
            grads.scale(1.0 / chunk.len() as f64);
            adam.step(&mut model.net, &grads, mask.as_deref());
        }
        if !model.net.is_finite() {
            return Err(ModelError::NonFiniteLoss { epoch });
        }
        let (tr, va) = evaluate(model)?;
        let rec = record(epoch, tr, va);
        if !rec.train_loss.is_finite() || !rec.validation_loss.is_finite() {
            return Err(ModelError::NonFiniteLoss { epoch });
        }
        curve.push(rec);
        if stop.observe(epoch, rec.validation_loss) {
            best = model.net.clone();
        }
        if stop.exhausted() {
            break;
        }
    }
    model.net = best;
    Ok((curve, stop.best_epoch, pretraining_curve))
}

fn transformer_probs(
    model: &TransformerClassifier,
    texts: &[&str],
    batch_size: usize,
) -> Result<Vec<[f64; NUM_CLASSES]>, ModelError> {
    let mut out = Vec::with_capacity(texts.len());
    for chunk in texts.chunks(batch_size.max(1)) {
        out.extend(model.probabilities(&model.encode(chunk)?)?);
    }
    Ok(out)
}

fn train_transformer(
    model: &mut TransformerClassifier,
    h: &Hyperparameters,
    data: &Split,
    seed: u64,
) -> Result<(Vec<EpochRecord>, usize), ModelError> {
    let params = ParamsAdamW {
        lr: h.learning_rate,
        ..ParamsAdamW::default()
    };
    let mut opt = AdamW::new(model.vars(), params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[b"epochs"]));
    let mut order: Vec<usize> = (0..data.texts.len()).collect();
    let mut stop = EarlyStop::new(h.patience);
    let mut best: HashMap<String, Tensor> = model.snapshot()?;
    let mut curve = Vec::new();
    for epoch in 1..=h.max_epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(h.batch_size) {
            let texts: Vec<&str> = chunk.iter().map(|&k| data.texts[k]).collect();
            let labels: Vec<u32> = chunk.iter().map(|&k| data.golds[k] as u32).collect();
            let loss = model.loss(&model.encode(&texts)?, &labels)?;
            opt.backward_step(&loss)?;
        }
        let tr = score(&transformer_probs(model, data.texts, h.batch_size)?, data.golds);
        let va = if data.val_golds.is_empty() {
            None
        } else {
            Some(score(&transformer_probs(model, data.val_texts, h.batch_size)?, data.val_golds))
        };
        let rec = record(epoch, tr, va);
        if !rec.train_loss.is_finite() || !rec.validation_loss.is_finite() {
            return Err(ModelError::NonFiniteLoss { epoch });
        }
        curve.push(rec);
        if stop.observe(epoch, rec.validation_loss) {
            best = model.snapshot()?;
        }
        if stop.exhausted() {
            break;
        }
    }
    model.restore(&best)?;
    Ok((curve, stop.best_epoch))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::build_classifier;
    use crate::spec::ModelSpec;
    use crate::transformer::checkpoint::{write_stand_in_checkpoint, CheckpointResolver, StandInFamily};
    use aggrobench_core::corpus::{Label, LabeledComment, LanguageTag, Split as CorpusSplit};

    fn corpus(split: CorpusSplit, rows: &[(&str, Label)], offset: usize) -> Corpus {
        let comments = rows
            .iter()
            .enumerate()
            .map(|(i, (t, l))| LabeledComment::raw(format!("c{}", i + offset), t, *l, Language::En).unwrap())
            .collect();
        Corpus::new(comments, split, LanguageTag::Single(Language::En)).unwrap()
    }

    fn toy() -> Corpus {
        let mut rows = Vec::new();
        for i in 0..12 {
            rows.push((["have a nice day", "lovely weather friend"][i % 2], Label::Nag));
            rows.push((["you stupid idiot", "shut up idiot"][i % 2], Label::Oag));
            rows.push((["people like you are rotten", "your kind ruins everything"][i % 2], Label::Cag));
        }
        corpus(CorpusSplit::Training, &rows, 0)
    }

    fn small(kind: ModelKind) -> ModelSpec {
        let mut h = Hyperparameters::for_kind(kind);
        h.embedding_dim = 8;
        h.hidden_size = 8;
        h.max_epochs = 25;
        h.learning_rate = 0.02;
        h.batch_size = 6;
        h.dropout = 0.0;
        h.patience = 0;
        h.skipgram.negatives = 2;
        h.autoencoder.epochs = 3;
        ModelSpec::with_hyper(kind, Language::En, h).unwrap()
    }

    fn fit(spec: &ModelSpec, seed: u64) -> (Classifier, TrainingRun) {
        let data = toy();
        let resolver = CheckpointResolver::new("/nonexistent", true);
        let mut c = build_classifier(spec, &data, &resolver, seed).unwrap();
        let run = train(&mut c, &data, &Corpus::empty(CorpusSplit::Testing, LanguageTag::Single(Language::En)), &TrainOptions { seed, ..Default::default() }).unwrap();
        (c, run)
    }

    #[test]
    fn every_recurrent_kind_fits_a_separable_toy() {
        for kind in [ModelKind::Lstm, ModelKind::Bilstm, ModelKind::Word2vecClassifier, ModelKind::LstmAutoencoder] {
            let (_, run) = fit(&small(kind), 3);
            let last = run.curve.last().unwrap();
            assert!(last.train_accuracy >= 0.9, "{kind:?}: {last:?}");
            if kind == ModelKind::LstmAutoencoder {
                assert_eq!(run.pretraining_curve.len(), 3);
            }
        }
    }

    #[test]
    fn same_seed_same_curve() {
        let spec = small(ModelKind::Lstm);
        let (_, a) = fit(&spec, 11);
        let (_, b) = fit(&spec, 11);
        assert_eq!(a.curve, b.curve);
    }

    #[test]
    fn zero_learning_rate_keeps_the_curve_flat() {
        let mut spec = small(ModelKind::Bilstm);
        spec.hyper.learning_rate = 0.0;
        spec.hyper.max_epochs = 3;
        let (_, run) = fit(&spec, 5);
        assert!(run.curve.windows(2).all(|w| w[0].train_loss == w[1].train_loss));
    }

    #[test]
    fn early_stopping_keeps_the_best_epoch() {
        let mut spec = small(ModelKind::Lstm);
        spec.hyper.patience = 2;
        spec.hyper.learning_rate = 0.3;
        spec.hyper.max_epochs = 40;
        let (c, run) = fit(&spec, 2);
        let best = run.curve[run.best_epoch - 1].validation_loss;
        assert!(run.curve.iter().all(|r| r.validation_loss >= best));
        let data = toy();
        let probs = match &c {
            Classifier::Recurrent(r) => r.probabilities(&r.encode(&data.texts())).unwrap(),
            _ => unreachable!(),
        };
        let golds: Vec<usize> = data.labels().iter().map(|l| l.index()).collect();
        assert!((score(&probs, &golds).0 - best).abs() < 1e-12);
    }

    #[test]
    fn empty_training_corpus_is_rejected() {
        let spec = small(ModelKind::Lstm);
        let empty = Corpus::empty(CorpusSplit::Training, LanguageTag::Single(Language::En));
        let resolver = CheckpointResolver::new("/nonexistent", true);
        assert!(matches!(build_classifier(&spec, &empty, &resolver, 0), Err(ModelError::EmptyCorpus)));
    }

    #[test]
    fn checkpoint_round_trip_predicts_identically() {
        let spec = small(ModelKind::Bilstm);
        let data = toy();
        let resolver = CheckpointResolver::new("/nonexistent", true);
        let mut c = build_classifier(&spec, &data, &resolver, 1).unwrap();
        let tmp = tempfile::tempdir().unwrap();
        let opts = TrainOptions {
            seed: 1,
            checkpoint_dir: Some(tmp.path().to_path_buf()),
            corpus_manifest: Some("abc".into()),
        };
        let run = train(&mut c, &data, &data, &opts).unwrap();
        let back = Classifier::load(run.checkpoint.as_ref().unwrap()).unwrap();
        assert_eq!(c.predict(&data.texts()).unwrap(), back.predict(&data.texts()).unwrap());
        let manifest: TrainingRun = serde_json::from_str(&fs::read_to_string(tmp.path().join(RUN_FILE)).unwrap()).unwrap();
        assert_eq!(manifest, run);
    }

    #[test]
    fn stand_in_transformers_learn_the_toy() {
        let tmp = tempfile::tempdir().unwrap();
        write_stand_in_checkpoint(&tmp.path().join("tiny-bert"), StandInFamily::Bert, 0).unwrap();
        write_stand_in_checkpoint(&tmp.path().join("tiny-gpt2"), StandInFamily::Gpt2, 0).unwrap();
        let resolver = CheckpointResolver::new(tmp.path(), true);
        for (kind, id) in [(ModelKind::BertBase, "tiny-bert"), (ModelKind::Gpt2Medium, "tiny-gpt2")] {
            let mut h = Hyperparameters::for_kind(kind);
            h.checkpoint = Some(id.into());
            h.learning_rate = 3e-3;
            h.max_epochs = 15;
            h.batch_size = 6;
            h.patience = 0;
            h.max_len = 16;
            let spec = ModelSpec::with_hyper(kind, Language::En, h).unwrap();
            let data = toy();
            let mut c = build_classifier(&spec, &data, &resolver, 4).unwrap();
            let run = train(&mut c, &data, &Corpus::empty(CorpusSplit::Testing, LanguageTag::Single(Language::En)), &TrainOptions { seed: 4, ..Default::default() }).unwrap();
            let last = run.curve.last().unwrap();
            assert!(last.train_accuracy >= 0.9, "{kind:?}: {:?}", run.curve);
        }
    }
}
