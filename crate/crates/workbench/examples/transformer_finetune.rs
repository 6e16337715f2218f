//! Fine-tunes a transformer checkpoint on the Bangla fixture. Uses the tiny
//! stand-in multilingual BERT by default; point `AGGROBENCH_PRETRAINED_DIR`
//! at a cache holding real hub checkpoints and pass the id to use one.
//!
//!     cargo run --release --example transformer_finetune -- [checkpoint-id]

use std::path::Path;

use aggrobench::core::corpus::{load_corpus, ColumnMap, Corpus, Language, LanguageTag, Split};
use aggrobench::core::evaluation::{evaluate, DatasetVariant, ModelKind};
use aggrobench::models::{build_classifier, train, CheckpointResolver, Hyperparameters, ModelSpec, TrainOptions, TrainedModel, PRETRAINED_DIR_ENV};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let resolver = match std::env::var_os(PRETRAINED_DIR_ENV) {
        Some(_) => CheckpointResolver::from_env(false),
        None => CheckpointResolver::new(fixtures.join("pretrained"), true),
    };
    let checkpoint = std::env::args().nth(1).unwrap_or_else(|| "tiny-mbert".into());

    let load = |file: &str, split| load_corpus(&fixtures.join("data").join(file), Language::Bn, split, &ColumnMap::trac2());
    let corpus = load("bn_train.csv", Split::Training)?;
    let test = load("bn_dev.csv", Split::Testing)?;

    let mut hyper = Hyperparameters::for_kind(ModelKind::BertMultilingual);
    hyper.checkpoint = Some(checkpoint);
    hyper.max_epochs = 3;
    hyper.learning_rate = 1e-3;
    hyper.max_len = 24;
    let spec = ModelSpec::with_hyper(ModelKind::BertMultilingual, Language::Bn, hyper)?;
    let mut classifier = build_classifier(&spec, &corpus, &resolver, 3)?;
    // no validation split: early stopping watches the training loss
    let empty = Corpus::empty(Split::Testing, LanguageTag::Single(Language::Bn));
    let run = train(&mut classifier, &corpus, &empty, &TrainOptions { seed: 3, ..Default::default() })?;
    for e in &run.curve {
        println!("epoch {}: loss {:.4}, accuracy {:.3}", e.epoch, e.train_loss, e.train_accuracy);
    }
    let report = evaluate(&TrainedModel::new(classifier, &corpus), &test, DatasetVariant::Raw, Language::Bn)?;
    println!("test accuracy {:.3}, weighted f1 {:.3}", report.metrics.accuracy, report.metrics.f1);
    Ok(())
}
