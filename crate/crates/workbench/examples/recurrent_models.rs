//! Trains the four recurrent classifiers (LSTM autoencoder, LSTM, BiLSTM and
//! skip-gram + LSTM) on the English fixture and scores them on its test split.
//!
//!     cargo run --release --example recurrent_models

use std::path::Path;

use aggrobench::core::corpus::{load_corpus, split_train_validation, ColumnMap, Language, Split};
use aggrobench::core::evaluation::{evaluate, DatasetVariant, ModelKind};
use aggrobench::models::{build_classifier, train, CheckpointResolver, Hyperparameters, ModelSpec, TrainOptions, TrainedModel};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let load = |file: &str, split| load_corpus(&fixtures.join("data").join(file), Language::En, split, &ColumnMap::trac2());
    let corpus = load("en_train.csv", Split::Training)?;
    let test = load("en_dev.csv", Split::Testing)?;
    let (train_part, validation) = split_train_validation(&corpus, 0.15, 1)?;
    // recurrent models never touch the checkpoint cache
    let resolver = CheckpointResolver::new(fixtures.join("pretrained"), true);

    for kind in [ModelKind::LstmAutoencoder, ModelKind::Lstm, ModelKind::Bilstm, ModelKind::Word2vecClassifier] {
        let mut hyper = Hyperparameters::for_kind(kind);
        hyper.embedding_dim = 16;
        hyper.hidden_size = 16;
        hyper.max_epochs = 8;
        hyper.patience = 2;
        hyper.learning_rate = 0.01;
        hyper.max_len = 12;
        let spec = ModelSpec::with_hyper(kind, Language::En, hyper)?;
        let mut classifier = build_classifier(&spec, &train_part, &resolver, 5)?;
        let run = train(&mut classifier, &train_part, &validation, &TrainOptions { seed: 5, ..Default::default() })?;
        let model = TrainedModel::new(classifier, &corpus);
        let report = evaluate(&model, &test, DatasetVariant::Raw, Language::En)?;
        let m = &report.metrics;
        println!(
            "{:<26} best epoch {}/{}  accuracy {:.3}  f1 {:.3}",
            kind.display_name(),
            run.best_epoch,
            run.epochs_trained,
            m.accuracy,
            m.f1
        );
    }
    Ok(())
}
