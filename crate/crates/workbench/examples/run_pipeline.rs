//! The full experiment on the bundled fixture: ingest, augment, translate,
//! train, evaluate and report, for a narrowed slice of the model matrix.
//! Running it twice shows every stage up to date the second time.
//!
//!     cargo run --release --example run_pipeline -- [out_dir]

use std::path::{Path, PathBuf};

use aggrobench::core::corpus::Language;
use aggrobench::core::evaluation::ModelKind;
use aggrobench::{ExperimentConfig, Overrides, Pipeline};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut config = ExperimentConfig::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/config.json"))?;
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("aggrobench-run"));
    config.apply(&Overrides {
        languages: vec![Language::En, Language::Hi],
        models: vec![ModelKind::Lstm, ModelKind::BertMultilingual],
        offline: true,
        workers: Some(2),
        out: Some(out),
        ..Default::default()
    });
    let pipeline = Pipeline::new(config)?;
    for stage in pipeline.all()? {
        println!("[{}] {} computed, {} up to date, {} translation calls", stage.stage, stage.computed, stage.skipped, stage.provider_calls);
        for w in &stage.warnings {
            println!("  warning: {w}");
        }
    }
    println!("{}", std::fs::read_to_string(pipeline.report_dir().join("results.tsv"))?);
    Ok(())
}
