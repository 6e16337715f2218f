//! Weighted metrics from gold and predicted labels, and the rendered report:
//! results table, learning curves and confusion matrices.
//!
//!     cargo run --example evaluate_report -- [out_dir]

use std::path::PathBuf;

use aggrobench::core::corpus::{Label, Language};
use aggrobench::core::evaluation::{
    aggregate_metrics, confusion, render_report, Averaging, DatasetVariant, EpochRecord, MetricReport, ModelKind, RunSummary,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    use Label::{Cag, Nag, Oag};
    let golds = [Nag, Nag, Nag, Nag, Oag, Oag, Cag, Cag, Cag, Nag];
    let preds = [Nag, Nag, Oag, Nag, Oag, Cag, Cag, Nag, Cag, Nag];
    let cm = confusion(&golds, &preds)?;
    let m = aggregate_metrics(&cm);
    println!("accuracy {:.3}  precision {:.3}  recall {:.3}  f1 {:.3}", m.accuracy, m.precision, m.recall, m.f1);
    for c in &m.per_class {
        println!("  {}: precision {:.3} recall {:.3} support {}", c.label.as_str(), c.precision.value, c.recall.value, c.support);
    }

    let curve: Vec<EpochRecord> = (1..=5)
        .map(|epoch| {
            let t = epoch as f64;
            EpochRecord {
                epoch,
                train_loss: 1.1 / t,
                train_accuracy: 0.5 + 0.08 * t,
                validation_loss: 1.0 / t.sqrt(),
                validation_accuracy: 0.45 + 0.05 * t,
            }
        })
        .collect();
    let run = RunSummary {
        run_id: "example".into(),
        report: MetricReport::new(ModelKind::Lstm, Language::En, DatasetVariant::Raw, cm, Averaging::Weighted),
        curve,
    };
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("aggrobench-report"));
    let files = render_report(&[run], &out)?;
    println!("{}", std::fs::read_to_string(&files.table)?);
    println!("plots: {}, {}", files.curve_plots[0].display(), files.matrix_plots[0].display());
    Ok(())
}
