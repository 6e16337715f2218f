use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{EvalError, MetricReport};
use crate::corpus::Label;

/// One row of a training curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub validation_loss: f64,
    pub validation_accuracy: f64,
}

/// Everything the report needs from one finished cell. `run_id` names the
/// per-run files and is expected to be the run manifest hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_id: String,
    pub report: MetricReport,
    pub curve: Vec<EpochRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportFiles {
    pub table: PathBuf,
    pub json: PathBuf,
    pub curves: Vec<PathBuf>,
    pub curve_plots: Vec<PathBuf>,
    pub matrices: Vec<PathBuf>,
    pub matrix_plots: Vec<PathBuf>,
}

fn write(path: &Path, contents: &str) -> Result<(), EvalError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| EvalError::Io(dir.display().to_string(), e))?;
    }
    std::fs::write(path, contents).map_err(|e| EvalError::Io(path.display().to_string(), e))
}

fn sorted(runs: &[RunSummary]) -> Vec<&RunSummary> {
    let mut rows: Vec<&RunSummary> = runs.iter().collect();
    rows.sort_by_key(|r| (r.report.variant, r.report.model, r.report.language));
    rows
}

/// Tab-separated result table, grouped by dataset variant, two decimals.
pub fn metrics_table(runs: &[RunSummary]) -> String {
    let mut out = String::from("Variant\tModels\tSet\tAccuracy\tPrecision\tRecall\tF1 Score\n");
    for r in sorted(runs) {
        let m = &r.report.metrics;
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{:.2}\t{:.2}\t{:.2}\t{:.2}",
            r.report.variant,
            r.report.model.display_name(),
            r.report.language.name(),
            m.accuracy,
            m.precision,
            m.recall,
            m.f1
        );
    }
    out
}

pub fn curve_tsv(curve: &[EpochRecord]) -> String {
    let mut out =
        String::from("epoch\ttrain_loss\ttrain_accuracy\tvalidation_loss\tvalidation_accuracy\n");
    for e in curve {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            e.epoch, e.train_loss, e.train_accuracy, e.validation_loss, e.validation_accuracy
        );
    }
    out
}

pub fn matrix_tsv(report: &MetricReport) -> String {
    let mut out = String::from("gold\\predicted");
    for l in Label::ALL {
        let _ = write!(out, "\t{l}");
    }
    out.push('\n');
    for g in Label::ALL {
        out.push_str(g.as_str());
        for p in Label::ALL {
            let _ = write!(out, "\t{}", report.confusion.get(g, p));
        }
        out.push('\n');
    }
    out
}

const W: f64 = 480.0;
const H: f64 = 320.0;
const PAD: f64 = 48.0;

/// Train and validation accuracy against epoch.
pub fn curve_svg(title: &str, curve: &[EpochRecord]) -> String {
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"20\" text-anchor=\"middle\">{}</text>\n",
        W / 2.0,
        escape(title)
    );
    let (x0, x1, y0, y1) = (PAD, W - PAD / 2.0, H - PAD, PAD);
    let _ = writeln!(
        svg,
        "<path d=\"M{x0} {y1} L{x0} {y0} L{x1} {y0}\" stroke=\"black\" fill=\"none\"/>"
    );
    for tick in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let y = y0 + (y1 - y0) * tick;
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\">{tick:.2}</text>",
            x0 - 4.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">epoch</text>",
        (x0 + x1) / 2.0,
        H - 12.0
    );
    let n = curve.len().max(2) - 1;
    let point = |i: usize, acc: f64| {
        (
            x0 + (x1 - x0) * i as f64 / n as f64,
            y0 + (y1 - y0) * acc.clamp(0.0, 1.0),
        )
    };
    let series: [(&str, &str, fn(&EpochRecord) -> f64); 2] = [
        ("train", "#1f77b4", |e| e.train_accuracy),
        ("validation", "#ff7f0e", |e| e.validation_accuracy),
    ];
    for (k, (name, colour, get)) in series.iter().enumerate() {
        let pts: Vec<String> = curve
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let (x, y) = point(i, get(e));
                format!("{x:.1},{y:.1}")
            })
            .collect();
        let _ = writeln!(
            svg,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{colour}\" stroke-width=\"2\"/>",
            pts.join(" ")
        );
        let ly = y1 + 16.0 * k as f64;
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{ly}\" fill=\"{colour}\">{name}</text>",
            x1 - 70.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Confusion-matrix heatmap, darker cells for larger row shares.
pub fn matrix_svg(title: &str, report: &MetricReport) -> String {
    let cell = 80.0;
    let (ox, oy) = (90.0, 60.0);
    let (w, h) = (ox + 3.0 * cell + 20.0, oy + 3.0 * cell + 40.0);
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"20\" text-anchor=\"middle\">{}</text>\n",
        w / 2.0,
        escape(title)
    );
    for (i, g) in Label::ALL.iter().enumerate() {
        let support = report.confusion.support(*g).max(1) as f64;
        let y = oy + cell * i as f64;
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{g}</text>",
            ox - 6.0,
            y + cell / 2.0 + 4.0
        );
        for (j, p) in Label::ALL.iter().enumerate() {
            let count = report.confusion.get(*g, *p);
            let share = count as f64 / support;
            let shade = (255.0 * (1.0 - share)).round() as u8;
            let x = ox + cell * j as f64;
            let text = if share > 0.5 { "white" } else { "black" };
            let _ = writeln!(
                svg,
                "<rect x=\"{x}\" y=\"{y}\" width=\"{cell}\" height=\"{cell}\" fill=\"rgb({shade},{shade},255)\" stroke=\"gray\"/>\n\
                 <text x=\"{}\" y=\"{}\" text-anchor=\"middle\" fill=\"{text}\">{count}</text>",
                x + cell / 2.0,
                y + cell / 2.0 + 4.0
            );
        }
    }
    for (j, p) in Label::ALL.iter().enumerate() {
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{p}</text>",
            ox + cell * j as f64 + cell / 2.0,
            oy + 3.0 * cell + 18.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn title(r: &RunSummary) -> String {
    format!(
        "{} / {} / {}",
        r.report.model.display_name(),
        r.report.language.name(),
        r.report.variant
    )
}

/// Writes `results.tsv`, `results.json`, and per run `curves/<id>.{tsv,svg}`
/// and `confusion/<id>.{tsv,svg}` under `out_dir`.
pub fn render_report(runs: &[RunSummary], out_dir: &Path) -> Result<ReportFiles, EvalError> {
    if runs.is_empty() {
        return Err(EvalError::NoRuns);
    }
    let table = out_dir.join("results.tsv");
    write(&table, &metrics_table(runs))?;
    let json = out_dir.join("results.json");
    let ordered = sorted(runs);
    let body = serde_json::to_string_pretty(&ordered).expect("reports serialize");
    write(&json, &(body + "\n"))?;

    let mut files = ReportFiles {
        table,
        json,
        curves: Vec::new(),
        curve_plots: Vec::new(),
        matrices: Vec::new(),
        matrix_plots: Vec::new(),
    };
    for r in ordered {
        let name = &r.run_id;
        let curve = out_dir.join("curves").join(format!("{name}.tsv"));
        write(&curve, &curve_tsv(&r.curve))?;
        let plot = curve.with_extension("svg");
        write(&plot, &curve_svg(&title(r), &r.curve))?;
        let matrix = out_dir.join("confusion").join(format!("{name}.tsv"));
        write(&matrix, &matrix_tsv(&r.report))?;
        let heat = matrix.with_extension("svg");
        write(&heat, &matrix_svg(&title(r), &r.report))?;
        files.curves.push(curve);
        files.curve_plots.push(plot);
        files.matrices.push(matrix);
        files.matrix_plots.push(heat);
    }
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Language;
    use crate::evaluation::{Averaging, ConfusionMatrix, DatasetVariant, ModelKind};

    fn run(model: ModelKind, lang: Language, variant: DatasetVariant) -> RunSummary {
        let cm = ConfusionMatrix::from_cells([[5, 1, 0], [2, 3, 0], [0, 0, 4]]);
        RunSummary {
            run_id: format!("{model}-{}-{variant}", lang.code()),
            report: MetricReport::new(model, lang, variant, cm, Averaging::Weighted),
            curve: vec![
                EpochRecord {
                    epoch: 1,
                    train_loss: 1.0,
                    train_accuracy: 0.5,
                    validation_loss: 1.1,
                    validation_accuracy: 0.4,
                },
                EpochRecord {
                    epoch: 2,
                    train_loss: 0.8,
                    train_accuracy: 0.7,
                    validation_loss: 1.0,
                    validation_accuracy: 0.5,
                },
            ],
        }
    }

    #[test]
    fn one_run_writes_one_of_each() {
        let dir = tempfile::tempdir().unwrap();
        let files = render_report(
            &[run(ModelKind::Lstm, Language::En, DatasetVariant::Raw)],
            dir.path(),
        )
        .unwrap();
        let table = std::fs::read_to_string(&files.table).unwrap();
        assert_eq!(table.lines().count(), 2);
        assert_eq!(
            table.lines().nth(1).unwrap(),
            "raw\tLSTM\tEnglish\t0.80\t0.80\t0.80\t0.80"
        );
        assert_eq!(files.curves.len(), 1);
        assert_eq!(files.matrices.len(), 1);
        let matrix = std::fs::read_to_string(&files.matrices[0]).unwrap();
        assert_eq!(matrix.lines().nth(1).unwrap(), "NAG\t5\t1\t0");
        assert!(std::fs::read_to_string(&files.curve_plots[0])
            .unwrap()
            .starts_with("<svg"));
    }

    #[test]
    fn full_matrix_is_grouped_by_variant() {
        let mut runs = Vec::new();
        for variant in [DatasetVariant::SemiNoisy, DatasetVariant::Raw] {
            for model in [ModelKind::Gpt2Medium, ModelKind::Lstm, ModelKind::LstmAutoencoder] {
                for lang in Language::ALL {
                    runs.push(run(model, lang, variant));
                }
            }
        }
        let table = metrics_table(&runs);
        let rows: Vec<&str> = table.lines().skip(1).collect();
        assert_eq!(rows.len(), 18);
        assert!(rows[..9].iter().all(|r| r.starts_with("raw\t")));
        assert!(rows[9..].iter().all(|r| r.starts_with("semi_noisy\t")));
        assert!(rows[0].starts_with("raw\tAutoencoder\t"));
    }

    #[test]
    fn empty_input_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(render_report(&[], dir.path()), Err(EvalError::NoRuns)));
    }
}
