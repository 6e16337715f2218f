//! `aggrobench` command line: parse, run one stage or all of them, map the
//! outcome to an exit code.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use aggrobench_core::corpus::Language;
use aggrobench_core::evaluation::{DatasetVariant, ModelKind};
use clap::{Args, Parser, Subcommand};

use crate::config::{ExperimentConfig, Overrides};
use crate::error::{EXIT_INPUT, EXIT_OK};
use crate::pipeline::{Pipeline, StageReport};
use crate::WorkbenchError;

#[derive(Debug, Parser)]
#[command(name = "aggrobench", version, about = "Aggression detection experiments over English, Bangla and Hindi")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Load the datasets and write raw corpora with manifests
    Ingest,
    /// Build the balanced semi-noisy training sets
    Augment,
    /// Build the machine-translated training sets
    Translate,
    /// Train every requested (model, language, variant) cell
    Train,
    /// Score trained cells on the raw test splits
    Evaluate,
    /// Render the results table, curves and confusion matrices
    Report,
    /// Run every stage in order
    All,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Experiment config (JSON)
    #[arg(long, global = true, default_value = "aggrobench.json")]
    pub config: PathBuf,
    /// Restrict to these dataset variants (repeatable)
    #[arg(long, global = true)]
    pub variant: Vec<DatasetVariant>,
    /// Restrict to these languages (repeatable)
    #[arg(long, global = true)]
    pub language: Vec<Language>,
    /// Restrict to these models (repeatable)
    #[arg(long, global = true)]
    pub model: Vec<ModelKind>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// No live translation or checkpoint downloads
    #[arg(long, global = true)]
    pub offline: bool,
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Output directory
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

impl CommonArgs {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            variants: self.variant.clone(),
            languages: self.language.clone(),
            models: self.model.clone(),
            seed: self.seed,
            offline: self.offline,
            workers: self.workers,
            out: self.out.clone(),
        }
    }
}

/// Loads the config named on the command line and applies the flags.
pub fn load_config(args: &CommonArgs) -> Result<ExperimentConfig, WorkbenchError> {
    let mut config = ExperimentConfig::load(&args.config)?;
    config.apply(&args.overrides());
    Ok(config)
}

pub fn execute(command: Command, pipeline: &Pipeline) -> Result<Vec<StageReport>, WorkbenchError> {
    Ok(match command {
        Command::Ingest => vec![pipeline.ingest()?],
        Command::Augment => vec![pipeline.augment()?],
        Command::Translate => vec![pipeline.translate()?],
        Command::Train => vec![pipeline.train()?],
        Command::Evaluate => vec![pipeline.evaluate()?],
        Command::Report => vec![pipeline.report()?],
        Command::All => pipeline.all()?,
    })
}

fn print_stage(out: &mut impl Write, err: &mut impl Write, stage: &StageReport) {
    let _ = writeln!(
        out,
        "[{}] {} computed, {} up to date",
        stage.stage, stage.computed, stage.skipped
    );
    for line in &stage.lines {
        let _ = writeln!(out, "  {line}");
    }
    for w in &stage.warnings {
        let _ = writeln!(err, "warning: {w}");
    }
}

/// Runs the CLI with explicit output streams and returns the exit code.
pub fn run_with<I, T>(args: I, out: &mut impl Write, err: &mut impl Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = write!(if e.use_stderr() { &mut *err as &mut dyn Write } else { out }, "{}", e.render());
            return code;
        }
    };
    let result = load_config(&cli.common)
        .and_then(Pipeline::new)
        .and_then(|p| execute(cli.command, &p));
    match result {
        Ok(stages) => {
            for s in &stages {
                print_stage(out, err, s);
            }
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(args, &mut std::io::stdout(), &mut std::io::stderr())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_parse_with_aliases() {
        let cli = Cli::try_parse_from([
            "aggrobench", "train", "--config", "c.json", "--variant", "mt", "--language", "bn",
            "--model", "mbert", "--model", "lstm", "--seed", "7", "--offline", "--workers", "2",
        ])
        .unwrap();
        assert_eq!(cli.command, Command::Train);
        let o = cli.common.overrides();
        assert_eq!(o.variants, vec![DatasetVariant::MachineTranslated]);
        assert_eq!(o.languages, vec![Language::Bn]);
        assert_eq!(o.models, vec![ModelKind::BertMultilingual, ModelKind::Lstm]);
        assert_eq!((o.seed, o.offline, o.workers), (Some(7), true, Some(2)));
    }

    #[test]
    fn bad_flag_value_is_an_input_error() {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run_with(["aggrobench", "all", "--model", "transformer-xl"], &mut out, &mut err);
        assert_eq!(code, 2);
        let code = run_with(["aggrobench", "--help"], &mut out, &mut err);
        assert_eq!(code, 0);
    }

    #[test]
    fn missing_config_exits_2_with_path() {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run_with(["aggrobench", "ingest", "--config", "/nonexistent/x.json"], &mut out, &mut err);
        assert_eq!(code, 2);
        assert!(String::from_utf8(err).unwrap().contains("/nonexistent/x.json"));
    }
}
