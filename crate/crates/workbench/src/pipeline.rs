//! The experiment stages. Every unit of work (a language's corpus, a model
//! cell) is stamped with a hash of its inputs and skipped while that hash is
//! unchanged.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use aggrobench_core::augmentation::{
    balance_corpus, build_translated_corpus, load_stopwords, plan_balance, AugmentError,
    NoiseAugmenter, SynonymLexicon,
};
use aggrobench_core::corpus::{
    load_corpus, save_corpus, split_train_validation, write_manifest, ColumnMap, Corpus,
    CorpusManifest, Language, Split,
};
use aggrobench_core::evaluation::{evaluate, render_report, DatasetVariant, RunSummary};
use aggrobench_core::seed::{derive_seed, hex_digest};
use aggrobench_core::translator::{
    FaultPlan, HttpTranslator, ProviderError, StubTranslator, TranslationCache, TranslationProvider,
    TranslationService,
};
use aggrobench_models::{
    build_classifier, train, CheckpointResolver, Classifier, ModelError, ModelSpec, TrainOptions,
    TrainedModel, TrainingRun,
};
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, ProviderSettings};
use crate::reference::{
    augmented_reference_counts, deviation, format_distribution, reference_counts,
    TRANSLATED_ENGLISH_REFERENCE,
};
use crate::WorkbenchError;

const RAW_TRAIN: &str = "raw_train";
const RAW_TEST: &str = "raw_test";
const RUN_FILE: &str = "run.json";
const METRICS_FILE: &str = "metrics.json";
const REPORT_DIR: &str = "report";

/// What one stage did.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StageReport {
    pub stage: &'static str,
    pub computed: usize,
    pub skipped: usize,
    /// Calls that reached the translation provider (cache misses).
    pub provider_calls: usize,
    pub lines: Vec<String>,
    pub warnings: Vec<String>,
}

impl StageReport {
    fn new(stage: &'static str) -> Self {
        Self {
            stage,
            ..Default::default()
        }
    }
}

/// One (model, language, variant) experiment.
#[derive(Debug, Clone)]
pub struct Cell {
    pub spec: ModelSpec,
    pub variant: DatasetVariant,
    pub seed: u64,
}

impl Cell {
    pub fn language(&self) -> Language {
        self.spec.language
    }

    pub fn label(&self) -> String {
        format!("{} / {} / {}", self.spec.kind, self.language(), self.variant)
    }
}

/// Refuses every request; stands in for the live service in offline mode so
/// only cached translations are available.
struct OfflineProvider;

impl TranslationProvider for OfflineProvider {
    fn id(&self) -> &str {
        "offline"
    }

    fn translate(&self, _: &str, _: Language, _: Language) -> Result<String, ProviderError> {
        Err(ProviderError::Fatal(
            "offline mode: translation is limited to the cache".into(),
        ))
    }
}

pub struct Pipeline {
    config: ExperimentConfig,
    resolver: CheckpointResolver,
    checkpoint_digests: Mutex<HashMap<String, String>>,
}

fn input<E: std::fmt::Display>(e: E) -> WorkbenchError {
    WorkbenchError::Input(e.to_string())
}

fn experiment<E: std::fmt::Display>(e: E) -> WorkbenchError {
    WorkbenchError::Experiment(e.to_string())
}

fn model_error(e: ModelError) -> WorkbenchError {
    match e {
        ModelError::Checkpoint(_) | ModelError::Io(..) => input(e),
        ModelError::Config(_) | ModelError::LanguageMismatch { .. } => WorkbenchError::Config(e.to_string()),
        e => experiment(e),
    }
}

fn key_of(value: &Value) -> String {
    hex_digest(value.to_string().as_bytes())
}

fn file_digest(path: &Path) -> Result<String, WorkbenchError> {
    fs::read(path)
        .map(|b| hex_digest(&b))
        .map_err(|e| input(format!("{}: {e}", path.display())))
}

fn optional_digest(path: Option<&PathBuf>) -> Result<Value, WorkbenchError> {
    Ok(match path {
        Some(p) => Value::String(file_digest(p)?),
        None => Value::Null,
    })
}

fn write_file(path: &Path, contents: &str) -> Result<(), WorkbenchError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| input(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, contents).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, WorkbenchError> {
    let raw = fs::read_to_string(path).map_err(|e| input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&raw).map_err(|e| input(format!("{}: {e}", path.display())))
}

/// Runs `f` over `items` on up to `workers` threads. Results keep the order
/// of `items`.
pub fn parallel_map<T: Sync, R: Send>(items: &[T], workers: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    if workers <= 1 || items.len() <= 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<R>>> = items.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..workers.min(items.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(item) = items.get(i) else { break };
                let r = f(item);
                *slots[i].lock().expect("result slot") = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().expect("result slot").expect("every item ran"))
        .collect()
}

/// First error of a batch, preferring configuration and input errors (exit
/// code 2) over experiment failures; several experiment failures are joined.
fn first_error(results: Vec<Result<(), WorkbenchError>>) -> Result<(), WorkbenchError> {
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(()) => {}
            Err(WorkbenchError::Experiment(m)) => failures.push(m),
            Err(e) => return Err(e),
        }
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(WorkbenchError::Experiment(failures.join("; ")))
    }
}

fn variant_file(variant: DatasetVariant) -> (&'static str, &'static str) {
    match variant {
        DatasetVariant::Raw => (RAW_TRAIN, "ingest"),
        DatasetVariant::SemiNoisy => ("semi_noisy_train", "augment"),
        DatasetVariant::MachineTranslated => ("machine_translated_train", "translate"),
    }
}

impl Pipeline {
    pub fn new(config: ExperimentConfig) -> Result<Self, WorkbenchError> {
        config.validate()?;
        let resolver = match &config.pretrained_dir {
            Some(dir) => CheckpointResolver::new(dir, config.offline),
            None => CheckpointResolver::from_env(config.offline),
        };
        Ok(Self {
            config,
            resolver,
            checkpoint_digests: Mutex::new(HashMap::new()),
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn out_dir(&self) -> &Path {
        &self.config.out
    }

    pub fn report_dir(&self) -> PathBuf {
        self.config.out.join(REPORT_DIR)
    }

    pub fn corpus_path(&self, language: Language, name: &str) -> PathBuf {
        self.config
            .out
            .join("corpora")
            .join(language.code())
            .join(format!("{name}.csv"))
    }

    fn manifest_path(&self, language: Language, name: &str) -> PathBuf {
        self.corpus_path(language, name).with_extension("manifest.json")
    }

    fn stamp_path(&self, unit: &str) -> PathBuf {
        self.config.out.join("stamps").join(format!("{unit}.key"))
    }

    fn is_fresh(&self, unit: &str, key: &str, outputs: &[PathBuf]) -> bool {
        fs::read_to_string(self.stamp_path(unit)).is_ok_and(|k| k == key)
            && outputs.iter().all(|p| p.exists())
    }

    fn stamp(&self, unit: &str, key: &str) -> Result<(), WorkbenchError> {
        write_file(&self.stamp_path(unit), key)
    }

    fn save_stage_corpus(
        &self,
        corpus: &Corpus,
        language: Language,
        name: &str,
        sources: Vec<PathBuf>,
        seeds: Vec<u64>,
    ) -> Result<(), WorkbenchError> {
        let path = self.corpus_path(language, name);
        fs::create_dir_all(path.parent().expect("corpus dir")).map_err(input)?;
        save_corpus(corpus, &path).map_err(input)?;
        let manifest = CorpusManifest::describe(corpus, sources, seeds);
        write_manifest(&manifest, &self.manifest_path(language, name)).map_err(input)
    }

    fn load_stage_corpus(&self, language: Language, name: &str, split: Split, stage: &str) -> Result<Corpus, WorkbenchError> {
        let path = self.corpus_path(language, name);
        if !path.is_file() {
            return Err(WorkbenchError::MissingArtifact(format!(
                "{} (run `{stage}` first)",
                path.display()
            )));
        }
        load_corpus(&path, language, split, &ColumnMap::default()).map_err(input)
    }

    fn stage_manifest(&self, language: Language, name: &str) -> Result<CorpusManifest, WorkbenchError> {
        read_json(&self.manifest_path(language, name))
    }

    fn translator_identity(&self) -> Result<Value, WorkbenchError> {
        Ok(match &self.config.translator.provider {
            ProviderSettings::Stub { word_table, .. } => json!({ "stub": optional_digest(word_table.as_ref())? }),
            ProviderSettings::Http { endpoint, dialect, .. } => json!({ "http": endpoint, "dialect": dialect }),
        })
    }

    pub fn translation_service(&self) -> Result<TranslationService, WorkbenchError> {
        let t = &self.config.translator;
        let provider: Box<dyn TranslationProvider> = match &t.provider {
            ProviderSettings::Stub {
                word_table,
                outage_after_calls,
            } => {
                let mut stub = StubTranslator::new().with_faults(FaultPlan {
                    outage_after_calls: *outage_after_calls,
                    ..Default::default()
                });
                if let Some(p) = word_table {
                    let table = fs::read_to_string(p).map_err(|e| input(format!("{}: {e}", p.display())))?;
                    stub = stub
                        .with_word_table(&table)
                        .map_err(|e| WorkbenchError::Config(format!("{}: {e}", p.display())))?;
                }
                Box::new(stub)
            }
            ProviderSettings::Http { .. } if self.config.offline => Box::new(OfflineProvider),
            ProviderSettings::Http {
                endpoint,
                dialect,
                api_key_env,
                ..
            } => Box::new(HttpTranslator::from_env(endpoint, api_key_env, *dialect, t.timeout())),
        };
        let path = self.config.translation_cache_path();
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| input(format!("{}: {e}", dir.display())))?;
        }
        let cache = TranslationCache::open(&path).map_err(|e| input(format!("{}: {e}", path.display())))?;
        Ok(TranslationService::new(provider, cache)
            .with_retry(t.retry)
            .with_max_in_flight(t.max_in_flight))
    }

    /// Loads every configured dataset, checks train/test disjointness and
    /// writes the raw corpora with manifests.
    pub fn ingest(&self) -> Result<StageReport, WorkbenchError> {
        let mut report = StageReport::new("ingest");
        for (&lang, paths) in &self.config.datasets {
            let key = key_of(&json!({
                "train": file_digest(&paths.train)?,
                "test": file_digest(&paths.test)?,
                "columns": self.config.columns,
            }));
            let unit = format!("ingest-{lang}");
            let outputs = [
                self.manifest_path(lang, RAW_TRAIN),
                self.manifest_path(lang, RAW_TEST),
                self.corpus_path(lang, RAW_TRAIN),
                self.corpus_path(lang, RAW_TEST),
            ];
            if self.is_fresh(&unit, &key, &outputs) {
                report.skipped += 1;
            } else {
                let train = load_corpus(&paths.train, lang, Split::Training, &self.config.columns).map_err(input)?;
                let test = load_corpus(&paths.test, lang, Split::Testing, &self.config.columns).map_err(input)?;
                let train_ids = train.ids();
                let shared: Vec<&str> = test.ids().into_iter().filter(|id| train_ids.contains(id)).collect();
                if !shared.is_empty() {
                    return Err(input(format!(
                        "{}: {} test id(s) also appear in {}",
                        paths.test.display(),
                        shared.len(),
                        paths.train.display()
                    )));
                }
                self.save_stage_corpus(&train, lang, RAW_TRAIN, vec![paths.train.clone()], vec![])?;
                self.save_stage_corpus(&test, lang, RAW_TEST, vec![paths.test.clone()], vec![])?;
                self.stamp(&unit, &key)?;
                report.computed += 1;
            }
            for (name, split) in [(RAW_TRAIN, Split::Training), (RAW_TEST, Split::Testing)] {
                let m = self.stage_manifest(lang, name)?;
                let what = format!("{} {}", lang.name(), if split == Split::Training { "train" } else { "test" });
                report.lines.push(format!("{what}: {}", format_distribution(&m.distribution)));
                report
                    .warnings
                    .extend(deviation(&what, &m.distribution, reference_counts(lang, split)));
            }
        }
        Ok(report)
    }

    /// Balances each requested language's training corpus with noisy copies
    /// and translations from the other languages. Test corpora are untouched.
    pub fn augment(&self) -> Result<StageReport, WorkbenchError> {
        let mut report = StageReport::new("augment");
        if !self.config.variants.contains(&DatasetVariant::SemiNoisy) {
            return Ok(report);
        }
        let (name, _) = variant_file(DatasetVariant::SemiNoisy);
        let balance = &self.config.balance;
        let mut service: Option<TranslationService> = None;
        for &lang in &self.config.languages {
            let raw = self.load_stage_corpus(lang, RAW_TRAIN, Split::Training, "ingest")?;
            let donors = if balance.translation_share > 0.0 {
                self.config
                    .donors(lang)
                    .into_iter()
                    .map(|d| self.load_stage_corpus(d, RAW_TRAIN, Split::Training, "ingest"))
                    .collect::<Result<Vec<_>, _>>()?
            } else {
                Vec::new()
            };
            let resources = self.config.resources.get(&lang).cloned().unwrap_or_default();
            let lexicon_digest = optional_digest(resources.lexicon.as_ref())?;
            let stopword_digest = optional_digest(resources.stopwords.as_ref())?;
            let stopwords = match &resources.stopwords {
                Some(p) => load_stopwords(p).map_err(input)?,
                None => Vec::new(),
            };
            let mut noise = self.config.noise.clone();
            noise.seed = derive_seed(
                self.config.seed,
                &[b"noise", lang.code().as_bytes(), &noise.seed.to_le_bytes()],
            );
            noise.lexicon_id = lexicon_digest.as_str().unwrap_or("none").to_string();
            noise.stopword_list_id = stopword_digest.as_str().unwrap_or("none").to_string();
            if stopwords.is_empty() && noise.stopword_insert_prob > 0.0 {
                report
                    .warnings
                    .push(format!("no stop-word list for {}; stop-word insertion disabled", lang.name()));
                noise.stopword_insert_prob = 0.0;
            }
            let key = key_of(&json!({
                "raw": raw.content_hash(),
                "donors": donors.iter().map(Corpus::content_hash).collect::<Vec<_>>(),
                "noise": noise,
                "strategy": balance.strategy,
                "targets": balance.targets.get(&lang),
                "translation_share": balance.translation_share,
                "translator": self.translator_identity()?,
            }));
            let unit = format!("augment-{lang}");
            let outputs = [self.corpus_path(lang, name), self.manifest_path(lang, name)];
            if self.is_fresh(&unit, &key, &outputs) {
                report.skipped += 1;
            } else {
                let plan = plan_balance(raw.distribution(), balance.strategy, balance.explicit_targets(lang))
                    .map_err(|e| WorkbenchError::Config(format!("{}: {e}", lang.name())))?
                    .with_translation_share(balance.translation_share);
                let lexicon = match &resources.lexicon {
                    Some(p) => SynonymLexicon::load(lang, p).map_err(input)?,
                    None => SynonymLexicon::new(lang),
                };
                let seed = noise.seed;
                let augmenter =
                    NoiseAugmenter::new(noise, lexicon, stopwords).map_err(|e| WorkbenchError::Config(e.to_string()))?;
                if service.is_none() {
                    service = Some(self.translation_service()?);
                }
                let svc = service.as_ref().expect("service just built");
                let before = svc.provider_calls();
                let balanced = balance_corpus(
                    &raw,
                    &plan,
                    &augmenter,
                    svc,
                    &donors,
                    self.config.translator.max_in_flight,
                )
                .map_err(|e| experiment(format!("augmenting {}: {e}", lang.name())))?;
                report.provider_calls += svc.provider_calls() - before;
                let sources = vec![self.corpus_path(lang, RAW_TRAIN)];
                self.save_stage_corpus(&balanced, lang, name, sources, vec![seed])?;
                self.stamp(&unit, &key)?;
                report.computed += 1;
            }
            let m = self.stage_manifest(lang, name)?;
            report.lines.push(format!(
                "{} semi-noisy train: {} (raw {}, noise {}, translated {})",
                lang.name(),
                format_distribution(&m.distribution),
                m.provenance_counts.raw,
                m.provenance_counts.noise_aug,
                m.provenance_counts.translated
            ));
            // Only meaningful when the input is the TRAC-2 training set itself.
            if raw.distribution().counts() == reference_counts(lang, Split::Training) {
                report.warnings.extend(deviation(
                    &format!("{} augmented train", lang.name()),
                    &m.distribution,
                    augmented_reference_counts(lang),
                ));
            }
        }
        Ok(report)
    }

    /// Translates every other language's training corpus into each requested
    /// language. Finished translations are cached, so a failed run resumes
    /// where it stopped.
    pub fn translate(&self) -> Result<StageReport, WorkbenchError> {
        let mut report = StageReport::new("translate");
        if !self.config.variants.contains(&DatasetVariant::MachineTranslated) {
            return Ok(report);
        }
        let (name, _) = variant_file(DatasetVariant::MachineTranslated);
        let mut service: Option<TranslationService> = None;
        for &lang in &self.config.languages {
            let donor_langs = self.config.donors(lang);
            let sources = donor_langs
                .iter()
                .map(|&d| self.load_stage_corpus(d, RAW_TRAIN, Split::Training, "ingest"))
                .collect::<Result<Vec<_>, _>>()?;
            let key = key_of(&json!({
                "sources": sources.iter().map(Corpus::content_hash).collect::<Vec<_>>(),
                "target": lang,
                "translator": self.translator_identity()?,
            }));
            let unit = format!("translate-{lang}");
            let outputs = [self.corpus_path(lang, name), self.manifest_path(lang, name)];
            if self.is_fresh(&unit, &key, &outputs) {
                report.skipped += 1;
            } else {
                if service.is_none() {
                    service = Some(self.translation_service()?);
                }
                let svc = service.as_ref().expect("service just built");
                let before = svc.provider_calls();
                let result = build_translated_corpus(&sources, svc, lang, self.config.translator.max_in_flight);
                report.provider_calls += svc.provider_calls() - before;
                let translated = match result {
                    Ok(c) => c,
                    Err(AugmentError::IncompleteTranslation { untranslated, partial }) => {
                        return Err(experiment(format!(
                            "translating into {}: {} of {} comments failed; {} finished translations are cached, rerun to resume",
                            lang.name(),
                            untranslated.len(),
                            untranslated.len() + partial.len(),
                            partial.len()
                        )))
                    }
                    Err(e) => return Err(experiment(format!("translating into {}: {e}", lang.name()))),
                };
                let files = donor_langs.iter().map(|&d| self.corpus_path(d, RAW_TRAIN)).collect();
                self.save_stage_corpus(&translated, lang, name, files, vec![])?;
                self.stamp(&unit, &key)?;
                report.computed += 1;
            }
            let m = self.stage_manifest(lang, name)?;
            let from: Vec<&str> = donor_langs.iter().map(|l| l.name()).collect();
            report.lines.push(format!(
                "{} machine-translated train (from {}): {}",
                lang.name(),
                from.join(" + "),
                format_distribution(&m.distribution)
            ));
            let set: BTreeSet<Language> = donor_langs.iter().copied().collect();
            if lang == Language::En && set == BTreeSet::from([Language::Bn, Language::Hi]) {
                report.warnings.extend(deviation(
                    "translated English train",
                    &m.distribution,
                    TRANSLATED_ENGLISH_REFERENCE,
                ));
            }
        }
        Ok(report)
    }

    /// Requested cells in report order, plus notes on combinations that do
    /// not exist (English-only BERT on other languages).
    pub fn cells(&self) -> Result<(Vec<Cell>, Vec<String>), WorkbenchError> {
        let mut cells = Vec::new();
        let mut notes = Vec::new();
        for &variant in &self.config.variants {
            for entry in &self.config.models {
                for &lang in &self.config.languages {
                    let hyper = entry.hyperparameters()?;
                    match ModelSpec::with_hyper(entry.kind, lang, hyper) {
                        Ok(spec) => {
                            let seed = derive_seed(
                                self.config.seed,
                                &[entry.kind.as_str().as_bytes(), lang.code().as_bytes(), variant.as_str().as_bytes()],
                            );
                            cells.push(Cell { spec, variant, seed });
                        }
                        Err(ModelError::LanguageMismatch { .. }) => {
                            let note = format!("{} is not run on {}", entry.kind, lang.name());
                            if !notes.contains(&note) {
                                notes.push(note);
                            }
                        }
                        Err(e) => return Err(model_error(e)),
                    }
                }
            }
        }
        Ok((cells, notes))
    }

    fn checkpoint_digest(&self, id: &str) -> Result<String, WorkbenchError> {
        if let Some(d) = self.checkpoint_digests.lock().expect("digest cache").get(id) {
            return Ok(d.clone());
        }
        let dir = self.resolver.resolve(id).map_err(model_error)?;
        let mut entries: Vec<PathBuf> = fs::read_dir(&dir)
            .map_err(|e| input(format!("{}: {e}", dir.display())))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file())
            .collect();
        entries.sort();
        let mut listing = String::new();
        for p in entries {
            let name = p.file_name().expect("file").to_string_lossy().into_owned();
            listing.push_str(&format!("{name}\t{}\n", file_digest(&p)?));
        }
        let digest = hex_digest(listing.as_bytes());
        self.checkpoint_digests
            .lock()
            .expect("digest cache")
            .insert(id.to_string(), digest.clone());
        Ok(digest)
    }

    /// Hash of everything a cell's training depends on.
    pub fn cell_key(&self, cell: &Cell) -> Result<String, WorkbenchError> {
        let (name, stage) = variant_file(cell.variant);
        let path = self.corpus_path(cell.language(), name);
        if !path.is_file() {
            return Err(WorkbenchError::MissingArtifact(format!(
                "training corpus for cell {} at {} (run `{stage}` first)",
                cell.label(),
                path.display()
            )));
        }
        let checkpoint = if cell.spec.kind.is_transformer() {
            Value::String(self.checkpoint_digest(&cell.spec.checkpoint_id())?)
        } else {
            Value::Null
        };
        Ok(key_of(&json!({
            "spec": cell.spec,
            "train": file_digest(&path)?,
            "seed": cell.seed,
            "validation_fraction": self.config.validation_fraction,
            "checkpoint": checkpoint,
        })))
    }

    pub fn cell_dir(&self, key: &str) -> PathBuf {
        self.config.out.join("cells").join(&key[..16])
    }

    fn train_cell(&self, cell: &Cell, key: &str) -> Result<(), WorkbenchError> {
        let (name, stage) = variant_file(cell.variant);
        let corpus = self.load_stage_corpus(cell.language(), name, Split::Training, stage)?;
        let (train_part, validation) = split_train_validation(
            &corpus,
            self.config.validation_fraction,
            derive_seed(cell.seed, &[b"validation"]),
        )
        .map_err(|e| experiment(format!("{}: {e}", cell.label())))?;
        let mut classifier =
            build_classifier(&cell.spec, &train_part, &self.resolver, cell.seed).map_err(model_error)?;
        let dir = self.cell_dir(key);
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(|e| input(format!("{}: {e}", dir.display())))?;
        }
        fs::create_dir_all(&dir).map_err(|e| input(format!("{}: {e}", dir.display())))?;
        let options = TrainOptions {
            seed: cell.seed,
            checkpoint_dir: Some(dir),
            corpus_manifest: Some(corpus.content_hash()),
        };
        train(&mut classifier, &train_part, &validation, &options)
            .map_err(|e| match model_error(e) {
                WorkbenchError::Experiment(m) => experiment(format!("training {}: {m}", cell.label())),
                other => other,
            })?;
        self.stamp(&format!("train-{}", &key[..16]), key)
    }

    /// Trains every requested cell whose inputs changed, on up to `workers`
    /// threads.
    pub fn train(&self) -> Result<StageReport, WorkbenchError> {
        let mut report = StageReport::new("train");
        let (cells, notes) = self.cells()?;
        report.lines.extend(notes);
        let mut todo = Vec::new();
        for cell in cells {
            let key = self.cell_key(&cell)?;
            let dir = self.cell_dir(&key);
            if self.is_fresh(&format!("train-{}", &key[..16]), &key, &[dir.join(RUN_FILE), dir.join("model")]) {
                report.skipped += 1;
            } else {
                todo.push((cell, key));
            }
        }
        let results = parallel_map(&todo, self.config.workers, |(cell, key)| self.train_cell(cell, key));
        report.computed = results.iter().filter(|r| r.is_ok()).count();
        first_error(results)?;
        Ok(report)
    }

    fn evaluate_cell(&self, cell: &Cell, key: &str, eval_key: &str) -> Result<(), WorkbenchError> {
        let dir = self.cell_dir(key);
        let run: TrainingRun = read_json(&dir.join(RUN_FILE))?;
        let classifier = Classifier::load(&dir.join("model")).map_err(model_error)?;
        let (name, stage) = variant_file(cell.variant);
        let train_corpus = self.load_stage_corpus(cell.language(), name, Split::Training, stage)?;
        let test = self.load_stage_corpus(cell.language(), RAW_TEST, Split::Testing, "ingest")?;
        let model = TrainedModel::new(classifier, &train_corpus);
        let metrics = evaluate(&model, &test, cell.variant, cell.language())
            .map_err(|e| experiment(format!("evaluating {}: {e}", cell.label())))?;
        let summary = RunSummary {
            run_id: key[..16].to_string(),
            report: metrics,
            curve: run.curve,
        };
        let body = serde_json::to_string_pretty(&summary).map_err(experiment)?;
        write_file(&dir.join(METRICS_FILE), &(body + "\n"))?;
        self.stamp(&format!("evaluate-{}", &key[..16]), eval_key)
    }

    fn evaluation_key(&self, cell: &Cell, key: &str) -> Result<String, WorkbenchError> {
        let dir = self.cell_dir(key);
        let trained = self.is_fresh(&format!("train-{}", &key[..16]), key, &[dir.join(RUN_FILE), dir.join("model")]);
        if !trained {
            return Err(WorkbenchError::MissingArtifact(format!(
                "cell {} has not been trained (run `train` first)",
                cell.label()
            )));
        }
        let test = self.corpus_path(cell.language(), RAW_TEST);
        if !test.is_file() {
            return Err(WorkbenchError::MissingArtifact(format!(
                "{} (run `ingest` first)",
                test.display()
            )));
        }
        Ok(key_of(&json!({ "cell": key, "test": file_digest(&test)? })))
    }

    /// Scores every trained cell on its language's raw test split.
    pub fn evaluate(&self) -> Result<StageReport, WorkbenchError> {
        let mut report = StageReport::new("evaluate");
        let (cells, _) = self.cells()?;
        let mut todo = Vec::new();
        let mut all = Vec::new();
        for cell in cells {
            let key = self.cell_key(&cell)?;
            let eval_key = self.evaluation_key(&cell, &key)?;
            let metrics = self.cell_dir(&key).join(METRICS_FILE);
            if self.is_fresh(&format!("evaluate-{}", &key[..16]), &eval_key, &[metrics.clone()]) {
                report.skipped += 1;
            } else {
                todo.push((cell.clone(), key, eval_key));
            }
            all.push((cell, metrics));
        }
        let results = parallel_map(&todo, self.config.workers, |(cell, key, eval_key)| {
            self.evaluate_cell(cell, key, eval_key)
        });
        report.computed = results.iter().filter(|r| r.is_ok()).count();
        first_error(results)?;
        for (cell, path) in all {
            let summary: RunSummary = read_json(&path)?;
            let m = &summary.report.metrics;
            report.lines.push(format!(
                "{}: accuracy {:.4}, precision {:.4}, recall {:.4}, f1 {:.4}",
                cell.label(),
                m.accuracy,
                m.precision,
                m.recall,
                m.f1
            ));
        }
        Ok(report)
    }

    /// Collects the evaluated cells into the results table, curves and
    /// confusion matrices.
    pub fn report(&self) -> Result<StageReport, WorkbenchError> {
        let mut report = StageReport::new("report");
        let (cells, _) = self.cells()?;
        let mut runs = Vec::with_capacity(cells.len());
        for cell in &cells {
            let key = self.cell_key(cell)?;
            let eval_key = self.evaluation_key(cell, &key)?;
            let path = self.cell_dir(&key).join(METRICS_FILE);
            if !self.is_fresh(&format!("evaluate-{}", &key[..16]), &eval_key, &[path.clone()]) {
                return Err(WorkbenchError::MissingArtifact(format!(
                    "cell {} has not been evaluated (run `evaluate` first)",
                    cell.label()
                )));
            }
            runs.push(read_json::<RunSummary>(&path)?);
        }
        let key = key_of(&serde_json::to_value(&runs).map_err(experiment)?);
        let dir = self.report_dir();
        let table = dir.join("results.tsv");
        if self.is_fresh("report", &key, &[table.clone(), dir.join("results.json")]) {
            report.skipped += 1;
        } else {
            if dir.exists() {
                fs::remove_dir_all(&dir).map_err(|e| input(format!("{}: {e}", dir.display())))?;
            }
            render_report(&runs, &dir).map_err(experiment)?;
            self.stamp("report", &key)?;
            report.computed += 1;
        }
        let contents = fs::read_to_string(&table).map_err(|e| input(format!("{}: {e}", table.display())))?;
        report.lines.extend(contents.lines().map(str::to_string));
        Ok(report)
    }

    /// Every stage in order; stops at the first failing stage.
    pub fn all(&self) -> Result<Vec<StageReport>, WorkbenchError> {
        Ok(vec![
            self.ingest()?,
            self.augment()?,
            self.translate()?,
            self.train()?,
            self.evaluate()?,
            self.report()?,
        ])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_map_keeps_order() {
        let items: Vec<usize> = (0..50).collect();
        let out = parallel_map(&items, 4, |i| i * 2);
        assert_eq!(out, (0..50).map(|i| i * 2).collect::<Vec<_>>());
        assert_eq!(parallel_map(&items, 1, |i| i + 1)[49], 50);
    }

    #[test]
    fn input_errors_win_over_experiment_failures() {
        let e = first_error(vec![
            Err(WorkbenchError::Experiment("a".into())),
            Err(WorkbenchError::Input("b".into())),
        ])
        .unwrap_err();
        assert_eq!(e.exit_code(), 2);
        let e = first_error(vec![
            Err(WorkbenchError::Experiment("a".into())),
            Ok(()),
            Err(WorkbenchError::Experiment("c".into())),
        ])
        .unwrap_err();
        assert_eq!(e.to_string(), "a; c");
    }
}
