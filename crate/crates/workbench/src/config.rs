//! Experiment configuration: one JSON file plus command-line overrides.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use aggrobench_core::augmentation::{BalanceStrategy, NoiseConfig, DEFAULT_TRANSLATION_SHARE};
use aggrobench_core::corpus::{ColumnMap, LabelDistribution, Language};
use aggrobench_core::evaluation::{DatasetVariant, ModelKind};
use aggrobench_core::translator::{HttpDialect, RetryPolicy};
use aggrobench_models::{Hyperparameters, ModelSpec};
use serde::{Deserialize, Serialize};

use crate::WorkbenchError;

/// Environment variable holding the translation API key, unless the config
/// names another.
pub const TRANSLATE_KEY_ENV: &str = "AGGROBENCH_TRANSLATE_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetPaths {
    pub train: PathBuf,
    pub test: PathBuf,
}

/// Lexical resources for noise addition in one language.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseResources {
    pub lexicon: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BalanceSettings {
    pub strategy: BalanceStrategy,
    /// Per-language `[NAG, OAG, CAG]` targets for `explicit_targets`.
    pub targets: BTreeMap<Language, [usize; 3]>,
    pub translation_share: f64,
}

impl Default for BalanceSettings {
    fn default() -> Self {
        Self {
            strategy: BalanceStrategy::ToMajority,
            targets: BTreeMap::new(),
            translation_share: DEFAULT_TRANSLATION_SHARE,
        }
    }
}

impl BalanceSettings {
    pub fn explicit_targets(&self, language: Language) -> Option<LabelDistribution> {
        self.targets.get(&language).map(|t| LabelDistribution::from_counts(*t))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "provider", rename_all = "snake_case")]
pub enum ProviderSettings {
    /// Offline word-table translator.
    Stub {
        #[serde(default)]
        word_table: Option<PathBuf>,
        /// Fault injection: every call after this many fails.
        #[serde(default)]
        outage_after_calls: Option<usize>,
    },
    Http {
        endpoint: String,
        dialect: HttpDialect,
        #[serde(default = "default_key_env")]
        api_key_env: String,
        #[serde(default = "default_timeout_secs")]
        timeout_secs: u64,
    },
}

fn default_key_env() -> String {
    TRANSLATE_KEY_ENV.to_string()
}

fn default_timeout_secs() -> u64 {
    30
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TranslatorSettings {
    #[serde(flatten)]
    pub provider: ProviderSettings,
    /// JSON-lines cache; relative paths live under the output directory.
    pub cache: PathBuf,
    pub max_in_flight: usize,
    pub retry: RetryPolicy,
}

impl Default for TranslatorSettings {
    fn default() -> Self {
        Self {
            provider: ProviderSettings::Stub {
                word_table: None,
                outage_after_calls: None,
            },
            cache: PathBuf::from("cache/translations.jsonl"),
            max_in_flight: 4,
            retry: RetryPolicy::default(),
        }
    }
}

impl TranslatorSettings {
    pub fn timeout(&self) -> Duration {
        match &self.provider {
            ProviderSettings::Http { timeout_secs, .. } => Duration::from_secs(*timeout_secs),
            ProviderSettings::Stub { .. } => Duration::ZERO,
        }
    }
}

/// A model to run, with hyperparameter overrides on top of the kind's
/// defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEntry {
    pub kind: ModelKind,
    #[serde(default)]
    pub hyper: serde_json::Map<String, serde_json::Value>,
}

impl ModelEntry {
    pub fn hyperparameters(&self) -> Result<Hyperparameters, WorkbenchError> {
        let mut base = serde_json::to_value(Hyperparameters::for_kind(self.kind))
            .map_err(|e| WorkbenchError::Config(e.to_string()))?;
        merge(&mut base, &serde_json::Value::Object(self.hyper.clone()));
        serde_json::from_value(base)
            .map_err(|e| WorkbenchError::Config(format!("hyperparameters for {}: {e}", self.kind.as_str())))
    }

    pub fn spec(&self, language: Language) -> Result<ModelSpec, WorkbenchError> {
        ModelSpec::with_hyper(self.kind, language, self.hyperparameters()?)
            .map_err(|e| WorkbenchError::Config(e.to_string()))
    }
}

fn merge(base: &mut serde_json::Value, patch: &serde_json::Value) {
    match (base, patch) {
        (serde_json::Value::Object(b), serde_json::Value::Object(p)) => {
            for (k, v) in p {
                merge(b.entry(k.clone()).or_insert(serde_json::Value::Null), v);
            }
        }
        (b, p) => *b = p.clone(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub datasets: BTreeMap<Language, DatasetPaths>,
    #[serde(default = "ColumnMap::trac2")]
    pub columns: ColumnMap,
    #[serde(default = "all_languages")]
    pub languages: Vec<Language>,
    #[serde(default = "all_variants")]
    pub variants: Vec<DatasetVariant>,
    pub models: Vec<ModelEntry>,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub resources: BTreeMap<Language, NoiseResources>,
    #[serde(default)]
    pub balance: BalanceSettings,
    #[serde(default)]
    pub translator: TranslatorSettings,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_validation_fraction")]
    pub validation_fraction: f64,
    /// Pretrained checkpoint cache; falls back to `AGGROBENCH_PRETRAINED_DIR`.
    #[serde(default)]
    pub pretrained_dir: Option<PathBuf>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default = "one")]
    pub workers: usize,
    #[serde(default)]
    pub offline: bool,
}

fn all_languages() -> Vec<Language> {
    Language::ALL.to_vec()
}

fn all_variants() -> Vec<DatasetVariant> {
    DatasetVariant::ALL.to_vec()
}

fn default_validation_fraction() -> f64 {
    0.1
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn one() -> usize {
    1
}

/// Command-line values that replace or narrow the config.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub variants: Vec<DatasetVariant>,
    pub languages: Vec<Language>,
    pub models: Vec<ModelKind>,
    pub seed: Option<u64>,
    pub offline: bool,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Reads `path`; relative paths inside are taken relative to its folder.
    pub fn load(path: &Path) -> Result<Self, WorkbenchError> {
        let raw = fs::read_to_string(path)
            .map_err(|e| WorkbenchError::Input(format!("{}: {e}", path.display())))?;
        let mut config: ExperimentConfig = serde_json::from_str(&raw)
            .map_err(|e| WorkbenchError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.rebase(base);
        Ok(config)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for d in self.datasets.values_mut() {
            fix(&mut d.train);
            fix(&mut d.test);
        }
        for r in self.resources.values_mut() {
            r.lexicon.as_mut().map(fix);
            r.stopwords.as_mut().map(fix);
        }
        if let ProviderSettings::Stub { word_table: Some(t), .. } = &mut self.translator.provider {
            fix(t);
        }
        if let Some(p) = self.pretrained_dir.as_mut() {
            fix(p);
        }
        for m in &mut self.models {
            if let Some(serde_json::Value::String(c)) = m.hyper.get_mut("checkpoint") {
                // Only rebase ids that name an existing relative directory.
                let candidate = base.join(&*c);
                if Path::new(c).is_relative() && candidate.is_dir() {
                    *c = candidate.to_string_lossy().into_owned();
                }
            }
        }
        fix(&mut self.out);
    }

    pub fn apply(&mut self, o: &Overrides) {
        if !o.variants.is_empty() {
            self.variants = o.variants.clone();
        }
        if !o.languages.is_empty() {
            self.languages = o.languages.clone();
        }
        if !o.models.is_empty() {
            self.models.retain(|m| o.models.contains(&m.kind));
            for kind in &o.models {
                if !self.models.iter().any(|m| m.kind == *kind) {
                    self.models.push(ModelEntry {
                        kind: *kind,
                        hyper: Default::default(),
                    });
                }
            }
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
        self.offline |= o.offline;
        if let Some(w) = o.workers {
            self.workers = w;
        }
        if let Some(out) = &o.out {
            self.out = out.clone();
        }
    }

    /// Languages other than `target` with datasets; the donors for
    /// translation.
    pub fn donors(&self, target: Language) -> Vec<Language> {
        self.datasets.keys().copied().filter(|l| *l != target).collect()
    }

    pub fn translation_cache_path(&self) -> PathBuf {
        if self.translator.cache.is_relative() {
            self.out.join(&self.translator.cache)
        } else {
            self.translator.cache.clone()
        }
    }

    pub fn validate(&self) -> Result<(), WorkbenchError> {
        let cfg = |m: String| Err(WorkbenchError::Config(m));
        if self.languages.is_empty() || self.variants.is_empty() || self.models.is_empty() {
            return cfg("languages, variants and models must each name at least one entry".into());
        }
        for lang in &self.languages {
            if !self.datasets.contains_key(lang) {
                return cfg(format!("no dataset configured for {}", lang.name()));
            }
        }
        for (lang, d) in &self.datasets {
            for p in [&d.train, &d.test] {
                if !p.is_file() {
                    return Err(WorkbenchError::Input(format!(
                        "{} dataset file not found: {}",
                        lang.name(),
                        p.display()
                    )));
                }
            }
        }
        for r in self.resources.values() {
            for p in [&r.lexicon, &r.stopwords].into_iter().flatten() {
                if !p.is_file() {
                    return Err(WorkbenchError::Input(format!("resource file not found: {}", p.display())));
                }
            }
        }
        if let ProviderSettings::Stub { word_table: Some(t), .. } = &self.translator.provider {
            if !t.is_file() {
                return Err(WorkbenchError::Input(format!("word table not found: {}", t.display())));
            }
        }
        if self.variants.contains(&DatasetVariant::MachineTranslated) {
            for lang in &self.languages {
                if self.donors(*lang).is_empty() {
                    return cfg(format!(
                        "the machine_translated variant for {} needs at least one other language",
                        lang.name()
                    ));
                }
            }
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return cfg(format!("validation_fraction {} outside (0, 1)", self.validation_fraction));
        }
        if self.workers == 0 {
            return cfg("workers must be at least 1".into());
        }
        if self.balance.strategy == BalanceStrategy::ExplicitTargets {
            for lang in &self.languages {
                if !self.balance.targets.contains_key(lang) {
                    return cfg(format!("explicit_targets balancing has no targets for {}", lang.name()));
                }
            }
        }
        self.noise
            .validate()
            .map_err(|e| WorkbenchError::Config(e.to_string()))?;
        for m in &self.models {
            m.hyperparameters()?;
        }
        Ok(())
    }
}
