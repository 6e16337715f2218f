use std::collections::{HashMap, HashSet};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::corpus::Language;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProviderError {
    /// Network failure or 5xx; worth retrying.
    #[error("transient provider failure: {0}")]
    Transient(String),
    #[error("rate limited")]
    RateLimited { retry_after: Option<Duration> },
    #[error("unsupported language pair {from}->{to}")]
    Unsupported { from: Language, to: Language },
    #[error("provider rejected the request: {0}")]
    Fatal(String),
}

/// A machine-translation backend. Implementations must be safe to call from
/// several threads at once; the service bounds how many calls are in flight.
pub trait TranslationProvider: Send + Sync {
    fn id(&self) -> &str;

    fn translate(&self, text: &str, source: Language, target: Language)
        -> Result<String, ProviderError>;
}

/// How the stub fails on purpose.
#[derive(Debug, Clone, Default)]
pub struct FaultPlan {
    /// Texts that always fail.
    pub failing_texts: HashSet<String>,
    /// Every call after this many calls fails (an outage).
    pub outage_after_calls: Option<usize>,
    /// Respond with a rate-limit signal this many times before succeeding.
    pub rate_limit_first: usize,
}

/// Deterministic offline translator.
///
/// A whole-text mapping is consulted first, then a word mapping token by
/// token. Words without a mapping are kept and tagged with the source language
/// as `[bn]word`, which [`StubTranslator::untag`] undoes.
#[derive(Debug, Default)]
pub struct StubTranslator {
    texts: HashMap<(Language, Language, String), String>,
    words: HashMap<(Language, Language, String), String>,
    faults: FaultPlan,
    latency: Duration,
    calls: AtomicUsize,
    in_flight: AtomicUsize,
    max_in_flight: AtomicUsize,
    rate_limited: AtomicUsize,
    log: Mutex<Vec<String>>,
}

impl StubTranslator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_text(mut self, source: Language, target: Language, from: &str, to: &str) -> Self {
        self.texts
            .insert((source, target, from.to_string()), to.to_string());
        self
    }

    pub fn with_word(mut self, source: Language, target: Language, from: &str, to: &str) -> Self {
        self.words
            .insert((source, target, from.to_lowercase()), to.to_string());
        self
    }

    /// Loads a TSV word table: `source<TAB>target<TAB>word<TAB>translation`.
    pub fn with_word_table(mut self, table: &str) -> Result<Self, String> {
        for (n, line) in table.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 4 {
                return Err(format!("line {}: expected 4 tab-separated fields", n + 1));
            }
            let src: Language = fields[0].parse().map_err(|e| format!("line {}: {e}", n + 1))?;
            let dst: Language = fields[1].parse().map_err(|e| format!("line {}: {e}", n + 1))?;
            self = self.with_word(src, dst, fields[2], fields[3]);
        }
        Ok(self)
    }

    pub fn with_faults(mut self, faults: FaultPlan) -> Self {
        self.faults = faults;
        self
    }

    /// Sleep this long inside every call; used to make concurrency observable.
    pub fn with_latency(mut self, latency: Duration) -> Self {
        self.latency = latency;
        self
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    /// Highest number of simultaneous calls seen so far.
    pub fn max_observed_in_flight(&self) -> usize {
        self.max_in_flight.load(Ordering::SeqCst)
    }

    /// Texts in the order the stub received them.
    pub fn call_log(&self) -> Vec<String> {
        self.log.lock().expect("stub log poisoned").clone()
    }

    pub fn tag(source: Language, word: &str) -> String {
        format!("[{}]{word}", source.code())
    }

    pub fn untag(text: &str) -> String {
        text.split(' ')
            .map(|w| {
                Language::ALL
                    .iter()
                    .find_map(|l| w.strip_prefix(&format!("[{}]", l.code())))
                    .unwrap_or(w)
            })
            .collect::<Vec<_>>()
            .join(" ")
    }

    fn render(&self, text: &str, source: Language, target: Language) -> String {
        if let Some(t) = self.texts.get(&(source, target, text.to_string())) {
            return t.clone();
        }
        text.split_whitespace()
            .map(|w| match self.words.get(&(source, target, w.to_lowercase())) {
                Some(t) => t.clone(),
                None => Self::tag(source, w),
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

impl TranslationProvider for StubTranslator {
    fn id(&self) -> &str {
        "stub"
    }

    fn translate(
        &self,
        text: &str,
        source: Language,
        target: Language,
    ) -> Result<String, ProviderError> {
        let call = self.calls.fetch_add(1, Ordering::SeqCst) + 1;
        let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        self.max_in_flight.fetch_max(now, Ordering::SeqCst);
        self.log
            .lock()
            .expect("stub log poisoned")
            .push(text.to_string());
        if !self.latency.is_zero() {
            std::thread::sleep(self.latency);
        }
        let result = if self.faults.failing_texts.contains(text) {
            Err(ProviderError::Fatal(format!("injected failure for {text:?}")))
        } else if self.faults.outage_after_calls.is_some_and(|n| call > n) {
            Err(ProviderError::Transient("injected outage".into()))
        } else if self.rate_limited.load(Ordering::SeqCst) < self.faults.rate_limit_first {
            self.rate_limited.fetch_add(1, Ordering::SeqCst);
            Err(ProviderError::RateLimited {
                retry_after: Some(Duration::ZERO),
            })
        } else {
            Ok(self.render(text, source, target))
        };
        self.in_flight.fetch_sub(1, Ordering::SeqCst);
        result
    }
}

/// Wire dialect spoken by [`HttpTranslator`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HttpDialect {
    /// `{"q","source","target","format","api_key"}` → `{"translatedText"}`
    LibreTranslate,
    /// Google Cloud Translation v2: key as query parameter,
    /// response `{"data":{"translations":[{"translatedText"}]}}`.
    GoogleV2,
}

/// HTTPS JSON adapter for a live translation endpoint.
pub struct HttpTranslator {
    endpoint: String,
    api_key: Option<String>,
    dialect: HttpDialect,
    agent: ureq::Agent,
    id: String,
}

impl HttpTranslator {
    pub fn new(endpoint: &str, api_key: Option<String>, dialect: HttpDialect, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            endpoint: endpoint.to_string(),
            api_key,
            dialect,
            agent,
            id: format!("http:{endpoint}"),
        }
    }

    /// Reads the API key from `key_var`, if set.
    pub fn from_env(endpoint: &str, key_var: &str, dialect: HttpDialect, timeout: Duration) -> Self {
        Self::new(endpoint, std::env::var(key_var).ok(), dialect, timeout)
    }
}

#[derive(Deserialize)]
struct LibreResponse {
    #[serde(rename = "translatedText")]
    translated_text: String,
}

#[derive(Deserialize)]
struct GoogleResponse {
    data: GoogleData,
}

#[derive(Deserialize)]
struct GoogleData {
    translations: Vec<LibreResponse>,
}

impl TranslationProvider for HttpTranslator {
    fn id(&self) -> &str {
        &self.id
    }

    fn translate(
        &self,
        text: &str,
        source: Language,
        target: Language,
    ) -> Result<String, ProviderError> {
        let mut body = serde_json::json!({
            "q": text,
            "source": source.code(),
            "target": target.code(),
            "format": "text",
        });
        let mut url = self.endpoint.clone();
        match (self.dialect, &self.api_key) {
            (HttpDialect::LibreTranslate, Some(key)) => body["api_key"] = key.clone().into(),
            (HttpDialect::GoogleV2, Some(key)) => {
                url.push(if url.contains('?') { '&' } else { '?' });
                url.push_str("key=");
                url.push_str(key);
            }
            (_, None) => {}
        }
        let mut response = self
            .agent
            .post(&url)
            .send_json(&body)
            .map_err(|e| ProviderError::Transient(e.to_string()))?;
        let status = response.status().as_u16();
        match status {
            200..=299 => {}
            429 => {
                let retry_after = response
                    .headers()
                    .get("retry-after")
                    .and_then(|v| v.to_str().ok())
                    .and_then(|v| v.trim().parse::<u64>().ok())
                    .map(Duration::from_secs);
                return Err(ProviderError::RateLimited { retry_after });
            }
            500..=599 => return Err(ProviderError::Transient(format!("HTTP {status}"))),
            _ => {
                let detail = response.body_mut().read_to_string().unwrap_or_default();
                if detail.to_lowercase().contains("not supported") {
                    return Err(ProviderError::Unsupported { from: source, to: target });
                }
                return Err(ProviderError::Fatal(format!("HTTP {status}: {detail}")));
            }
        }
        let body = response.body_mut();
        let translated = match self.dialect {
            HttpDialect::LibreTranslate => body
                .read_json::<LibreResponse>()
                .map(|r| r.translated_text),
            HttpDialect::GoogleV2 => body.read_json::<GoogleResponse>().map(|r| {
                r.data
                    .translations
                    .into_iter()
                    .next()
                    .map(|t| t.translated_text)
                    .unwrap_or_default()
            }),
        }
        .map_err(|e| ProviderError::Fatal(format!("malformed response: {e}")))?;
        Ok(translated)
    }
}
