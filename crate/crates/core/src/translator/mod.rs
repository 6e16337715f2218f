//! Cached, rate-limited machine translation.
//!
//! [`TranslationService`] wraps a [`TranslationProvider`] with a persistent
//! cache, bounded exponential-backoff retries and a hard bound on the number
//! of provider calls in flight. With a warm cache no provider call is made, so
//! translated corpora are reproducible even though live MT output drifts.

mod cache;
mod provider;

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use cache::{cache_key, TranslationCache, TranslationCacheEntry};
pub use provider::{
    FaultPlan, HttpDialect, HttpTranslator, ProviderError, StubTranslator, TranslationProvider,
};

use crate::corpus::Language;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TranslationRequest {
    text: String,
    source: Language,
    target: Language,
}

impl TranslationRequest {
    pub fn new(text: &str, source: Language, target: Language) -> Result<Self, TranslateError> {
        if source == target {
            return Err(TranslateError::InvalidRequest(format!(
                "source and target are both {source}"
            )));
        }
        if text.trim().is_empty() {
            return Err(TranslateError::InvalidRequest("empty text".into()));
        }
        Ok(Self {
            text: text.to_string(),
            source,
            target,
        })
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn source(&self) -> Language {
        self.source
    }

    pub fn target(&self) -> Language {
        self.target
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TranslateError {
    #[error("invalid translation request: {0}")]
    InvalidRequest(String),
    #[error("unsupported language pair {from}->{to}")]
    Unsupported { from: Language, to: Language },
    #[error("provider failed after {attempts} attempt(s): {message}")]
    Provider { attempts: u32, message: String },
    #[error("translation cache: {0}")]
    Cache(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    #[serde(with = "millis")]
    pub base_delay: Duration,
    #[serde(with = "millis")]
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 5,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(30),
        }
    }
}

impl RetryPolicy {
    /// No waiting between attempts; for tests and offline runs.
    pub fn immediate(max_attempts: u32) -> Self {
        Self {
            max_attempts,
            base_delay: Duration::ZERO,
            max_delay: Duration::ZERO,
        }
    }

    /// Delay before attempt `attempt + 1`, given `attempt` failures so far.
    pub fn backoff(&self, attempt: u32) -> Duration {
        let factor = 1u32.checked_shl(attempt.saturating_sub(1)).unwrap_or(u32::MAX);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }
}

mod millis {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        u64::deserialize(d).map(Duration::from_millis)
    }
}

/// Counting semaphore guarding provider calls.
struct InFlight {
    limit: usize,
    active: Mutex<usize>,
    released: Condvar,
}

impl InFlight {
    fn acquire(&self) -> InFlightGuard<'_> {
        let mut active = self.active.lock().expect("in-flight lock poisoned");
        while *active >= self.limit {
            active = self.released.wait(active).expect("in-flight lock poisoned");
        }
        *active += 1;
        InFlightGuard(self)
    }
}

struct InFlightGuard<'a>(&'a InFlight);

impl Drop for InFlightGuard<'_> {
    fn drop(&mut self) {
        let mut active = self.0.active.lock().expect("in-flight lock poisoned");
        *active -= 1;
        self.0.released.notify_one();
    }
}

/// Shared translation front end; safe for concurrent callers.
pub struct TranslationService {
    provider: Box<dyn TranslationProvider>,
    cache: Mutex<TranslationCache>,
    retry: RetryPolicy,
    in_flight: InFlight,
    provider_calls: AtomicUsize,
}

impl TranslationService {
    pub fn new(provider: Box<dyn TranslationProvider>, cache: TranslationCache) -> Self {
        Self {
            provider,
            cache: Mutex::new(cache),
            retry: RetryPolicy::default(),
            in_flight: InFlight {
                limit: 4,
                active: Mutex::new(0),
                released: Condvar::new(),
            },
            provider_calls: AtomicUsize::new(0),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    /// Upper bound on simultaneous provider calls across all callers.
    pub fn with_max_in_flight(mut self, limit: usize) -> Self {
        self.in_flight.limit = limit.max(1);
        self
    }

    pub fn provider_id(&self) -> &str {
        self.provider.id()
    }

    /// Provider invocations made by this service, including failed attempts.
    pub fn provider_calls(&self) -> usize {
        self.provider_calls.load(Ordering::SeqCst)
    }

    pub fn cached_entries(&self) -> usize {
        self.cache.lock().expect("cache lock poisoned").len()
    }

    pub fn translate(&self, request: &TranslationRequest) -> Result<String, TranslateError> {
        if let Some(hit) = self.cache.lock().expect("cache lock poisoned").get(request) {
            return Ok(hit.to_string());
        }
        let translated = self.call_with_retries(request)?;
        self.cache
            .lock()
            .expect("cache lock poisoned")
            .insert(request, translated.clone(), self.provider.id())
            .map_err(|e| TranslateError::Cache(e.to_string()))?;
        Ok(translated)
    }

    fn call_with_retries(&self, request: &TranslationRequest) -> Result<String, TranslateError> {
        let mut attempt = 0;
        loop {
            attempt += 1;
            let outcome = {
                let _slot = self.in_flight.acquire();
                self.provider_calls.fetch_add(1, Ordering::SeqCst);
                self.provider
                    .translate(request.text(), request.source(), request.target())
            };
            let wait = match outcome {
                Ok(text) => return Ok(text),
                Err(ProviderError::Unsupported { from, to }) => {
                    return Err(TranslateError::Unsupported { from, to })
                }
                Err(ProviderError::Fatal(message)) => {
                    return Err(TranslateError::Provider {
                        attempts: attempt,
                        message,
                    })
                }
                Err(e) if attempt >= self.retry.max_attempts => {
                    return Err(TranslateError::Provider {
                        attempts: attempt,
                        message: e.to_string(),
                    })
                }
                Err(ProviderError::RateLimited {
                    retry_after: Some(d),
                }) => d,
                Err(_) => self.retry.backoff(attempt),
            };
            if !wait.is_zero() {
                std::thread::sleep(wait);
            }
        }
    }

    /// Translates `requests` with at most `max_in_flight` worker threads.
    ///
    /// Output index `i` always belongs to request `i`. Failures are reported
    /// per index; the remaining requests still complete. Duplicate requests
    /// are translated once.
    pub fn translate_batch(
        &self,
        requests: &[TranslationRequest],
        max_in_flight: usize,
    ) -> Vec<Result<String, TranslateError>> {
        let mut unique: Vec<&TranslationRequest> = Vec::new();
        let mut slot_of: HashMap<&TranslationRequest, usize> = HashMap::new();
        let positions: Vec<usize> = requests
            .iter()
            .map(|r| {
                *slot_of.entry(r).or_insert_with(|| {
                    unique.push(r);
                    unique.len() - 1
                })
            })
            .collect();

        let results: Vec<Mutex<Option<Result<String, TranslateError>>>> =
            unique.iter().map(|_| Mutex::new(None)).collect();
        let next = AtomicUsize::new(0);
        let workers = max_in_flight.max(1).min(unique.len());
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    let Some(request) = unique.get(i) else { break };
                    let outcome = self.translate(request);
                    *results[i].lock().expect("result lock poisoned") = Some(outcome);
                });
            }
        });
        let results: Vec<Result<String, TranslateError>> = results
            .into_iter()
            .map(|m| {
                m.into_inner()
                    .expect("result lock poisoned")
                    .expect("every unique request is processed")
            })
            .collect();
        positions.into_iter().map(|p| results[p].clone()).collect()
    }
}
