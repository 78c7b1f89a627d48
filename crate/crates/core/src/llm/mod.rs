//! Prompt operators, chat-completion clients, response caching and parsing.
//!
//! [`Llm`] is the entry point used by the augmentation code. It wraps any
//! [`ChatClient`] with an in-memory and optional on-disk cache, a bound on
//! concurrent in-flight requests and a minimum spacing between requests.

mod cache;
mod client;
mod mock;
mod parse;
pub mod prompt;

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use parking_lot::{Condvar, Mutex};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use cache::DiskCache;
pub use client::{looks_like_refusal, HttpClient, HttpClientConfig, RetryPolicy, DEFAULT_API_KEY_ENV, DEFAULT_ENDPOINT};
pub use mock::{MockClient, MockEntry, MockFixtures, TranscriptClient, TranscriptEntry};
pub use parse::{parse_generation, parse_mentions, parse_paraphrases, GenerationBundle};
pub use prompt::{render_prompt, OperatorKind, PromptOperator};

pub const DEFAULT_MODEL: &str = "gpt-3.5-turbo";
pub const DEFAULT_MAX_TOKENS: u32 = 1024;
pub const DEFAULT_CONCURRENCY: usize = 4;

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("template slot `{slot}`: {message}")]
    Template { slot: String, message: String },
    #[error("could not parse response: {message}")]
    Parse { message: String, raw: String },
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { message: String, attempts: usize },
    #[error("provider refused the request")]
    Refusal { raw: String },
    #[error("no mock response for prompt hash {prompt_hash} ({operator})")]
    MissingFixture { prompt_hash: String, operator: String },
    #[error("llm configuration: {0}")]
    Config(String),
    #[error("cache i/o at {path}: {source}")]
    Cache {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl LlmError {
    pub(crate) fn parse(message: impl Into<String>, raw: &str) -> Self {
        LlmError::Parse {
            message: message.into(),
            raw: raw.to_string(),
        }
    }
}

/// One chat-completion request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    /// Operator name (e.g. `SYN+NCE`), carried for logging and transcript lookup.
    pub operator: String,
    pub model: String,
    pub prompt: String,
    pub temperature: f32,
    pub max_tokens: u32,
}

impl CompletionRequest {
    /// Content hash of `(model, prompt, temperature)`.
    pub fn cache_key(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.model.as_bytes());
        h.update([0u8]);
        h.update(format!("{:.4}", self.temperature).as_bytes());
        h.update([0u8]);
        h.update(self.prompt.as_bytes());
        hex::encode(h.finalize())
    }
}

/// SHA-256 of the rendered prompt alone; the key of mock fixture files.
pub fn prompt_hash(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

/// A completed request/response round trip as stored in the cache.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmExchange {
    pub operator: String,
    pub prompt: String,
    pub response: String,
    pub model: String,
    pub temperature: f32,
    pub cache_key: String,
    /// RFC 3339 time the response was first received.
    pub timestamp: String,
}

/// A backend that turns a prompt into raw response text.
pub trait ChatClient: Send + Sync {
    fn complete_raw(&self, request: &CompletionRequest) -> Result<String, LlmError>;
}

impl<T: ChatClient + ?Sized> ChatClient for std::sync::Arc<T> {
    fn complete_raw(&self, request: &CompletionRequest) -> Result<String, LlmError> {
        (**self).complete_raw(request)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LlmSettings {
    pub model: String,
    pub temperature: f32,
    pub max_tokens: u32,
    /// Maximum requests in flight at once (at least 1).
    pub concurrency: usize,
    /// Minimum spacing between the starts of two backend requests.
    pub min_interval: Duration,
}

impl Default for LlmSettings {
    fn default() -> Self {
        LlmSettings {
            model: DEFAULT_MODEL.to_string(),
            temperature: 0.0,
            max_tokens: DEFAULT_MAX_TOKENS,
            concurrency: DEFAULT_CONCURRENCY,
            min_interval: Duration::ZERO,
        }
    }
}

/// Counting semaphore for bounding in-flight requests.
struct Slots {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Slots {
    fn acquire(&self) -> SlotGuard<'_> {
        let mut free = self.free.lock();
        while *free == 0 {
            self.cv.wait(&mut free);
        }
        *free -= 1;
        SlotGuard(self)
    }
}

struct SlotGuard<'a>(&'a Slots);

impl Drop for SlotGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock() += 1;
        self.0.cv.notify_one();
    }
}

/// Cached, rate-limited front end over a [`ChatClient`].
pub struct Llm {
    client: Box<dyn ChatClient>,
    settings: LlmSettings,
    disk: Option<DiskCache>,
    memory: Mutex<HashMap<String, LlmExchange>>,
    slots: Slots,
    last_start: Mutex<Option<Instant>>,
    backend_calls: AtomicUsize,
    cache_hits: AtomicUsize,
}

impl Llm {
    pub fn new(client: Box<dyn ChatClient>, settings: LlmSettings) -> Self {
        let concurrency = settings.concurrency.max(1);
        Llm {
            client,
            settings,
            disk: None,
            memory: Mutex::new(HashMap::new()),
            slots: Slots {
                free: Mutex::new(concurrency),
                cv: Condvar::new(),
            },
            last_start: Mutex::new(None),
            backend_calls: AtomicUsize::new(0),
            cache_hits: AtomicUsize::new(0),
        }
    }

    pub fn with_disk_cache(mut self, cache: DiskCache) -> Self {
        self.disk = Some(cache);
        self
    }

    pub fn settings(&self) -> &LlmSettings {
        &self.settings
    }

    /// Number of requests that reached the backend client.
    pub fn backend_calls(&self) -> usize {
        self.backend_calls.load(Ordering::SeqCst)
    }

    pub fn cache_hits(&self) -> usize {
        self.cache_hits.load(Ordering::SeqCst)
    }

    /// Builds a request for `prompt` with the configured model settings.
    pub fn request(&self, operator: &str, prompt: String) -> CompletionRequest {
        CompletionRequest {
            operator: operator.to_string(),
            model: self.settings.model.clone(),
            prompt,
            temperature: self.settings.temperature,
            max_tokens: self.settings.max_tokens,
        }
    }

    /// Renders `op` with `slots` and completes it.
    pub fn run(
        &self,
        op: &PromptOperator,
        slots: &std::collections::BTreeMap<String, String>,
    ) -> Result<LlmExchange, LlmError> {
        let prompt = render_prompt(op, slots)?;
        self.complete(&self.request(&op.name, prompt))
    }

    /// Serves `request` from cache when possible, otherwise from the backend.
    pub fn complete(&self, request: &CompletionRequest) -> Result<LlmExchange, LlmError> {
        let key = request.cache_key();
        if let Some(hit) = self.memory.lock().get(&key) {
            self.cache_hits.fetch_add(1, Ordering::SeqCst);
            return Ok(hit.clone());
        }
        if let Some(disk) = &self.disk {
            if let Some(hit) = disk.get(&key)? {
                self.cache_hits.fetch_add(1, Ordering::SeqCst);
                self.memory.lock().insert(key, hit.clone());
                return Ok(hit);
            }
        }

        let response = {
            let _slot = self.slots.acquire();
            self.pace();
            self.backend_calls.fetch_add(1, Ordering::SeqCst);
            self.client.complete_raw(request)?
        };
        let exchange = LlmExchange {
            operator: request.operator.clone(),
            prompt: request.prompt.clone(),
            response,
            model: request.model.clone(),
            temperature: request.temperature,
            cache_key: key.clone(),
            timestamp: chrono::Utc::now().to_rfc3339(),
        };
        if let Some(disk) = &self.disk {
            disk.put(&exchange)?;
        }
        self.memory.lock().insert(key, exchange.clone());
        Ok(exchange)
    }

    /// Sleeps until at least `min_interval` has passed since the previous start.
    fn pace(&self) {
        if self.settings.min_interval.is_zero() {
            return;
        }
        let mut last = self.last_start.lock();
        if let Some(prev) = *last {
            let due = prev + self.settings.min_interval;
            let now = Instant::now();
            if due > now {
                std::thread::sleep(due - now);
            }
        }
        *last = Some(Instant::now());
    }
}
