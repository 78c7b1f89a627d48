//! OpenAI-compatible chat-completions client with retry and refusal detection.

use std::time::Duration;

use serde_json::{json, Value};

use super::{ChatClient, CompletionRequest, LlmError};

pub const DEFAULT_API_KEY_ENV: &str = "OPENAI_API_KEY";
pub const DEFAULT_ENDPOINT: &str = "https://api.openai.com/v1/chat/completions";

/// Exponential backoff for transient failures (HTTP 429, 5xx, transport errors).
#[derive(Debug, Clone, PartialEq)]
pub struct RetryPolicy {
    /// Retries after the first attempt; total attempts = `max_retries + 1`.
    pub max_retries: usize,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 5,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(30),
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `retry` (0-based): `base * 2^retry`, capped.
    pub fn delay(&self, retry: usize) -> Duration {
        let factor = 1u32.checked_shl(retry.min(31) as u32).unwrap_or(u32::MAX);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }
}

#[derive(Debug, Clone)]
pub struct HttpClientConfig {
    pub endpoint: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
    pub retry: RetryPolicy,
}

impl Default for HttpClientConfig {
    fn default() -> Self {
        HttpClientConfig {
            endpoint: DEFAULT_ENDPOINT.to_string(),
            api_key: None,
            timeout: Duration::from_secs(120),
            retry: RetryPolicy::default(),
        }
    }
}

impl HttpClientConfig {
    /// Reads the API key from environment variable `var`.
    pub fn with_key_from_env(mut self, var: &str) -> Result<Self, LlmError> {
        match std::env::var(var) {
            Ok(key) if !key.trim().is_empty() => {
                self.api_key = Some(key);
                Ok(self)
            }
            _ => Err(LlmError::Config(format!("environment variable {var} is not set"))),
        }
    }
}

pub struct HttpClient {
    agent: ureq::Agent,
    config: HttpClientConfig,
}

const REFUSAL_OPENINGS: &[&str] = &[
    "i'm sorry, but i can't",
    "i'm sorry, but i cannot",
    "i am sorry, but i cannot",
    "i cannot assist with",
    "i can't assist with",
    "i'm unable to help with",
    "as an ai language model, i cannot",
];

/// Heuristic check for a safety refusal in place of an answer.
pub fn looks_like_refusal(text: &str) -> bool {
    let head = text.trim_start().to_lowercase().replace('\u{2019}', "'");
    REFUSAL_OPENINGS.iter().any(|p| head.starts_with(p))
}

enum Attempt {
    Done(Result<String, LlmError>),
    Transient(String),
}

impl HttpClient {
    pub fn new(config: HttpClientConfig) -> Self {
        let agent = ureq::AgentBuilder::new().timeout(config.timeout).build();
        HttpClient { agent, config }
    }

    fn attempt(&self, body: &Value) -> Attempt {
        let mut req = self.agent.post(&self.config.endpoint);
        if let Some(key) = &self.config.api_key {
            req = req.set("Authorization", &format!("Bearer {key}"));
        }
        match req.send_json(body.clone()) {
            Ok(resp) => {
                let text = match resp.into_string() {
                    Ok(t) => t,
                    Err(e) => return Attempt::Transient(format!("reading response body: {e}")),
                };
                Attempt::Done(extract_content(&text))
            }
            Err(ureq::Error::Status(code, resp)) => {
                let text = resp.into_string().unwrap_or_default();
                if code == 429 || code >= 500 {
                    Attempt::Transient(format!("HTTP {code}: {}", truncate(&text)))
                } else if text.contains("content_policy") || text.contains("content_filter") {
                    Attempt::Done(Err(LlmError::Refusal { raw: text }))
                } else {
                    Attempt::Done(Err(LlmError::Transport {
                        message: format!("HTTP {code}: {}", truncate(&text)),
                        attempts: 1,
                    }))
                }
            }
            Err(ureq::Error::Transport(t)) => Attempt::Transient(t.to_string()),
        }
    }
}

fn truncate(s: &str) -> String {
    s.chars().take(300).collect()
}

/// Pulls `choices[0].message.content` out of a chat-completions body.
fn extract_content(body: &str) -> Result<String, LlmError> {
    let v: Value = serde_json::from_str(body).map_err(|e| LlmError::Transport {
        message: format!("malformed provider response ({e}): {}", truncate(body)),
        attempts: 1,
    })?;
    let choice = &v["choices"][0];
    let message = &choice["message"];
    if let Some(refusal) = message["refusal"].as_str() {
        return Err(LlmError::Refusal { raw: refusal.to_string() });
    }
    let content = message["content"].as_str().map(str::to_string);
    if choice["finish_reason"].as_str() == Some("content_filter") {
        return Err(LlmError::Refusal {
            raw: content.unwrap_or_default(),
        });
    }
    let content = content.ok_or_else(|| LlmError::Transport {
        message: format!("response has no message content: {}", truncate(body)),
        attempts: 1,
    })?;
    if looks_like_refusal(&content) {
        return Err(LlmError::Refusal { raw: content });
    }
    Ok(content)
}

impl ChatClient for HttpClient {
    fn complete_raw(&self, request: &CompletionRequest) -> Result<String, LlmError> {
        let body = json!({
            "model": request.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        });
        let policy = &self.config.retry;
        let mut last = String::new();
        for attempt in 0..=policy.max_retries {
            match self.attempt(&body) {
                Attempt::Done(Err(LlmError::Transport { message, .. })) => {
                    return Err(LlmError::Transport {
                        message,
                        attempts: attempt + 1,
                    })
                }
                Attempt::Done(result) => return result,
                Attempt::Transient(message) => {
                    log::warn!(
                        "{} attempt {} of {} failed: {message}",
                        request.operator,
                        attempt + 1,
                        policy.max_retries + 1
                    );
                    last = message;
                    if attempt < policy.max_retries {
                        std::thread::sleep(policy.delay(attempt));
                    }
                }
            }
        }
        Err(LlmError::Transport {
            message: last,
            attempts: policy.max_retries + 1,
        })
    }
}
