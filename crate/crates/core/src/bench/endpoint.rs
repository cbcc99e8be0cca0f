use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::{Hash, Hasher};
use std::time::Duration;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use super::prompt::target_story;

pub const API_KEY_ENV: &str = "STORYKG_API_KEY";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EndpointError {
    #[error("transport: {0}")]
    Transport(String),
    #[error("HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed completion response: {0}")]
    Malformed(String),
    #[error("endpoint configuration: {0}")]
    Config(String),
}

impl EndpointError {
    fn retryable(&self) -> bool {
        match self {
            EndpointError::Transport(_) => true,
            EndpointError::Status { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

/// Decoding settings. The defaults are deterministic: temperature 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeParams {
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for DecodeParams {
    fn default() -> Self {
        DecodeParams {
            temperature: 0.0,
            max_tokens: 256,
        }
    }
}

pub trait ModelEndpoint: Send + Sync {
    fn name(&self) -> String;
    fn complete(&self, prompt: &str, params: &DecodeParams) -> Result<String, EndpointError>;
    /// Same prompt, same output. Used to pick the default repetition count.
    fn is_deterministic(&self) -> bool {
        false
    }
}

/// Client for the common chat-completions wire format:
/// `POST {base_url}/chat/completions` with
/// `{"model", "messages": [{"role": "user", "content": prompt}], "temperature", "max_tokens"}`;
/// the reply text is read from `choices[0].message.content`.
pub struct HttpChatEndpoint {
    client: reqwest::blocking::Client,
    base_url: String,
    model: String,
    api_key: Option<String>,
    max_retries: u32,
    backoff: Duration,
}

impl HttpChatEndpoint {
    /// The bearer token is read from `api_key_env` when set.
    pub fn new(base_url: &str, model: &str, api_key_env: &str, timeout: Duration) -> Result<Self, EndpointError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| EndpointError::Config(e.to_string()))?;
        Ok(HttpChatEndpoint {
            client,
            base_url: base_url.trim_end_matches('/').to_string(),
            model: model.to_string(),
            api_key: std::env::var(api_key_env).ok().filter(|k| !k.is_empty()),
            max_retries: 3,
            backoff: Duration::from_millis(500),
        })
    }

    pub fn with_retries(mut self, max_retries: u32, backoff: Duration) -> Self {
        self.max_retries = max_retries;
        self.backoff = backoff;
        self
    }

    fn attempt(&self, prompt: &str, params: &DecodeParams) -> Result<String, EndpointError> {
        let body = json!({
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": params.temperature,
            "max_tokens": params.max_tokens,
        });
        let mut req = self.client.post(format!("{}/chat/completions", self.base_url)).json(&body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| EndpointError::Transport(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| EndpointError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(EndpointError::Status {
                status: status.as_u16(),
                body: text.chars().take(500).collect(),
            });
        }
        let v: Value = serde_json::from_str(&text).map_err(|e| EndpointError::Malformed(e.to_string()))?;
        v.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| EndpointError::Malformed("missing choices[0].message.content".into()))
    }
}

impl ModelEndpoint for HttpChatEndpoint {
    fn name(&self) -> String {
        format!("http:{}", self.model)
    }

    fn complete(&self, prompt: &str, params: &DecodeParams) -> Result<String, EndpointError> {
        let mut delay = self.backoff;
        let mut attempt = 0;
        loop {
            match self.attempt(prompt, params) {
                Err(e) if e.retryable() && attempt < self.max_retries => {
                    tracing::warn!(attempt, "completion failed, retrying: {e}");
                    std::thread::sleep(delay);
                    delay *= 2;
                    attempt += 1;
                }
                other => return other,
            }
        }
    }
}

/// Answers each prompt with a fixed response chosen by its target story.
/// Unknown stories get an empty reply.
pub struct EchoStub {
    responses: HashMap<String, String>,
}

impl EchoStub {
    pub fn new(responses: impl IntoIterator<Item = (String, String)>) -> Self {
        EchoStub {
            responses: responses.into_iter().map(|(s, r)| (s.trim().to_string(), r)).collect(),
        }
    }
}

impl ModelEndpoint for EchoStub {
    fn name(&self) -> String {
        "stub:echo".into()
    }

    fn complete(&self, prompt: &str, _params: &DecodeParams) -> Result<String, EndpointError> {
        Ok(target_story(prompt)
            .and_then(|s| self.responses.get(s.trim()))
            .cloned()
            .unwrap_or_default())
    }

    fn is_deterministic(&self) -> bool {
        true
    }
}

/// Like [`EchoStub`] but shuffles the words of the question and of the
/// answer. The shuffle is seeded from the prompt text.
pub struct ShuffleStub {
    inner: EchoStub,
    seed: u64,
}

impl ShuffleStub {
    pub fn new(responses: impl IntoIterator<Item = (String, String)>, seed: u64) -> Self {
        ShuffleStub {
            inner: EchoStub::new(responses),
            seed,
        }
    }
}

impl ModelEndpoint for ShuffleStub {
    fn name(&self) -> String {
        "stub:shuffle".into()
    }

    fn complete(&self, prompt: &str, params: &DecodeParams) -> Result<String, EndpointError> {
        let base = self.inner.complete(prompt, params)?;
        let mut hasher = DefaultHasher::new();
        prompt.hash(&mut hasher);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ hasher.finish());
        let lines: Vec<String> = base
            .lines()
            .map(|line| match line.split_once(": ") {
                Some((label, value)) if label == "question" || label == "answer" => {
                    let mut words: Vec<&str> = value.split_whitespace().collect();
                    words.shuffle(&mut rng);
                    format!("{label}: {}", words.join(" "))
                }
                _ => line.to_string(),
            })
            .collect();
        Ok(lines.join("\n"))
    }

    fn is_deterministic(&self) -> bool {
        true
    }
}

/// Always replies with text that carries no labeled lines.
pub struct UnparseableStub;

impl ModelEndpoint for UnparseableStub {
    fn name(&self) -> String {
        "stub:unparseable".into()
    }

    fn complete(&self, _prompt: &str, _params: &DecodeParams) -> Result<String, EndpointError> {
        Ok("I cannot help with that.".into())
    }

    fn is_deterministic(&self) -> bool {
        true
    }
}

/// Fails every request with a transport error.
pub struct FailingStub;

impl ModelEndpoint for FailingStub {
    fn name(&self) -> String {
        "stub:failing".into()
    }

    fn complete(&self, _prompt: &str, _params: &DecodeParams) -> Result<String, EndpointError> {
        Err(EndpointError::Transport("connection refused".into()))
    }

    fn is_deterministic(&self) -> bool {
        true
    }
}
