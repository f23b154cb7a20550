//! Chat-completion clients and the generation-side prompts.

mod generation;
mod http;
mod replay;

use std::collections::VecDeque;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use generation::{
    base_prompt, cot_prompt, describe_schema, extract_code, extraction_prompt, generate,
    generate_with_data, parse_extracted_record, Exchange, GeneratedProgram, GenerationError,
    GenerationStyle, COT_SYSTEM, EXTRACTION_SYSTEM,
};
pub use http::{HttpClient, TokenBucket};
pub use replay::{request_key, Fixture, RecordingClient, ReplayClient};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LlmError {
    #[error("authentication rejected: {0}")]
    Auth(String),
    #[error("rate limited: {0}")]
    RateLimit(String),
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("provider returned an empty reply")]
    EmptyReply,
    #[error("no recorded reply for request {0}")]
    MissingFixture(String),
}

impl LlmError {
    /// Worth another attempt after a pause.
    pub fn is_transient(&self) -> bool {
        matches!(self, LlmError::RateLimit(_) | LlmError::Transport(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Provider {
    /// `/chat/completions` request shape.
    #[default]
    OpenAi,
    /// `/v1/messages` request shape.
    Anthropic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            attempts: 3,
            backoff_ms: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmConfig {
    pub provider: Provider,
    pub endpoint: String,
    pub model_name: String,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Name of the environment variable holding the API key.
    pub api_key_ref: String,
    pub retry: RetryPolicy,
    /// Requests per minute shared by all workers; `None` disables throttling.
    pub requests_per_minute: Option<u32>,
    pub request_timeout_s: u64,
}

impl Default for LlmConfig {
    fn default() -> Self {
        LlmConfig {
            provider: Provider::OpenAi,
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model_name: "gpt-4o".into(),
            temperature: 0.0,
            max_tokens: 8192,
            api_key_ref: "OPENAI_API_KEY".into(),
            retry: RetryPolicy::default(),
            requests_per_minute: None,
            request_timeout_s: 300,
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read provider config: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid provider config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid provider config: {0}")]
    Invalid(String),
}

impl LlmConfig {
    pub fn from_toml_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        let cfg: LlmConfig = toml::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.temperature != 0.0 {
            return Err(ConfigError::Invalid("pipeline calls require temperature = 0".into()));
        }
        if self.model_name.is_empty() {
            return Err(ConfigError::Invalid("model_name is empty".into()));
        }
        if self.max_tokens == 0 {
            return Err(ConfigError::Invalid("max_tokens must be positive".into()));
        }
        Ok(())
    }
}

/// Anything that turns a (system, user) pair into assistant text.
pub trait LlmClient: Send + Sync {
    fn complete(&self, system: &str, user: &str) -> Result<String, LlmError>;
}

impl<T: LlmClient + ?Sized> LlmClient for Box<T> {
    fn complete(&self, system: &str, user: &str) -> Result<String, LlmError> {
        (**self).complete(system, user)
    }
}

impl<T: LlmClient + ?Sized> LlmClient for std::sync::Arc<T> {
    fn complete(&self, system: &str, user: &str) -> Result<String, LlmError> {
        (**self).complete(system, user)
    }
}

/// Queue of canned replies for tests and dry runs. Every request is logged.
#[derive(Debug, Default)]
pub struct ScriptedClient {
    replies: Mutex<VecDeque<Result<String, LlmError>>>,
    calls: Mutex<Vec<(String, String)>>,
}

impl ScriptedClient {
    pub fn new<I, S>(replies: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        ScriptedClient {
            replies: Mutex::new(replies.into_iter().map(|s| Ok(s.into())).collect()),
            calls: Mutex::new(Vec::new()),
        }
    }

    pub fn push(&self, reply: Result<String, LlmError>) {
        self.replies.lock().unwrap().push_back(reply);
    }

    pub fn calls(&self) -> Vec<(String, String)> {
        self.calls.lock().unwrap().clone()
    }

    pub fn remaining(&self) -> usize {
        self.replies.lock().unwrap().len()
    }
}

impl LlmClient for ScriptedClient {
    fn complete(&self, system: &str, user: &str) -> Result<String, LlmError> {
        self.calls.lock().unwrap().push((system.to_string(), user.to_string()));
        self.replies
            .lock()
            .unwrap()
            .pop_front()
            .unwrap_or(Err(LlmError::EmptyReply))
    }
}
