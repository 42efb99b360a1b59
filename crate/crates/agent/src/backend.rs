use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: String,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: "system".into(), content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: "user".into(), content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: "assistant".into(), content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatParams {
    pub model: String,
    pub temperature: f64,
    pub max_tokens: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub content: String,
    #[serde(default)]
    pub prompt_tokens: Option<u64>,
    #[serde(default)]
    pub completion_tokens: Option<u64>,
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("chat backend unreachable: {0}")]
    Transport(String),
    #[error("chat backend returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed chat backend response: {0}")]
    Malformed(String),
    #[error("scripted backend has no response for turn {turn}")]
    ScriptExhausted { turn: usize },
    #[error("backend configuration: {0}")]
    Config(String),
}

/// A chat-completion capability. Implementations must be safe to share
/// between sessions.
pub trait ChatBackend: Send + Sync {
    fn send(&self, messages: &[Message], params: &ChatParams) -> Result<ChatResponse, BackendError>;
}

/// Replays canned responses in call order.
#[derive(Debug)]
pub struct ScriptedBackend {
    turns: Vec<ChatResponse>,
    next: AtomicUsize,
}

impl ScriptedBackend {
    pub fn new(turns: Vec<ChatResponse>) -> Self {
        Self { turns, next: AtomicUsize::new(0) }
    }

    /// Responses without usage counts.
    pub fn from_texts<S: Into<String>>(texts: impl IntoIterator<Item = S>) -> Self {
        Self::new(
            texts
                .into_iter()
                .map(|t| ChatResponse { content: t.into(), prompt_tokens: None, completion_tokens: None })
                .collect(),
        )
    }

    /// Reads a JSON array of `{content, prompt_tokens?, completion_tokens?}`.
    pub fn from_json(text: &str) -> Result<Self, BackendError> {
        let turns: Vec<ChatResponse> =
            serde_json::from_str(text).map_err(|e| BackendError::Config(format!("invalid script: {e}")))?;
        Ok(Self::new(turns))
    }

    /// Number of responses handed out so far.
    pub fn calls(&self) -> usize {
        self.next.load(Ordering::SeqCst)
    }
}

impl ChatBackend for ScriptedBackend {
    fn send(&self, _messages: &[Message], _params: &ChatParams) -> Result<ChatResponse, BackendError> {
        let turn = self.next.fetch_add(1, Ordering::SeqCst);
        self.turns.get(turn).cloned().ok_or(BackendError::ScriptExhausted { turn })
    }
}

/// Client for the de-facto `/chat/completions` wire format.
#[derive(Debug, Clone)]
pub struct HttpBackend {
    base_url: String,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

pub const ENV_BASE_URL: &str = "CODEGRAPH_LLM_BASE_URL";
pub const ENV_API_KEY: &str = "CODEGRAPH_LLM_API_KEY";
pub const ENV_MODEL: &str = "CODEGRAPH_LLM_MODEL";
pub const ENV_TEMPERATURE: &str = "CODEGRAPH_LLM_TEMPERATURE";

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
    usage: Option<WireUsage>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
}

#[derive(Deserialize)]
struct WireMessage {
    content: Option<String>,
}

#[derive(Deserialize)]
struct WireUsage {
    prompt_tokens: Option<u64>,
    completion_tokens: Option<u64>,
}

impl HttpBackend {
    pub fn new(base_url: impl Into<String>, api_key: Option<String>) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(300))
            .build()
            .map_err(|e| BackendError::Config(e.to_string()))?;
        Ok(Self { base_url: base_url.into().trim_end_matches('/').to_string(), api_key, client })
    }

    /// Backend and parameters from `CODEGRAPH_LLM_*` environment variables.
    pub fn from_env() -> Result<(Self, ChatParams), BackendError> {
        let base = std::env::var(ENV_BASE_URL).map_err(|_| BackendError::Config(format!("{ENV_BASE_URL} is not set")))?;
        let model = std::env::var(ENV_MODEL).unwrap_or_else(|_| "gpt-4o".to_string());
        let temperature = match std::env::var(ENV_TEMPERATURE) {
            Ok(t) => t.parse().map_err(|_| BackendError::Config(format!("{ENV_TEMPERATURE} must be a number")))?,
            Err(_) => 0.0,
        };
        let backend = Self::new(base, std::env::var(ENV_API_KEY).ok())?;
        Ok((backend, ChatParams { model, temperature, max_tokens: None }))
    }
}

impl ChatBackend for HttpBackend {
    fn send(&self, messages: &[Message], params: &ChatParams) -> Result<ChatResponse, BackendError> {
        let mut body = serde_json::json!({
            "model": params.model,
            "messages": messages,
            "temperature": params.temperature,
        });
        if let Some(max) = params.max_tokens {
            body["max_tokens"] = max.into();
        }
        let mut request = self.client.post(format!("{}/chat/completions", self.base_url)).json(&body);
        if let Some(key) = &self.api_key {
            request = request.bearer_auth(key);
        }
        let response = request.send().map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = response.status();
        let text = response.text().map_err(|e| BackendError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(BackendError::Status { status: status.as_u16(), body: text });
        }
        let wire: WireResponse = serde_json::from_str(&text).map_err(|e| BackendError::Malformed(e.to_string()))?;
        let content = wire
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| BackendError::Malformed("no choices[0].message.content".into()))?;
        Ok(ChatResponse {
            content,
            prompt_tokens: wire.usage.as_ref().and_then(|u| u.prompt_tokens),
            completion_tokens: wire.usage.as_ref().and_then(|u| u.completion_tokens),
        })
    }
}
