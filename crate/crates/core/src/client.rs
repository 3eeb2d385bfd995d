//! Chat-completion clients.
//!
//! Wire format (OpenAI-compatible): `POST <base>/chat/completions` with
//!
//! ```json
//! {"model": "...", "messages": [{"role": "user", "content": "..."}],
//!  "temperature": 1.0, "max_tokens": 2000, "logprobs": true}
//! ```
//!
//! and a response whose `choices[0].message.content` is the output text and
//! `choices[0].logprobs.content[*].{token, logprob}` the per-token natural-log
//! probabilities. A missing or null `logprobs` means the endpoint did not
//! supply them.

use std::collections::VecDeque;
use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::generation::TokenLogProb;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClientError {
    #[error("endpoint returned HTTP {status}{}: {body}", retry_after.as_ref().map(|r| format!(" (retry after {r})")).unwrap_or_default())]
    Endpoint { status: u16, retry_after: Option<String>, body: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("protocol error: {0}")]
    Protocol(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        Self { role: "user".into(), content: content.into() }
    }

    pub fn system(content: impl Into<String>) -> Self {
        Self { role: "system".into(), content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_tokens: u64,
    pub logprobs: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ChatResponse {
    pub text: String,
    /// `None` when the endpoint did not return log-probabilities.
    pub logprobs: Option<Vec<TokenLogProb>>,
}

impl ChatResponse {
    pub fn text(text: impl Into<String>) -> Self {
        Self { text: text.into(), logprobs: None }
    }
}

pub trait ChatClient: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, ClientError>;
}

/// Blocking HTTP client for OpenAI-compatible endpoints.
pub struct HttpChatClient {
    base_url: String,
    api_key: Option<String>,
    http: reqwest::blocking::Client,
}

impl HttpChatClient {
    pub fn new(base_url: impl Into<String>, api_key: Option<String>) -> Result<Self, ClientError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(300))
            .build()
            .map_err(|e| ClientError::Transport(e.to_string()))?;
        Ok(Self { base_url: base_url.into().trim_end_matches('/').to_string(), api_key, http })
    }
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
    #[serde(default)]
    logprobs: Option<WireLogprobs>,
}

#[derive(Deserialize)]
struct WireMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct WireLogprobs {
    #[serde(default)]
    content: Option<Vec<WireToken>>,
}

#[derive(Deserialize)]
struct WireToken {
    token: String,
    logprob: f64,
}

/// Decodes a chat-completion response body.
pub fn parse_chat_response(body: &str) -> Result<ChatResponse, ClientError> {
    let wire: WireResponse =
        serde_json::from_str(body).map_err(|e| ClientError::Protocol(format!("bad response body: {e}")))?;
    let choice =
        wire.choices.into_iter().next().ok_or_else(|| ClientError::Protocol("response has no choices".into()))?;
    let text = choice.message.content.ok_or_else(|| ClientError::Protocol("choice has no message content".into()))?;
    let logprobs = choice
        .logprobs
        .and_then(|l| l.content)
        .map(|tokens| tokens.into_iter().map(|t| TokenLogProb { token: t.token, logprob: t.logprob }).collect());
    Ok(ChatResponse { text, logprobs })
}

impl ChatClient for HttpChatClient {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, ClientError> {
        let url = format!("{}/chat/completions", self.base_url);
        let body = serde_json::to_vec(request).map_err(|e| ClientError::Protocol(e.to_string()))?;
        let mut req = self.http.post(url).header(reqwest::header::CONTENT_TYPE, "application/json").body(body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| ClientError::Transport(e.to_string()))?;
        let status = resp.status();
        let retry_after =
            resp.headers().get(reqwest::header::RETRY_AFTER).and_then(|v| v.to_str().ok()).map(str::to_string);
        let text = resp.text().map_err(|e| ClientError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(ClientError::Endpoint { status: status.as_u16(), retry_after, body: text });
        }
        parse_chat_response(&text)
    }
}

/// One recorded exchange in a mock replay file (JSONL, one rule per line).
///
/// `model` and `match` are optional filters: the rule applies when the model
/// name is equal and the last user message contains `match`. The first
/// applicable rule answers. A rule with `status` answers with that HTTP error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockRule {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default, rename = "match", skip_serializing_if = "Option::is_none")]
    pub matches: Option<String>,
    #[serde(default)]
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logprobs: Option<Vec<TokenLogProb>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<u16>,
}

enum MockMode {
    Scripted(Mutex<VecDeque<Result<ChatResponse, ClientError>>>),
    Rules(Vec<MockRule>),
}

/// Deterministic stand-in for a chat endpoint: either a scripted queue of
/// replies consumed in call order, or a rule table replayed from a file.
pub struct MockChatClient {
    mode: MockMode,
    requests: Mutex<Vec<ChatRequest>>,
}

impl MockChatClient {
    pub fn scripted(replies: Vec<ChatResponse>) -> Self {
        Self::scripted_results(replies.into_iter().map(Ok).collect())
    }

    pub fn scripted_results(replies: Vec<Result<ChatResponse, ClientError>>) -> Self {
        Self { mode: MockMode::Scripted(Mutex::new(replies.into())), requests: Mutex::new(Vec::new()) }
    }

    pub fn from_rules(rules: Vec<MockRule>) -> Self {
        Self { mode: MockMode::Rules(rules), requests: Mutex::new(Vec::new()) }
    }

    pub fn from_file(path: &Path) -> Result<Self, ClientError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| ClientError::Transport(format!("{}: {e}", path.display())))?;
        let rules = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|e| ClientError::Protocol(format!("{}:{}: {e}", path.display(), i + 1)))
            })
            .collect::<Result<_, _>>()?;
        Ok(Self::from_rules(rules))
    }

    /// Requests received so far, in call order.
    pub fn requests(&self) -> Vec<ChatRequest> {
        self.requests.lock().unwrap().clone()
    }
}

impl ChatClient for MockChatClient {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, ClientError> {
        self.requests.lock().unwrap().push(request.clone());
        match &self.mode {
            MockMode::Scripted(queue) => queue
                .lock()
                .unwrap()
                .pop_front()
                .unwrap_or_else(|| Err(ClientError::Protocol("mock script exhausted".into()))),
            MockMode::Rules(rules) => {
                let last_user =
                    request.messages.iter().rev().find(|m| m.role == "user").map(|m| m.content.as_str()).unwrap_or("");
                let rule = rules
                    .iter()
                    .find(|r| {
                        r.model.as_ref().is_none_or(|m| *m == request.model)
                            && r.matches.as_ref().is_none_or(|s| last_user.contains(s.as_str()))
                    })
                    .ok_or_else(|| ClientError::Protocol("no recorded response matches the request".into()))?;
                match rule.status {
                    Some(status) if !(200..300).contains(&status) => {
                        Err(ClientError::Endpoint { status, retry_after: None, body: rule.text.clone() })
                    }
                    _ => Ok(ChatResponse { text: rule.text.clone(), logprobs: rule.logprobs.clone() }),
                }
            }
        }
    }
}
