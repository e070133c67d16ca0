//! Messages-style chat clients.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::text::PhraseMatcher;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub max_tokens: u32,
    pub temperature: f64,
}

impl ChatRequest {
    pub fn prompt_bytes(&self) -> usize {
        self.messages.iter().map(|m| m.content.len()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatReply {
    pub text: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ClientError {
    /// Worth retrying: network trouble, 408, 429, 5xx, 529.
    #[error("transient: {0}")]
    Transient(String),
    #[error("terminal: {0}")]
    Terminal(String),
}

pub trait ChatClient: Send + Sync {
    fn send(&self, request: &ChatRequest) -> Result<ChatReply, ClientError>;
}

/// HTTPS client for a messages endpoint (`POST {endpoint}` with
/// `x-api-key` and `anthropic-version` headers).
pub struct MessagesClient {
    http: reqwest::blocking::Client,
    endpoint: String,
    api_key: String,
    api_version: String,
}

impl MessagesClient {
    pub const DEFAULT_API_VERSION: &'static str = "2023-06-01";

    pub fn new(endpoint: &str, api_key: &str, timeout: Duration) -> Result<Self, ClientError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| ClientError::Terminal(e.to_string()))?;
        Ok(Self {
            http,
            endpoint: endpoint.to_string(),
            api_key: api_key.to_string(),
            api_version: Self::DEFAULT_API_VERSION.to_string(),
        })
    }

    pub fn request_body(request: &ChatRequest) -> Value {
        json!({
            "model": request.model,
            "max_tokens": request.max_tokens,
            "temperature": request.temperature,
            "messages": request.messages,
        })
    }
}

#[derive(Deserialize)]
struct MessagesResponse {
    content: Vec<ContentBlock>,
    usage: Usage,
}

#[derive(Deserialize)]
struct ContentBlock {
    #[serde(rename = "type")]
    kind: String,
    #[serde(default)]
    text: String,
}

#[derive(Deserialize)]
struct Usage {
    input_tokens: u64,
    output_tokens: u64,
}

impl ChatClient for MessagesClient {
    fn send(&self, request: &ChatRequest) -> Result<ChatReply, ClientError> {
        let resp = self
            .http
            .post(&self.endpoint)
            .header("x-api-key", &self.api_key)
            .header("anthropic-version", &self.api_version)
            .json(&Self::request_body(request))
            .send()
            .map_err(|e| ClientError::Transient(e.to_string()))?;
        let status = resp.status().as_u16();
        let body = resp.text().map_err(|e| ClientError::Transient(e.to_string()))?;
        if status != 200 {
            let snippet: String = body.chars().take(200).collect();
            let msg = format!("HTTP {status}: {snippet}");
            return Err(if matches!(status, 408 | 429 | 500..=599) {
                ClientError::Transient(msg)
            } else {
                ClientError::Terminal(msg)
            });
        }
        let parsed: MessagesResponse =
            serde_json::from_str(&body).map_err(|e| ClientError::Terminal(format!("unexpected response body: {e}")))?;
        let text = parsed
            .content
            .iter()
            .filter(|b| b.kind == "text")
            .map(|b| b.text.as_str())
            .collect::<Vec<_>>()
            .join("");
        Ok(ChatReply {
            text,
            input_tokens: parsed.usage.input_tokens,
            output_tokens: parsed.usage.output_tokens,
        })
    }
}

const SPEAKER_VERBS: &[&str] = &[
    "said", "says", "criticised", "criticized", "slammed", "warned", "accused", "attacked",
    "condemned", "argued", "claimed", "called",
];
const MOCK_NEGATIVE: &[&str] = &[
    "reckless", "chaotic", "disastrous", "shameful", "toxic", "divisive", "extreme",
    "incompetent", "dangerous", "shambles", "failed", "scandal", "appalling", "devastating",
];
const MOCK_POSITIVE: &[&str] = &["praised", "welcomed", "brilliant", "landmark", "visionary", "triumph", "heroic"];

/// Offline stand-in for the remote model, used by dry runs.
///
/// Reads the target party and passage back out of the v1 template. The party
/// is the speaker (off target) when any word of its name is directly followed
/// by a speech verb. Sentiment is `0.5 * (positive - negative)` term hits,
/// clamped to [-1, 1]. Usage is reported as one token per four bytes.
pub struct RuleBasedMock {
    negative: Vec<PhraseMatcher>,
    positive: Vec<PhraseMatcher>,
}

impl Default for RuleBasedMock {
    fn default() -> Self {
        Self {
            negative: MOCK_NEGATIVE.iter().map(|t| PhraseMatcher::new(t, false)).collect(),
            positive: MOCK_POSITIVE.iter().map(|t| PhraseMatcher::new(t, false)).collect(),
        }
    }
}

fn between<'a>(text: &'a str, open: &str, close: &str) -> Option<&'a str> {
    let start = text.rfind(open)? + open.len();
    let end = start + text[start..].find(close)?;
    Some(&text[start..end])
}

impl RuleBasedMock {
    /// `(on_target, sentiment, reasoning)` for one passage.
    pub fn judge(&self, party: &str, passage: &str) -> (u8, f64, String) {
        let speaker = party.split_whitespace().any(|w| {
            SPEAKER_VERBS
                .iter()
                .any(|v| PhraseMatcher::new(&format!("{w} {v}"), true).is_match(passage))
        });
        let neg: usize = self.negative.iter().map(|m| m.count(passage)).sum();
        let pos: usize = self.positive.iter().map(|m| m.count(passage)).sum();
        let net = (pos as i64 - neg as i64).clamp(-2, 2);
        let sentiment = net as f64 * 0.5;
        let role = if speaker { "the speaker" } else { "the subject" };
        let reasoning = format!("{party} is {role}; the passage has {neg} negative and {pos} positive loaded terms.");
        (u8::from(!speaker), sentiment, reasoning)
    }
}

impl ChatClient for RuleBasedMock {
    fn send(&self, request: &ChatRequest) -> Result<ChatReply, ClientError> {
        let prompt = request
            .messages
            .iter()
            .find(|m| m.role == Role::User)
            .map(|m| m.content.as_str())
            .unwrap_or("");
        let party = between(prompt, "<target>", "</target>")
            .ok_or_else(|| ClientError::Terminal("prompt has no <target> block".into()))?;
        let passage = between(prompt, "<passage>", "</passage>")
            .ok_or_else(|| ClientError::Terminal("prompt has no <passage> block".into()))?
            .trim();
        let (on_target, sentiment, reasoning) = self.judge(party, passage);
        let text = json!({
            "reasoning": reasoning,
            "on_target": on_target,
            "sentiment": sentiment,
        })
        .to_string();
        Ok(ChatReply {
            input_tokens: request.prompt_bytes().div_ceil(4) as u64,
            output_tokens: text.len().div_ceil(4) as u64,
            text,
        })
    }
}
