//! Minimal client for OpenAI-compatible chat-completion and embedding
//! endpoints. Only the fields the engine needs are sent or read.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

#[derive(Debug, thiserror::Error)]
pub enum LlmError {
    #[error("request failed: {0}")]
    Transport(String),
    #[error("endpoint returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed response: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: "system".into(),
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: "user".into(),
            content: content.into(),
        }
    }
}

/// Anything that turns a chat into text. Implemented by [`LlmClient`];
/// tests substitute canned generators.
pub trait TextGenerator: Send + Sync {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, LlmError>;
}

#[derive(Debug, Clone)]
pub struct LlmClient {
    base_url: String,
    api_key: Option<String>,
    model: String,
    temperature: f64,
    agent: ureq::Agent,
}

impl LlmClient {
    /// `base_url` is the API root, e.g. `http://localhost:8000/v1`; the
    /// client appends `/chat/completions` and `/embeddings`.
    pub fn new(base_url: &str, model: &str, api_key: Option<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .new_agent();
        Self {
            base_url: base_url.trim_end_matches('/').to_string(),
            api_key,
            model: model.to_string(),
            temperature: 0.0,
            agent,
        }
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }

    pub fn model(&self) -> &str {
        &self.model
    }

    fn post(&self, path: &str, body: serde_json::Value) -> Result<serde_json::Value, LlmError> {
        let mut request = self.agent.post(format!("{}{path}", self.base_url));
        if let Some(key) = &self.api_key {
            request = request.header("Authorization", format!("Bearer {key}"));
        }
        let mut response = request
            .send_json(&body)
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        let status = response.status().as_u16();
        if !(200..300).contains(&status) {
            let body = response.body_mut().read_to_string().unwrap_or_default();
            return Err(LlmError::Status { status, body });
        }
        response
            .body_mut()
            .read_json()
            .map_err(|e| LlmError::Malformed(e.to_string()))
    }

    /// Embeds each input with the configured model, in input order.
    pub fn embed(&self, inputs: &[String]) -> Result<Vec<Vec<f64>>, LlmError> {
        let reply = self.post("/embeddings", json!({ "model": self.model, "input": inputs }))?;
        let parsed: EmbeddingReply =
            serde_json::from_value(reply).map_err(|e| LlmError::Malformed(e.to_string()))?;
        let mut data = parsed.data;
        data.sort_by_key(|d| d.index);
        if data.len() != inputs.len() {
            return Err(LlmError::Malformed(format!(
                "expected {} embeddings, got {}",
                inputs.len(),
                data.len()
            )));
        }
        Ok(data.into_iter().map(|d| d.embedding).collect())
    }
}

impl TextGenerator for LlmClient {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, LlmError> {
        let reply = self.post(
            "/chat/completions",
            json!({ "model": self.model, "messages": messages, "temperature": self.temperature }),
        )?;
        let parsed: ChatReply =
            serde_json::from_value(reply).map_err(|e| LlmError::Malformed(e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| LlmError::Malformed("no choices in response".into()))
    }
}

#[derive(Deserialize)]
struct ChatReply {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct EmbeddingReply {
    data: Vec<EmbeddingItem>,
}

#[derive(Deserialize)]
struct EmbeddingItem {
    #[serde(default)]
    index: usize,
    embedding: Vec<f64>,
}
