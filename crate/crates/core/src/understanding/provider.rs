use std::collections::HashMap;
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;

use super::{render_prompt, UnderstandingContext};
use crate::command::{parse_commands, Command, CommandParseError};
use crate::llm::{ChatMessage, LlmError, TextGenerator};

#[derive(Debug, thiserror::Error)]
pub enum ProviderError {
    #[error("no scripted commands for message `{0}`")]
    NoScript(String),
    #[error(transparent)]
    Llm(#[from] LlmError),
}

/// Output of one understanding call. The raw text is always kept.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProviderResult {
    pub raw: String,
    pub commands: Vec<Command>,
    pub parse_errors: Vec<CommandParseError>,
    pub latency_ms: u64,
}

impl ProviderResult {
    pub fn from_raw(raw: String) -> Self {
        let (commands, parse_errors) = parse_commands(&raw);
        Self {
            raw,
            commands,
            parse_errors,
            latency_ms: 0,
        }
    }
}

pub trait CommandProvider: Send + Sync {
    /// Returns the raw command text for the context.
    fn raw_commands(&self, ctx: &UnderstandingContext) -> Result<String, ProviderError>;
}

/// Runs a provider, parses its output and measures latency.
pub fn generate_commands(
    provider: &dyn CommandProvider,
    ctx: &UnderstandingContext,
) -> Result<ProviderResult, ProviderError> {
    let started = Instant::now();
    let raw = provider.raw_commands(ctx)?;
    let mut result = ProviderResult::from_raw(raw);
    result.latency_ms = started.elapsed().as_millis() as u64;
    Ok(result)
}

/// Deterministic provider: looks the latest message up by exact text,
/// then by turn index.
#[derive(Debug, Clone, Default)]
pub struct ScriptedProvider {
    by_message: HashMap<String, String>,
    by_turn: Vec<Option<String>>,
    literal_prefix: Option<char>,
}

impl ScriptedProvider {
    pub fn new() -> Self {
        Self::default()
    }

    /// Messages starting with `prefix` are used as command text directly.
    pub fn with_literal_prefix(mut self, prefix: char) -> Self {
        self.literal_prefix = Some(prefix);
        self
    }

    pub fn with_message(mut self, message: impl Into<String>, commands: &[Command]) -> Self {
        self.insert_message(message, commands);
        self
    }

    pub fn insert_message(&mut self, message: impl Into<String>, commands: &[Command]) {
        self.by_message
            .insert(message.into(), crate::command::serialize_commands(commands));
    }

    pub fn insert_raw_message(&mut self, message: impl Into<String>, raw: impl Into<String>) {
        self.by_message.insert(message.into(), raw.into());
    }

    /// Commands for the user message with index `turn` (zero-based).
    pub fn set_turn(&mut self, turn: usize, commands: &[Command]) {
        self.set_turn_raw(turn, crate::command::serialize_commands(commands));
    }

    pub fn set_turn_raw(&mut self, turn: usize, raw: impl Into<String>) {
        if self.by_turn.len() <= turn {
            self.by_turn.resize(turn + 1, None);
        }
        self.by_turn[turn] = Some(raw.into());
    }
}

impl CommandProvider for ScriptedProvider {
    fn raw_commands(&self, ctx: &UnderstandingContext) -> Result<String, ProviderError> {
        if let Some(literal) = self
            .literal_prefix
            .and_then(|p| ctx.latest_message.strip_prefix(p))
        {
            return Ok(literal.replace(';', "\n"));
        }
        self.by_message
            .get(&ctx.latest_message)
            .or_else(|| self.by_turn.get(ctx.turn_index).and_then(Option::as_ref))
            .cloned()
            .ok_or_else(|| ProviderError::NoScript(ctx.latest_message.clone()))
    }
}

/// Prompts a chat-completion model and returns its reply verbatim.
pub struct LlmCommandProvider {
    generator: Arc<dyn TextGenerator>,
}

impl LlmCommandProvider {
    pub fn new(generator: Arc<dyn TextGenerator>) -> Self {
        Self { generator }
    }
}

impl CommandProvider for LlmCommandProvider {
    fn raw_commands(&self, ctx: &UnderstandingContext) -> Result<String, ProviderError> {
        let prompt = render_prompt(ctx);
        Ok(self.generator.complete(&[ChatMessage::user(prompt)])?)
    }
}
