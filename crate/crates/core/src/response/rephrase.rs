use std::collections::HashMap;
use std::sync::Arc;

use crate::llm::{ChatMessage, TextGenerator};

/// Rewrites a templated response to fit the conversation. Must only change
/// wording; the engine records both texts.
pub trait Rephraser: Send + Sync {
    fn rephrase(&self, text: &str, transcript: &str) -> Result<String, String>;
}

/// Asks a language model for a context-aware rewording.
pub struct LlmRephraser {
    generator: Arc<dyn TextGenerator>,
}

impl LlmRephraser {
    pub fn new(generator: Arc<dyn TextGenerator>) -> Self {
        Self { generator }
    }
}

pub const REPHRASE_INSTRUCTIONS: &str = "You rewrite an assistant's reply so it fits the \
conversation naturally. Keep the meaning, every fact and every number exactly. Reply with the \
rewritten message only.";

impl Rephraser for LlmRephraser {
    fn rephrase(&self, text: &str, transcript: &str) -> Result<String, String> {
        let prompt = format!("Conversation so far:\n{transcript}\n\nReply to rewrite:\n{text}");
        let out = self
            .generator
            .complete(&[ChatMessage::system(REPHRASE_INSTRUCTIONS), ChatMessage::user(prompt)])
            .map_err(|e| e.to_string())?;
        let out = out.trim();
        if out.is_empty() {
            Err("rephraser returned an empty message".into())
        } else {
            Ok(out.to_string())
        }
    }
}

/// Fixed text-to-text table; unknown texts pass through. Useful for tests
/// and for curated rewordings.
#[derive(Debug, Clone, Default)]
pub struct TableRephraser {
    table: HashMap<String, String>,
}

impl TableRephraser {
    pub fn new(table: HashMap<String, String>) -> Self {
        Self { table }
    }
}

impl Rephraser for TableRephraser {
    fn rephrase(&self, text: &str, _transcript: &str) -> Result<String, String> {
        Ok(self.table.get(text).cloned().unwrap_or_else(|| text.to_string()))
    }
}
