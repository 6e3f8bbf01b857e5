//! Turning templates into bot messages: rendering, optional rephrasing and
//! knowledge answers.

mod knowledge;
mod rephrase;
mod template;

use std::sync::{Arc, Mutex};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub use knowledge::{Document, KnowledgeBase, SearchHit};
pub use rephrase::{LlmRephraser, Rephraser, TableRephraser, REPHRASE_INSTRUCTIONS};
pub use template::{render_text, RenderError};

use crate::flow::ResponseTemplate;
use crate::llm::{ChatMessage, TextGenerator};

/// Template id used when the knowledge base has nothing relevant.
pub const NO_KNOWLEDGE_ANSWER: &str = "utter_no_knowledge_answer";
/// Template id for the default small-talk deflection.
pub const CHITCHAT_RESPONSE: &str = "utter_free_chitchat_response";

/// How a template variant is chosen.
#[derive(Default)]
pub enum VariantSelection {
    /// Always the first variant; keeps runs reproducible.
    #[default]
    First,
    Random(Box<Mutex<StdRng>>),
}

impl VariantSelection {
    pub fn random() -> Self {
        VariantSelection::Random(Box::new(Mutex::new(StdRng::from_entropy())))
    }

    pub fn seeded(seed: u64) -> Self {
        VariantSelection::Random(Box::new(Mutex::new(StdRng::seed_from_u64(seed))))
    }

    fn pick(&self, count: usize) -> usize {
        match self {
            VariantSelection::First => 0,
            VariantSelection::Random(rng) => {
                let mut rng = rng.lock().unwrap_or_else(|e| e.into_inner());
                rng.gen_range(0..count.max(1))
            }
        }
    }
}

#[derive(Default)]
pub enum KnowledgeMode {
    /// Answer with the best matching document's text.
    #[default]
    Snippet,
    /// Pass the best documents and the question to a generator.
    Generate(Arc<dyn TextGenerator>),
}

/// Result of answering from the knowledge base.
#[derive(Debug, Clone, PartialEq)]
pub enum KnowledgeAnswer {
    Text(String),
    /// Nothing relevant; respond with [`NO_KNOWLEDGE_ANSWER`].
    NoAnswer,
}

pub const KNOWLEDGE_INSTRUCTIONS: &str = "Answer the user's question using only the documents \
provided. If they do not contain the answer, say that you do not know. Be brief.";

pub const CHITCHAT_INSTRUCTIONS: &str = "You are a friendly banking assistant making brief small \
talk. Reply in one or two sentences and do not promise to perform any task.";

/// Everything involved in producing bot text. Shared between
/// conversations.
#[derive(Default)]
pub struct Responder {
    pub variants: VariantSelection,
    pub rephraser: Option<Arc<dyn Rephraser>>,
    pub knowledge: KnowledgeBase,
    pub knowledge_mode: KnowledgeMode,
    pub knowledge_top_k: usize,
    /// When set, small talk is answered by this generator instead of the
    /// canned deflection template.
    pub chitchat: Option<Arc<dyn TextGenerator>>,
}

impl Responder {
    pub fn new() -> Self {
        Self {
            knowledge_top_k: 3,
            ..Default::default()
        }
    }

    pub fn choose_variant<'a>(&self, template: &'a ResponseTemplate) -> &'a str {
        let i = self.variants.pick(template.variants.len());
        template.variants.get(i).map_or("", String::as_str)
    }

    /// Answers `query` from the knowledge base. Generator failures fall
    /// back to the best snippet and are returned as the error side of the
    /// second tuple element.
    pub fn knowledge_answer(&self, query: &str) -> (KnowledgeAnswer, Option<String>) {
        let hits = self.knowledge.search(query, self.knowledge_top_k.max(1));
        let Some(best) = hits.first() else {
            return (KnowledgeAnswer::NoAnswer, None);
        };
        match &self.knowledge_mode {
            KnowledgeMode::Snippet => (KnowledgeAnswer::Text(best.snippet.clone()), None),
            KnowledgeMode::Generate(generator) => {
                let documents = hits
                    .iter()
                    .enumerate()
                    .map(|(i, h)| format!("[{}] {}", i + 1, h.snippet))
                    .collect::<Vec<_>>()
                    .join("\n");
                let prompt = format!("Documents:\n{documents}\n\nQuestion: {query}");
                let messages = [ChatMessage::system(KNOWLEDGE_INSTRUCTIONS), ChatMessage::user(prompt)];
                match generator.complete(&messages) {
                    Ok(text) if !text.trim().is_empty() => {
                        (KnowledgeAnswer::Text(text.trim().to_string()), None)
                    }
                    Ok(_) => (
                        KnowledgeAnswer::Text(best.snippet.clone()),
                        Some("knowledge generator returned an empty answer".into()),
                    ),
                    Err(e) => (
                        KnowledgeAnswer::Text(best.snippet.clone()),
                        Some(format!("knowledge generator failed: {e}")),
                    ),
                }
            }
        }
    }
}
