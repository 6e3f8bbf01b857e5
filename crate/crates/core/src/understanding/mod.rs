//! Dialogue understanding: turning the latest user message (in context)
//! into commands.

mod context;
mod embed;
mod prompt;
mod provider;

pub use context::{ActiveFlow, FlowSummary, SlotSummary, UnderstandingContext};
pub use embed::{cosine, Embedder, LexicalEmbedder, RemoteEmbedder};
pub use prompt::render_prompt;
pub use provider::{
    generate_commands, CommandProvider, LlmCommandProvider, ProviderError, ProviderResult,
    ScriptedProvider,
};

use crate::flow::FlowBook;

/// Ranks flows by similarity between the message and each flow's
/// description. Description embeddings are computed once.
pub struct Preselector {
    flow_ids: Vec<String>,
    embedder: Box<dyn Embedder>,
    descriptions: Option<Vec<Vec<f64>>>,
}

impl Preselector {
    pub fn new(book: &FlowBook, embedder: Box<dyn Embedder>) -> Self {
        let flow_ids: Vec<String> = book.flows.keys().cloned().collect();
        let texts: Vec<String> = book.flows.values().map(|f| f.description.clone()).collect();
        let descriptions = embedder.embed(&texts).ok().filter(|v| v.len() == texts.len());
        Self {
            flow_ids,
            embedder,
            descriptions,
        }
    }

    /// Lexical embedder fitted on the book's flow descriptions.
    pub fn lexical(book: &FlowBook) -> Self {
        let texts: Vec<String> = book.flows.values().map(|f| f.description.clone()).collect();
        Self::new(book, Box::new(LexicalEmbedder::fit(&texts)))
    }

    pub fn flow_count(&self) -> usize {
        self.flow_ids.len()
    }

    /// Every flow, best match first; ties are ordered by flow id. If
    /// embedding fails, all flows are returned in id order.
    pub fn rank(&self, message: &str) -> Vec<(String, f64)> {
        let query = self
            .descriptions
            .as_ref()
            .and_then(|d| Some((d, self.embedder.embed(&[message.to_string()]).ok()?.pop()?)));
        let Some((descriptions, query)) = query else {
            return self.flow_ids.iter().map(|id| (id.clone(), 0.0)).collect();
        };
        let mut ranked: Vec<(String, f64)> = self
            .flow_ids
            .iter()
            .zip(descriptions)
            .map(|(id, d)| (id.clone(), cosine(&query, d)))
            .collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked
    }

    /// The `k` best flows (all flows when `k` is at least the catalog size).
    pub fn preselect(&self, message: &str, k: usize) -> Vec<String> {
        let mut ids: Vec<String> = self.rank(message).into_iter().map(|(id, _)| id).collect();
        ids.truncate(k.max(1));
        ids
    }
}

/// One-shot form of [`Preselector::preselect`].
pub fn preselect_flows(message: &str, book: &FlowBook, embedder: Box<dyn Embedder>, k: usize) -> Vec<String> {
    Preselector::new(book, embedder).preselect(message, k)
}

/// Fraction of `(query, expected flow)` pairs whose flow is in the top
/// `k`. An empty query set scores 1.0.
pub fn hit_at_k(queries: &[(String, String)], k: usize, preselector: &Preselector) -> f64 {
    if queries.is_empty() {
        return 1.0;
    }
    let hits = queries
        .iter()
        .filter(|(q, expected)| preselector.preselect(q, k).contains(expected))
        .count();
    hits as f64 / queries.len() as f64
}
