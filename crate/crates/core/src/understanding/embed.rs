use std::collections::HashMap;

use crate::llm::LlmClient;
use crate::text::tokenize;

pub trait Embedder: Send + Sync {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, String>;
}

/// Cosine similarity; zero vectors are similar to nothing.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Deterministic TF-IDF term vectors over a vocabulary fitted on a corpus.
/// Terms outside the vocabulary are ignored.
#[derive(Debug, Clone, Default)]
pub struct LexicalEmbedder {
    vocabulary: HashMap<String, usize>,
    idf: Vec<f64>,
}

impl LexicalEmbedder {
    pub fn fit(corpus: &[String]) -> Self {
        let mut vocabulary: HashMap<String, usize> = HashMap::new();
        let mut df: Vec<usize> = Vec::new();
        for doc in corpus {
            let mut terms = tokenize(doc);
            terms.sort_unstable();
            terms.dedup();
            for t in terms {
                let next = vocabulary.len();
                let i = *vocabulary.entry(t).or_insert(next);
                if i == df.len() {
                    df.push(0);
                }
                df[i] += 1;
            }
        }
        let n = corpus.len() as f64;
        let idf = df
            .iter()
            .map(|&d| ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0)
            .collect();
        Self { vocabulary, idf }
    }

    pub fn dimension(&self) -> usize {
        self.idf.len()
    }

    pub fn vector(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.idf.len()];
        for t in tokenize(text) {
            if let Some(&i) = self.vocabulary.get(&t) {
                v[i] += self.idf[i];
            }
        }
        v
    }
}

impl Embedder for LexicalEmbedder {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, String> {
        Ok(texts.iter().map(|t| self.vector(t)).collect())
    }
}

/// Embeddings from an OpenAI-compatible `/embeddings` endpoint.
pub struct RemoteEmbedder {
    client: LlmClient,
}

impl RemoteEmbedder {
    pub fn new(client: LlmClient) -> Self {
        Self { client }
    }
}

impl Embedder for RemoteEmbedder {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, String> {
        self.client.embed(texts).map_err(|e| e.to_string())
    }
}
