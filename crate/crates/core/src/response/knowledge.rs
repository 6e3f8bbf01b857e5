use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::text::{normalize_whitespace, tokenize};

/// One knowledge document, loaded from a text or Markdown file. A first
/// line starting with `#` is the title; the rest is the body.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Document {
    pub name: String,
    pub title: Option<String>,
    pub body: String,
}

impl Document {
    pub fn parse(name: impl Into<String>, text: &str) -> Self {
        let text = text.trim_start();
        let (title, body) = match text.strip_prefix('#') {
            Some(rest) => {
                let (first, body) = rest.split_once('\n').unwrap_or((rest, ""));
                (Some(first.trim_start_matches('#').trim().to_string()), body)
            }
            None => (None, text),
        };
        Self {
            name: name.into(),
            title,
            body: body.to_string(),
        }
    }

    /// The body as one line of text.
    pub fn snippet(&self) -> String {
        normalize_whitespace(&self.body)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchHit {
    pub document: String,
    pub score: f64,
    pub snippet: String,
}

/// Keyword search over a small document collection, scored with TF-IDF.
#[derive(Debug, Clone, Default)]
pub struct KnowledgeBase {
    documents: Vec<Document>,
    terms: Vec<HashMap<String, usize>>,
    document_frequency: HashMap<String, usize>,
}

impl KnowledgeBase {
    pub fn new(mut documents: Vec<Document>) -> Self {
        documents.sort_by(|a, b| a.name.cmp(&b.name));
        let terms: Vec<HashMap<String, usize>> = documents
            .iter()
            .map(|d| {
                let mut counts = HashMap::new();
                let text = format!("{} {}", d.title.as_deref().unwrap_or(""), d.body);
                for t in tokenize(&text) {
                    *counts.entry(t).or_insert(0) += 1;
                }
                counts
            })
            .collect();
        let mut document_frequency = HashMap::new();
        for counts in &terms {
            for t in counts.keys() {
                *document_frequency.entry(t.clone()).or_insert(0) += 1;
            }
        }
        Self {
            documents,
            terms,
            document_frequency,
        }
    }

    /// Loads every `.md` and `.txt` file in `dir`. A missing directory is
    /// an empty knowledge base.
    pub fn load_dir(dir: &Path) -> std::io::Result<Self> {
        if !dir.exists() {
            return Ok(Self::default());
        }
        let mut documents = Vec::new();
        for entry in fs::read_dir(dir)? {
            let path = entry?.path();
            let is_doc = matches!(
                path.extension().and_then(|e| e.to_str()),
                Some("md" | "txt" | "markdown")
            );
            if path.is_file() && is_doc {
                let name = path
                    .file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_default();
                documents.push(Document::parse(name, &fs::read_to_string(&path)?));
            }
        }
        Ok(Self::new(documents))
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    /// Documents with a positive score, best first; ties go to the
    /// lexicographically smaller file name.
    pub fn search(&self, query: &str, k: usize) -> Vec<SearchHit> {
        let n = self.documents.len() as f64;
        let mut query_terms: BTreeMap<String, ()> = BTreeMap::new();
        for t in tokenize(query) {
            query_terms.insert(t, ());
        }
        let mut hits: Vec<SearchHit> = self
            .documents
            .iter()
            .zip(&self.terms)
            .map(|(doc, counts)| {
                let score = query_terms
                    .keys()
                    .filter_map(|t| {
                        let tf = *counts.get(t)? as f64;
                        let df = self.document_frequency[t] as f64;
                        Some(tf * (1.0 + n / df).ln())
                    })
                    .sum::<f64>();
                SearchHit {
                    document: doc.name.clone(),
                    score,
                    snippet: doc.snippet(),
                }
            })
            .filter(|h| h.score > 0.0)
            .collect();
        hits.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.document.cmp(&b.document)));
        hits.truncate(k);
        hits
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kb() -> KnowledgeBase {
        KnowledgeBase::new(vec![
            Document::parse("fees.md", "# Transfer fees\n\nWe will not charge you\n for this transfer"),
            Document::parse("hours.md", "# Opening hours\n\nBranches open at nine."),
            Document::parse("cards.md", "Cards can be frozen in the app."),
        ])
    }

    #[test]
    fn title_and_snippet() {
        let d = Document::parse("a.md", "# Transfer fees\n\nWe will not charge you\n for this transfer");
        assert_eq!(d.title.as_deref(), Some("Transfer fees"));
        assert_eq!(d.snippet(), "We will not charge you for this transfer");
        let plain = Document::parse("b.txt", "just text");
        assert_eq!(plain.title, None);
    }

    #[test]
    fn unique_term_finds_its_document() {
        let hits = kb().search("are there any fees?", 3);
        assert_eq!(hits[0].document, "fees.md");
        let hits = kb().search("frozen", 3);
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].document, "cards.md");
    }

    #[test]
    fn no_match_and_empty_base() {
        assert!(kb().search("zebra", 3).is_empty());
        assert!(KnowledgeBase::default().search("fees", 3).is_empty());
    }
}
