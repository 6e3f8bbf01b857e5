//! Assistant configuration (`config.yml`), with environment overrides for
//! endpoints and credentials.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::executor::ExecutorConfig;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub understanding: UnderstandingConfig,
    pub llm: LlmConfig,
    pub embeddings: EmbeddingsConfig,
    pub response: ResponseConfig,
    pub knowledge: KnowledgeConfig,
    pub executor: ExecutorConfig,
    pub store: StoreConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    #[default]
    Scripted,
    Llm,
}

impl std::str::FromStr for ProviderKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "scripted" => Ok(ProviderKind::Scripted),
            "llm" => Ok(ProviderKind::Llm),
            other => Err(format!("unknown provider `{other}` (expected scripted or llm)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbedderKind {
    #[default]
    Lexical,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UnderstandingConfig {
    pub provider: ProviderKind,
    /// Number of candidate flows put into the prompt.
    pub preselect_k: usize,
    pub embedder: EmbedderKind,
    /// Transcript lines included in the prompt.
    pub transcript_turns: usize,
}

impl Default for UnderstandingConfig {
    fn default() -> Self {
        Self {
            provider: ProviderKind::Scripted,
            preselect_k: 20,
            embedder: EmbedderKind::Lexical,
            transcript_turns: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmConfig {
    /// API root of an OpenAI-compatible service.
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub timeout_secs: u64,
}

impl Default for LlmConfig {
    fn default() -> Self {
        Self {
            base_url: "http://localhost:8000/v1".into(),
            model: "gpt-4o".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            timeout_secs: 30,
        }
    }
}

impl LlmConfig {
    pub fn api_key(&self) -> Option<String> {
        std::env::var(&self.api_key_env).ok().filter(|k| !k.is_empty())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingsConfig {
    /// Defaults to the LLM base URL.
    pub base_url: Option<String>,
    pub model: String,
}

impl Default for EmbeddingsConfig {
    fn default() -> Self {
        Self {
            base_url: None,
            model: "text-embedding-3-small".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantMode {
    #[default]
    First,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChitchatMode {
    #[default]
    Template,
    Llm,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResponseConfig {
    pub rephrase: bool,
    pub variants: VariantMode,
    pub chitchat: ChitchatMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KnowledgeModeKind {
    #[default]
    Snippet,
    Generate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KnowledgeConfig {
    /// Relative to the assistant directory.
    pub directory: String,
    pub mode: KnowledgeModeKind,
    pub top_k: usize,
}

impl Default for KnowledgeConfig {
    fn default() -> Self {
        Self {
            directory: "knowledge".into(),
            mode: KnowledgeModeKind::Snippet,
            top_k: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StoreKind {
    #[default]
    Memory,
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StoreConfig {
    pub kind: StoreKind,
    /// Directory for `<conversation-id>.jsonl` logs, relative to the
    /// assistant directory.
    pub directory: String,
}

impl Default for StoreConfig {
    fn default() -> Self {
        Self {
            kind: StoreKind::Memory,
            directory: "sessions".into(),
        }
    }
}

impl Config {
    pub fn from_yaml_str(text: &str) -> Result<Self, String> {
        if text.trim().is_empty() {
            return Ok(Self::default());
        }
        serde_yaml::from_str(text).map_err(|e| e.to_string())
    }

    /// Reads `path` if it exists; a missing file means defaults.
    pub fn load(path: &Path) -> Result<Self, String> {
        match std::fs::read_to_string(path) {
            Ok(text) => Self::from_yaml_str(&text).map_err(|e| format!("{}: {e}", path.display())),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Self::default()),
            Err(e) => Err(format!("{}: {e}", path.display())),
        }
    }

    /// `FLOWSTACK_PROVIDER`, `FLOWSTACK_LLM_URL` and `FLOWSTACK_LLM_MODEL`
    /// override the file.
    pub fn apply_env(&mut self) -> Result<(), String> {
        if let Ok(p) = std::env::var("FLOWSTACK_PROVIDER") {
            self.understanding.provider = p.parse()?;
        }
        if let Ok(url) = std::env::var("FLOWSTACK_LLM_URL") {
            self.llm.base_url = url;
        }
        if let Ok(model) = std::env::var("FLOWSTACK_LLM_MODEL") {
            self.llm.model = model;
        }
        Ok(())
    }
}
