//! Loading an assistant directory:
//!
//! ```text
//! domain/*.yml     flows, slots, responses, pattern overrides
//! tests/*.yml      test conversations
//! actions.yml      stub action rules (optional)
//! scripted.yml     message -> commands table for scripted mode (optional)
//! knowledge/       knowledge base documents (optional)
//! config.yml       configuration (optional)
//! ```

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use crate::actions::ActionRegistry;
use crate::command::{parse_commands, serialize_commands};
use crate::config::{ChitchatMode, Config, EmbedderKind, KnowledgeModeKind, ProviderKind, VariantMode};
use crate::domain::Domain;
use crate::engine::{Engine, EngineConfig};
use crate::error::{Error, Result};
use crate::flow::{parse_flowbook, FlowBook, SourceDocument};
use crate::harness::{self, count_loc, parse_test_file, ProviderMode, TestConversation, TestReport};
use crate::llm::LlmClient;
use crate::response::{KnowledgeBase, KnowledgeMode, LlmRephraser, Responder, VariantSelection};
use crate::state::Clock;
use crate::understanding::{
    CommandProvider, LlmCommandProvider, Preselector, RemoteEmbedder, ScriptedProvider,
};

pub struct Assistant {
    pub root: PathBuf,
    pub config: Config,
    pub domain: Arc<Domain>,
    pub registry: Arc<ActionRegistry>,
    pub knowledge: KnowledgeBase,
    /// Message text -> raw command text.
    pub script: HashMap<String, String>,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// `*.yml`/`*.yaml` files directly inside `dir`, sorted by name.
fn yaml_files(dir: &Path) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Ok(vec![]);
    }
    let entries = fs::read_dir(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && matches!(p.extension().and_then(|e| e.to_str()), Some("yml" | "yaml")))
        .collect();
    files.sort();
    Ok(files)
}

fn display_name(root: &Path, path: &Path) -> String {
    path.strip_prefix(root).unwrap_or(path).display().to_string()
}

/// Parses the domain files of an assistant directory without validating.
/// The `domain/` directory must exist.
pub fn load_flowbook(root: &Path) -> Result<FlowBook> {
    let domain = root.join("domain");
    if !domain.is_dir() {
        return Err(Error::Io {
            path: domain,
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "no domain directory"),
        });
    }
    let mut documents = Vec::new();
    for path in yaml_files(&domain)? {
        documents.push(SourceDocument::new(display_name(root, &path), read(&path)?));
    }
    parse_flowbook(&documents).map_err(Error::Parse)
}

/// Loads every test conversation under `tests/`.
pub fn load_tests(root: &Path) -> Result<Vec<TestConversation>> {
    let mut tests = Vec::new();
    let mut errors = Vec::new();
    for path in yaml_files(&root.join("tests"))? {
        match parse_test_file(&display_name(root, &path), &read(&path)?) {
            Ok(mut t) => tests.append(&mut t),
            Err(mut e) => errors.append(&mut e),
        }
    }
    if errors.is_empty() {
        Ok(tests)
    } else {
        Err(Error::Test(errors.join("\n")))
    }
}

/// Lines of code and data: domain files plus test files.
pub fn assistant_loc(root: &Path) -> Result<usize> {
    let mut total = 0;
    for dir in ["domain", "tests"] {
        for path in yaml_files(&root.join(dir))? {
            total += count_loc(&read(&path)?);
        }
    }
    Ok(total)
}

fn parse_script(text: &str) -> std::result::Result<HashMap<String, String>, String> {
    let table: HashMap<String, Vec<String>> = if text.trim().is_empty() {
        HashMap::new()
    } else {
        serde_yaml::from_str(text).map_err(|e| format!("scripted.yml: {e}"))?
    };
    let mut script = HashMap::new();
    for (message, lines) in table {
        let (commands, errors) = parse_commands(&lines.join("\n"));
        if let Some(e) = errors.first() {
            return Err(format!("scripted.yml: `{message}`: {}", e.message));
        }
        script.insert(message, serialize_commands(&commands));
    }
    Ok(script)
}

/// Knobs for building an engine from an assistant.
#[derive(Debug, Clone, Default)]
pub struct EngineOptions {
    pub provider: Option<ProviderKind>,
    /// Variant 0, no rephrasing, logical clock.
    pub deterministic: bool,
}

impl Assistant {
    pub fn load(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        let mut config = Config::load(&root.join("config.yml")).map_err(Error::Config)?;
        config.apply_env().map_err(Error::Config)?;
        let book = load_flowbook(&root)?;
        let actions_path = root.join("actions.yml");
        let registry = if actions_path.exists() {
            ActionRegistry::from_stub_yaml(&read(&actions_path)?, &book).map_err(Error::Actions)?
        } else {
            ActionRegistry::new()
        };
        let domain = Domain::new(book)?;
        let knowledge_dir = root.join(&config.knowledge.directory);
        let knowledge = KnowledgeBase::load_dir(&knowledge_dir).map_err(|source| Error::Io {
            path: knowledge_dir,
            source,
        })?;
        let script_path = root.join("scripted.yml");
        let script = if script_path.exists() {
            parse_script(&read(&script_path)?).map_err(Error::Config)?
        } else {
            HashMap::new()
        };
        Ok(Self {
            root,
            config,
            domain: Arc::new(domain),
            registry: Arc::new(registry),
            knowledge,
            script,
        })
    }

    pub fn tests(&self) -> Result<Vec<TestConversation>> {
        load_tests(&self.root)
    }

    fn llm_client(&self) -> LlmClient {
        let llm = &self.config.llm;
        LlmClient::new(&llm.base_url, &llm.model, llm.api_key(), Duration::from_secs(llm.timeout_secs))
    }

    /// Scripted provider over `scripted.yml`. Messages starting with `/`
    /// are taken as literal command text, e.g. `/StartFlow(check_balance)`.
    pub fn scripted_provider(&self) -> ScriptedProvider {
        let mut p = ScriptedProvider::new().with_literal_prefix('/');
        for (message, raw) in &self.script {
            p.insert_raw_message(message.clone(), raw.clone());
        }
        p
    }

    pub fn engine(&self, options: &EngineOptions) -> Engine {
        let kind = options.provider.unwrap_or(self.config.understanding.provider);
        let provider: Arc<dyn CommandProvider> = match kind {
            ProviderKind::Scripted => Arc::new(self.scripted_provider()),
            ProviderKind::Llm => Arc::new(LlmCommandProvider::new(Arc::new(self.llm_client()))),
        };
        let mut responder = Responder::new();
        responder.knowledge = self.knowledge.clone();
        responder.knowledge_top_k = self.config.knowledge.top_k;
        if self.config.knowledge.mode == KnowledgeModeKind::Generate {
            responder.knowledge_mode = KnowledgeMode::Generate(Arc::new(self.llm_client()));
        }
        if self.config.response.chitchat == ChitchatMode::Llm {
            responder.chitchat = Some(Arc::new(self.llm_client()));
        }
        if !options.deterministic {
            if self.config.response.variants == VariantMode::Random {
                responder.variants = VariantSelection::random();
            }
            if self.config.response.rephrase {
                responder.rephraser = Some(Arc::new(LlmRephraser::new(Arc::new(self.llm_client()))));
            }
        }
        let config = EngineConfig {
            executor: self.config.executor.clone(),
            preselect_k: self.config.understanding.preselect_k,
            transcript_turns: self.config.understanding.transcript_turns,
            clock: if options.deterministic { Clock::Logical } else { Clock::System },
            ..EngineConfig::default()
        };
        let engine = Engine::new(
            self.domain.clone(),
            self.registry.clone(),
            Arc::new(responder),
            provider,
            config,
        );
        match self.config.understanding.embedder {
            EmbedderKind::Lexical => engine,
            EmbedderKind::Remote => {
                let e = &self.config.embeddings;
                let llm = &self.config.llm;
                let client = LlmClient::new(
                    e.base_url.as_deref().unwrap_or(&llm.base_url),
                    &e.model,
                    llm.api_key(),
                    Duration::from_secs(llm.timeout_secs),
                );
                let preselector = Preselector::new(self.domain.book(), Box::new(RemoteEmbedder::new(client)));
                engine.with_preselector(preselector)
            }
        }
    }

    /// Runs the bundled tests. Rephrasing and random variants are always
    /// off; with `provider: None` the fixtures' scripted commands are used.
    pub fn run_tests(&self, provider: Option<ProviderKind>) -> Result<TestReport> {
        let suite = self.tests()?;
        let engine = self.engine(&EngineOptions {
            provider,
            deterministic: true,
        });
        let mode = match provider {
            None | Some(ProviderKind::Scripted) => ProviderMode::Scripted,
            Some(ProviderKind::Llm) => ProviderMode::Engine,
        };
        let mut report = harness::run_tests(&engine, &suite, &mode, &self.script);
        report.lines_of_code = Some(assistant_loc(&self.root)?);
        Ok(report)
    }
}
