use std::io::{self, BufRead, IsTerminal, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};

use flowstack::assistant::{load_flowbook, load_tests, Assistant, EngineOptions};
use flowstack::config::{ProviderKind, StoreKind};
use flowstack::flow::validate_flowbook;
use flowstack::service::{self, AppState};
use flowstack::state::{FileStore, MemoryStore, TrackerStore};

#[derive(Parser)]
#[command(name = "flowstack", version, about = "Task-oriented dialogue engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check an assistant's flows, slots, responses, actions and tests.
    Validate { dir: PathBuf },
    /// Chat with an assistant on the terminal.
    Shell {
        dir: PathBuf,
        /// Print commands and the dialogue stack after every turn.
        #[arg(long)]
        debug: bool,
        /// Override the configured understanding provider.
        #[arg(long, value_parser = parse_provider)]
        provider: Option<ProviderKind>,
    },
    /// Run the assistant's test conversations.
    Test {
        dir: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        /// Drive understanding with this provider instead of the fixtures'
        /// scripted commands.
        #[arg(long, value_parser = parse_provider)]
        provider: Option<ProviderKind>,
    },
    /// Serve the HTTP and WebSocket API.
    Serve {
        dir: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080", env = "FLOWSTACK_ADDR")]
        addr: SocketAddr,
        #[arg(long, value_parser = parse_provider)]
        provider: Option<ProviderKind>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

fn parse_provider(s: &str) -> Result<ProviderKind, String> {
    s.parse()
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .with_writer(io::stderr)
        .with_ansi(io::stderr().is_terminal())
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate { dir } => validate(&dir),
        Command::Shell { dir, debug, provider } => shell(&dir, debug, provider),
        Command::Test { dir, format, provider } => test(&dir, format, provider),
        Command::Serve { dir, addr, provider } => serve(&dir, addr, provider),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn validate(dir: &Path) -> anyhow::Result<ExitCode> {
    let book = load_flowbook(dir)?;
    let report = validate_flowbook(&book);
    for w in &report.warnings {
        println!("warning: {w}");
    }
    for e in &report.errors {
        println!("error: {e}");
    }
    if !report.is_valid() {
        println!("{} error(s)", report.errors.len());
        return Ok(ExitCode::FAILURE);
    }
    // actions, knowledge, config and tests are checked by a full load
    let assistant = Assistant::load(dir)?;
    for (flow, action) in assistant.domain.unresolved_actions(&assistant.registry) {
        println!("warning: flow `{flow}`: action `{action}` has no handler in actions.yml");
    }
    let tests = load_tests(dir)?;
    println!(
        "ok: {} flows, {} slots, {} responses, {} actions, {} tests",
        book.flows.len(),
        book.slots.len(),
        book.responses.len(),
        assistant.registry.names().len(),
        tests.len()
    );
    Ok(ExitCode::SUCCESS)
}

fn shell(dir: &Path, debug: bool, provider: Option<ProviderKind>) -> anyhow::Result<ExitCode> {
    let assistant = Assistant::load(dir)?;
    let engine = assistant.engine(&EngineOptions {
        provider,
        deterministic: false,
    });
    let mut tracker = engine.new_tracker(uuid::Uuid::new_v4().simple().to_string());
    println!("Type a message; `:restart` starts over, `:tracker` dumps state, `:quit` exits.");
    let stdin = io::stdin();
    let mut stdout = io::stdout();
    loop {
        print!("you> ");
        stdout.flush()?;
        let mut line = String::new();
        if stdin.lock().read_line(&mut line)? == 0 {
            break;
        }
        let text = line.trim();
        match text {
            "" => continue,
            ":quit" | ":q" => break,
            ":restart" => {
                tracker = engine.new_tracker(uuid::Uuid::new_v4().simple().to_string());
                println!("(new conversation)");
                continue;
            }
            ":tracker" => {
                println!("{}", serde_json::to_string_pretty(&tracker.snapshot(20))?);
                continue;
            }
            _ => {}
        }
        let report = engine.run_turn(&mut tracker, text);
        if debug {
            let d = &report.debug;
            if let Some(e) = &d.provider_error {
                println!("  [provider error] {e}");
            }
            println!("  [candidates] {}", d.candidate_flows.join(", "));
            if let Some(raw) = &d.raw {
                println!("  [raw] {}", raw.replace('\n', " | "));
            }
            for e in &d.parse_errors {
                println!("  [parse error] {e}");
            }
            for c in &d.validated {
                println!("  [command] {c}");
            }
            for dropped in &d.dropped {
                println!("  [dropped] {} ({:?})", dropped.command, dropped.reason);
            }
            let stack: Vec<String> = d
                .stack_after
                .iter()
                .map(|f| format!("{}@{}", f.flow_id, f.cursor))
                .collect();
            println!("  [stack] {}", stack.join(" > "));
        }
        for m in &report.messages {
            println!("bot> {}", m.text);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn test(dir: &Path, format: Format, provider: Option<ProviderKind>) -> anyhow::Result<ExitCode> {
    let assistant = Assistant::load(dir)?;
    let report = assistant.run_tests(provider)?;
    match format {
        Format::Text => print!("{}", report.to_text()),
        Format::Json => println!("{}", report.to_json()),
    }
    Ok(if report.passed == report.total {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn serve(dir: &Path, addr: SocketAddr, provider: Option<ProviderKind>) -> anyhow::Result<ExitCode> {
    let assistant = Assistant::load(dir)?;
    let engine = assistant.engine(&EngineOptions {
        provider,
        deterministic: false,
    });
    let store: Arc<dyn TrackerStore> = match assistant.config.store.kind {
        StoreKind::Memory => Arc::new(MemoryStore::new()),
        StoreKind::File => {
            let path = dir.join(&assistant.config.store.directory);
            Arc::new(FileStore::new(&path).with_context(|| format!("opening {}", path.display()))?)
        }
    };
    let state = AppState::new(engine, store);
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(service::serve(state, addr))?;
    Ok(ExitCode::SUCCESS)
}
