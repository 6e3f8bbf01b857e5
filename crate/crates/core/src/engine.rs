//! The turn loop: record the message, generate commands, validate them,
//! apply them to the stack, then execute flows until the bot listens.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Serialize;

use crate::actions::ActionRegistry;
use crate::command::{validate_commands, Command, DroppedCommand};
use crate::domain::Domain;
use crate::executor::{BotUtterance, Executor, ExecutorConfig, TurnOutput, TurnState};
use crate::patterns::{self, context, instantiate_pattern};
use crate::processor::process_commands;
use crate::response::Responder;
use crate::state::{Clock, EventKind, Frame, SlotSource, Tracker};
use crate::understanding::{generate_commands, CommandProvider, Preselector, UnderstandingContext};
use crate::value::Value;

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub executor: ExecutorConfig,
    pub preselect_k: usize,
    pub transcript_turns: usize,
    pub clock: Clock,
    /// Replay the event log after every turn and check it reproduces the
    /// tracker. On by default in debug builds.
    pub verify_replay: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            executor: ExecutorConfig::default(),
            preselect_k: 20,
            transcript_turns: 20,
            clock: Clock::System,
            verify_replay: cfg!(debug_assertions),
        }
    }
}

/// Why the bot said what it said in one turn.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TurnDebug {
    /// Raw understanding output; `None` if the provider failed.
    pub raw: Option<String>,
    pub commands: Vec<Command>,
    pub parse_errors: Vec<String>,
    /// Commands that survived validation, in wire syntax.
    pub validated: Vec<Command>,
    pub dropped: Vec<DroppedCommand>,
    pub provider_error: Option<String>,
    pub latency_ms: u64,
    pub candidate_flows: Vec<String>,
    pub stack_before: Vec<Frame>,
    pub stack_after: Vec<Frame>,
    pub slots: BTreeMap<String, Option<Value>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TurnReport {
    pub messages: Vec<BotUtterance>,
    pub state: TurnState,
    pub debug: TurnDebug,
}

/// Shared, immutable engine; conversations are trackers passed in by the
/// caller.
#[derive(Clone)]
pub struct Engine {
    domain: Arc<Domain>,
    registry: Arc<ActionRegistry>,
    responder: Arc<Responder>,
    provider: Arc<dyn CommandProvider>,
    preselector: Arc<Preselector>,
    config: EngineConfig,
}

impl Engine {
    pub fn new(
        domain: Arc<Domain>,
        registry: Arc<ActionRegistry>,
        responder: Arc<Responder>,
        provider: Arc<dyn CommandProvider>,
        config: EngineConfig,
    ) -> Self {
        let preselector = Arc::new(Preselector::lexical(domain.book()));
        Self {
            domain,
            registry,
            responder,
            provider,
            preselector,
            config,
        }
    }

    pub fn with_preselector(mut self, preselector: Preselector) -> Self {
        self.preselector = Arc::new(preselector);
        self
    }

    pub fn with_provider(&self, provider: Arc<dyn CommandProvider>) -> Self {
        Self {
            provider,
            ..self.clone()
        }
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn preselector(&self) -> &Preselector {
        &self.preselector
    }

    /// Fresh conversation with declared initial slot values applied.
    pub fn new_tracker(&self, conversation_id: impl Into<String>) -> Tracker {
        let mut tracker = Tracker::with_clock(conversation_id, self.config.clock);
        for def in self.domain.book().slots.values() {
            if let Some(value) = &def.initial_value {
                tracker.record(EventKind::SlotSet {
                    slot: def.id.clone(),
                    value: Some(value.clone()),
                    source: SlotSource::Initial,
                });
            }
        }
        tracker
    }

    pub fn run_turn(&self, tracker: &mut Tracker, message: &str) -> TurnReport {
        let stack_before = tracker.stack.frames().to_vec();
        tracker.record(EventKind::UserMessage {
            text: message.to_string(),
        });
        let candidate_flows = self
            .preselector
            .preselect(message, self.config.preselect_k);
        let ctx = UnderstandingContext::build(
            tracker,
            &self.domain,
            &candidate_flows,
            self.config.transcript_turns,
        );
        let mut debug = TurnDebug {
            raw: None,
            commands: vec![],
            parse_errors: vec![],
            validated: vec![],
            dropped: vec![],
            provider_error: None,
            latency_ms: 0,
            candidate_flows,
            stack_before,
            stack_after: vec![],
            slots: BTreeMap::new(),
        };

        match generate_commands(self.provider.as_ref(), &ctx) {
            Ok(result) => {
                let validation = validate_commands(&result.commands, &self.domain, tracker);
                let parse_errors: Vec<String> = result.parse_errors.iter().map(ToString::to_string).collect();
                tracker.record(EventKind::CommandsGenerated {
                    raw: result.raw.clone(),
                    commands: result.commands.clone(),
                    dropped: validation.dropped.clone(),
                    parse_errors: parse_errors.clone(),
                });
                for rejection in &validation.rejected {
                    tracker.record(EventKind::ValidationRejected {
                        slot: rejection.slot.clone(),
                        value: rejection.value.clone(),
                    });
                }
                // a rejected answer is handled by the re-ask, not as "not understood"
                if !(validation.commands.is_empty() && !validation.rejected.is_empty()) {
                    process_commands(tracker, &validation.commands, &self.domain);
                }
                debug.raw = Some(result.raw);
                debug.commands = result.commands;
                debug.parse_errors = parse_errors;
                debug.validated = validation.commands.iter().map(|c| c.to_command()).collect();
                debug.dropped = validation.dropped;
                debug.latency_ms = result.latency_ms;
            }
            Err(e) => {
                let message = format!("understanding failed: {e}");
                tracker.record(EventKind::Warning {
                    message: message.clone(),
                });
                let ctx = BTreeMap::from([(context::REASON.to_string(), serde_json::json!(message))]);
                let frame = instantiate_pattern(
                    patterns::INTERNAL_ERROR,
                    ctx,
                    self.domain.catalog(),
                    tracker.next_frame_id(),
                );
                tracker.record(EventKind::FramePushed { frame });
                debug.provider_error = Some(e.to_string());
            }
        }

        let TurnOutput { messages, state } = self.execute(tracker);
        debug.stack_after = tracker.stack.frames().to_vec();
        debug.slots = tracker.slots.clone();
        if self.config.verify_replay {
            verify_replay(tracker);
        }
        TurnReport {
            messages,
            state,
            debug,
        }
    }

    /// Runs flows without a new user message (e.g. to greet).
    pub fn execute(&self, tracker: &mut Tracker) -> TurnOutput {
        Executor {
            domain: &self.domain,
            registry: &self.registry,
            responder: &self.responder,
            config: &self.config.executor,
        }
        .execute(tracker)
    }
}

fn verify_replay(tracker: &Tracker) {
    let replayed = Tracker::replay(tracker.conversation_id.clone(), tracker.events().iter().cloned());
    if replayed.slots != tracker.slots || replayed.stack != tracker.stack {
        tracing::error!(conversation = %tracker.conversation_id, "event replay diverged from tracker state");
        debug_assert!(false, "event replay diverged from tracker state");
    }
}
