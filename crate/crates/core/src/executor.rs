//! Runs the active frame step by step until the conversation needs the
//! user again or the stack is empty.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value as Json};

use crate::actions::{ActionContext, ActionMessage, ActionRegistry};
use crate::domain::Domain;
use crate::flow::{ProgramStep, ResolvedNext, StepKind, StepTarget, START_FLOW_PREFIX};
use crate::llm::ChatMessage;
use crate::patterns::{self, actions, context, instantiate_pattern};
use crate::response::{
    render_text, KnowledgeAnswer, Responder, CHITCHAT_INSTRUCTIONS, CHITCHAT_RESPONSE,
    NO_KNOWLEDGE_ANSWER,
};
use crate::state::{EventKind, Frame, FrameKind, SlotSource, Tracker};
use crate::value::Value;

/// Text used when even the internal-error pattern cannot run.
pub const FALLBACK_TEXT: &str = "Sorry, something went wrong.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExecutorConfig {
    /// Maximum number of steps executed per turn.
    pub step_budget: usize,
    /// Run `pattern_completed` when a task finishes and the stack empties.
    pub completed_pattern: bool,
    /// Transcript lines given to the rephraser and chitchat generator.
    pub transcript_turns: usize,
}

impl Default for ExecutorConfig {
    fn default() -> Self {
        Self {
            step_budget: 100,
            completed_pattern: false,
            transcript_turns: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum TurnState {
    /// Waiting for the user; `slot` is the slot being asked for, if any.
    Listening { slot: Option<String> },
    Idle,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BotUtterance {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnOutput {
    pub messages: Vec<BotUtterance>,
    pub state: TurnState,
}

pub struct Executor<'a> {
    pub domain: &'a Domain,
    pub registry: &'a ActionRegistry,
    pub responder: &'a Responder,
    pub config: &'a ExecutorConfig,
}

enum Outcome {
    Continue,
    Listen(Option<String>),
}

/// Bookkeeping local to one `execute` call.
struct Run {
    budget: usize,
    retried: bool,
    /// A user flow (or a cancelled task) left the stack; the next user flow
    /// that surfaces was interrupted and gets a resume announcement.
    resume: bool,
    task_completed: bool,
    completed_pushed: bool,
    validation_reported: HashSet<String>,
}

impl Executor<'_> {
    pub fn execute(&self, tracker: &mut Tracker) -> TurnOutput {
        let start = tracker.events().len();
        let state = self.run(tracker);
        let messages = tracker.events()[start..]
            .iter()
            .filter_map(|e| match &e.kind {
                EventKind::BotMessage { text, template, .. } => Some(BotUtterance {
                    text: text.clone(),
                    template: template.clone(),
                }),
                _ => None,
            })
            .collect();
        TurnOutput { messages, state }
    }

    fn run(&self, tracker: &mut Tracker) -> TurnState {
        let mut run = Run {
            budget: self.config.step_budget,
            retried: false,
            resume: false,
            task_completed: false,
            completed_pushed: false,
            validation_reported: HashSet::new(),
        };
        loop {
            let Some(top) = tracker.stack.top().cloned() else {
                if self.config.completed_pattern && run.task_completed && !run.completed_pushed {
                    run.completed_pushed = true;
                    self.push_pattern(tracker, patterns::COMPLETED, BTreeMap::new());
                    continue;
                }
                return TurnState::Idle;
            };
            if top.kind == FrameKind::UserFlow {
                if run.resume && (!top.asked.is_empty() || !top.fulfilled.is_empty()) {
                    run.resume = false;
                    let ctx = BTreeMap::from([
                        (context::FLOW_ID.to_string(), json!(top.flow_id)),
                        (context::FLOW_NAME.to_string(), json!(self.domain.display_name(&top.flow_id))),
                    ]);
                    self.push_pattern(tracker, patterns::CONTINUE_INTERRUPTED, ctx);
                    continue;
                }
                run.resume = false;
            }
            if run.budget == 0 {
                tracker.record(EventKind::Warning {
                    message: format!("step budget of {} exhausted", self.config.step_budget),
                });
                if run.retried {
                    while let Some(frame) = tracker.stack.top() {
                        let frame_id = frame.id;
                        tracker.record(EventKind::FrameCancelled { frame_id });
                    }
                    self.emit(tracker, FALLBACK_TEXT.to_string(), None);
                    return TurnState::Idle;
                }
                run.retried = true;
                run.budget = self.config.step_budget;
                self.fail(tracker, &top, "step budget exhausted".into(), &mut run);
                continue;
            }
            run.budget -= 1;
            match self.step(tracker, &top, &mut run) {
                Ok(Outcome::Continue) => {}
                Ok(Outcome::Listen(slot)) => return TurnState::Listening { slot },
                Err(message) => self.fail(tracker, &top, message, &mut run),
            }
        }
    }

    /// Cancels the failing frame and hands over to the internal-error
    /// pattern. If that pattern itself fails, a fixed text is used.
    fn fail(&self, tracker: &mut Tracker, frame: &Frame, message: String, run: &mut Run) {
        tracker.record(EventKind::Warning {
            message: format!("{} ({}): {message}", frame.flow_id, frame.cursor),
        });
        tracker.record(EventKind::FrameCancelled { frame_id: frame.id });
        if frame.kind == FrameKind::Pattern && frame.flow_id == patterns::INTERNAL_ERROR {
            self.emit(tracker, FALLBACK_TEXT.to_string(), None);
            return;
        }
        if frame.kind == FrameKind::UserFlow {
            run.resume = true;
        }
        let ctx = BTreeMap::from([(context::REASON.to_string(), json!(message))]);
        self.push_pattern(tracker, patterns::INTERNAL_ERROR, ctx);
    }

    fn step(&self, tracker: &mut Tracker, top: &Frame, run: &mut Run) -> Result<Outcome, String> {
        let program = self
            .domain
            .frame_program(top)
            .ok_or_else(|| format!("no flow named `{}`", top.flow_id))?;
        let step = program
            .step(&top.cursor)
            .ok_or_else(|| format!("flow `{}` has no step `{}`", top.flow_id, top.cursor))?;
        match &step.kind {
            StepKind::Collect {
                slot,
                ask_before_filling,
                ..
            } => self.collect(tracker, top, step, slot, *ask_before_filling, run),
            StepKind::SetSlots { assignments } => {
                let source = match top.kind {
                    FrameKind::UserFlow => SlotSource::Flow,
                    FrameKind::Pattern => SlotSource::Pattern,
                };
                for (slot, value) in assignments {
                    tracker.record(EventKind::SlotSet {
                        slot: slot.clone(),
                        value: value.clone(),
                        source,
                    });
                }
                self.advance(tracker, top, step, run)
            }
            StepKind::Action { name } => self.action(tracker, top, step, name, run),
        }
    }

    fn collect(
        &self,
        tracker: &mut Tracker,
        top: &Frame,
        step: &ProgramStep,
        slot: &str,
        ask_before_filling: bool,
        run: &mut Run,
    ) -> Result<Outcome, String> {
        let asked = top.asked.contains(&step.id);
        let filled = tracker.slot(slot).is_some();
        let answered = asked && slot_set_this_turn(tracker, slot);
        if filled && (!ask_before_filling || answered) {
            tracker.record(EventKind::CollectFulfilled {
                frame_id: top.id,
                step_id: step.id.clone(),
            });
            return self.advance(tracker, top, step, run);
        }
        if asked && !run.validation_reported.contains(slot) {
            if let Some(raw) = rejected_this_turn(tracker, slot) {
                run.validation_reported.insert(slot.to_string());
                let specific = format!("utter_invalid_{slot}");
                let template = if self.domain.response(&specific).is_some() {
                    specific
                } else {
                    "utter_invalid_slot_value".to_string()
                };
                let ctx = BTreeMap::from([
                    (context::VALUE.to_string(), json!(raw)),
                    (context::SLOT.to_string(), json!(slot)),
                ]);
                self.utter(tracker, &template, &ctx)?;
            }
        }
        self.utter(tracker, &format!("utter_ask_{slot}"), &top.context)?;
        tracker.record(EventKind::StepPrompted {
            frame_id: top.id,
            step_id: step.id.clone(),
        });
        Ok(Outcome::Listen(Some(slot.to_string())))
    }

    fn action(
        &self,
        tracker: &mut Tracker,
        top: &Frame,
        step: &ProgramStep,
        name: &str,
        run: &mut Run,
    ) -> Result<Outcome, String> {
        if name == actions::LISTEN {
            if top.asked.contains(&step.id) {
                return self.advance(tracker, top, step, run);
            }
            tracker.record(EventKind::ActionExecuted { name: name.to_string() });
            tracker.record(EventKind::StepPrompted {
                frame_id: top.id,
                step_id: step.id.clone(),
            });
            return Ok(Outcome::Listen(None));
        }
        tracker.record(EventKind::ActionExecuted { name: name.to_string() });
        if let Some(child) = name.strip_prefix(START_FLOW_PREFIX) {
            return self.call_flow(tracker, top, step, child, run);
        }
        match name {
            actions::SET_CORRECTED_SLOTS => {
                let slot = top
                    .context_str(context::SLOT)
                    .ok_or("correction without a slot")?;
                let def = self
                    .domain
                    .slot(slot)
                    .ok_or_else(|| format!("undefined slot: {slot}"))?;
                let value = match top.context.get(context::NEW_VALUE) {
                    None | Some(Json::Null) => None,
                    Some(v) => {
                        let v: Value = serde_json::from_value(v.clone()).map_err(|e| e.to_string())?;
                        if !def.accepts(&v) {
                            return Err(format!("value `{v}` does not fit slot `{slot}`"));
                        }
                        Some(v)
                    }
                };
                tracker.record(EventKind::SlotSet {
                    slot: slot.to_string(),
                    value,
                    source: SlotSource::Pattern,
                });
            }
            actions::ACKNOWLEDGE_CORRECTION => {
                let slot = top.context_str(context::SLOT).unwrap_or_default();
                let specific = format!("utter_corrected_{slot}");
                let template = if self.domain.response(&specific).is_some() {
                    specific
                } else {
                    "utter_corrected_previous_input".to_string()
                };
                self.utter(tracker, &template, &top.context)?;
            }
            actions::PRESENT_CLARIFICATION_OPTIONS => {
                let mut ids: Vec<&str> = top
                    .context
                    .get(context::OPTION_IDS)
                    .and_then(Json::as_array)
                    .map(|a| a.iter().filter_map(Json::as_str).collect())
                    .unwrap_or_default();
                ids.sort_unstable();
                let specific = format!("utter_clarify_{}", ids.join("_or_"));
                let template = if self.domain.response(&specific).is_some() {
                    specific
                } else {
                    "utter_clarify_options".to_string()
                };
                self.utter(tracker, &template, &top.context)?;
            }
            actions::KNOWLEDGE_ANSWER => {
                let query = tracker.latest_user_message().unwrap_or_default().to_string();
                let (answer, warning) = self.responder.knowledge_answer(&query);
                if let Some(message) = warning {
                    tracker.record(EventKind::Warning { message });
                }
                match answer {
                    KnowledgeAnswer::Text(text) => self.emit(tracker, text, None),
                    KnowledgeAnswer::NoAnswer => self.utter(tracker, NO_KNOWLEDGE_ANSWER, &top.context)?,
                }
            }
            actions::GENERATE_CHITCHAT_RESPONSE => match &self.responder.chitchat {
                Some(generator) => {
                    let transcript = tracker.render_transcript(self.config.transcript_turns);
                    let messages = [ChatMessage::system(CHITCHAT_INSTRUCTIONS), ChatMessage::user(transcript)];
                    match generator.complete(&messages) {
                        Ok(text) if !text.trim().is_empty() => {
                            self.emit(tracker, text.trim().to_string(), None)
                        }
                        other => {
                            let reason = other.err().map_or("empty reply".to_string(), |e| e.to_string());
                            tracker.record(EventKind::Warning {
                                message: format!("chitchat generation failed: {reason}"),
                            });
                            self.utter(tracker, CHITCHAT_RESPONSE, &top.context)?;
                        }
                    }
                }
                None => self.utter(tracker, CHITCHAT_RESPONSE, &top.context)?,
            },
            // the cancellation itself happens when the pattern completes
            actions::CANCEL_TARGET_FRAME | actions::NOTIFY_HANDOFF => {}
            _ if name.starts_with("utter_") && self.domain.response(name).is_some() => {
                self.utter(tracker, name, &top.context)?;
            }
            _ => {
                let handler = self
                    .registry
                    .get(name)
                    .ok_or_else(|| format!("unknown action `{name}`"))?;
                let effects = {
                    let ctx = ActionContext {
                        slots: &tracker.slots,
                        frame: top,
                        latest_message: tracker.latest_user_message(),
                    };
                    handler.run(&ctx).map_err(|e| format!("action `{name}` failed: {e}"))?
                };
                for (slot, value) in effects.slots {
                    let def = self
                        .domain
                        .slot(&slot)
                        .ok_or_else(|| format!("action `{name}` set undefined slot `{slot}`"))?;
                    if let Some(v) = &value {
                        if !def.accepts(v) {
                            return Err(format!("action `{name}` set `{slot}` to invalid value `{v}`"));
                        }
                    }
                    tracker.record(EventKind::SlotSet {
                        slot,
                        value,
                        source: SlotSource::Action,
                    });
                }
                for message in effects.messages {
                    match message {
                        ActionMessage::Template(id) => self.utter(tracker, &id, &top.context)?,
                        ActionMessage::Text(text) => self.emit(tracker, text, None),
                    }
                }
            }
        }
        self.advance(tracker, top, step, run)
    }

    /// `start_flow:<id>`: the caller moves on first, then the child is
    /// pushed above it so the caller resumes after the child completes.
    fn call_flow(
        &self,
        tracker: &mut Tracker,
        top: &Frame,
        step: &ProgramStep,
        child: &str,
        run: &mut Run,
    ) -> Result<Outcome, String> {
        let program = self
            .domain
            .program(child)
            .ok_or_else(|| format!("cannot call undefined flow `{child}`"))?;
        let first = program.first().id.clone();
        let target = self.resolve_next(tracker, step);
        self.goto(tracker, top, target, run);
        if tracker.stack.user_flow(child).is_some() {
            tracker.record(EventKind::Warning {
                message: format!("flow `{child}` is already active; not starting it again"),
            });
            return Ok(Outcome::Continue);
        }
        let frame = Frame {
            id: tracker.next_frame_id(),
            kind: FrameKind::UserFlow,
            flow_id: child.to_string(),
            cursor: first,
            asked: Default::default(),
            fulfilled: Default::default(),
            context: Default::default(),
            called_by: Some(top.id),
        };
        tracker.record(EventKind::FramePushed { frame });
        Ok(Outcome::Continue)
    }

    fn resolve_next(&self, tracker: &mut Tracker, step: &ProgramStep) -> StepTarget {
        match &step.next {
            ResolvedNext::Goto(t) => t.clone(),
            ResolvedNext::Conditional { clauses, otherwise } => {
                let mut chosen = None;
                let mut warnings = Vec::new();
                for (condition, target) in clauses {
                    let eval = condition.evaluate(&tracker.slots);
                    warnings.extend(eval.warnings);
                    if eval.value {
                        chosen = Some(target.clone());
                        break;
                    }
                }
                for message in warnings {
                    tracker.record(EventKind::Warning { message });
                }
                chosen.or_else(|| otherwise.clone()).unwrap_or_else(|| {
                    tracker.record(EventKind::Warning {
                        message: format!("no branch of step `{}` matched; ending the flow", step.id),
                    });
                    StepTarget::End
                })
            }
        }
    }

    fn advance(&self, tracker: &mut Tracker, top: &Frame, step: &ProgramStep, run: &mut Run) -> Result<Outcome, String> {
        let target = self.resolve_next(tracker, step);
        self.goto(tracker, top, target, run);
        Ok(Outcome::Continue)
    }

    fn goto(&self, tracker: &mut Tracker, frame: &Frame, target: StepTarget, run: &mut Run) {
        match target {
            StepTarget::Step(step_id) => tracker.record(EventKind::FrameStepChanged {
                frame_id: frame.id,
                step_id,
            }),
            StepTarget::End => self.complete(tracker, frame, run),
        }
    }

    fn complete(&self, tracker: &mut Tracker, frame: &Frame, run: &mut Run) {
        tracker.record(EventKind::FrameCompleted { frame_id: frame.id });
        match frame.kind {
            FrameKind::UserFlow => {
                if frame.called_by.is_none() {
                    run.resume = true;
                    run.task_completed = true;
                }
            }
            FrameKind::Pattern if frame.flow_id == patterns::CANCEL => {
                let Some(target) = frame.context_frame(context::TARGET_FRAME) else {
                    return;
                };
                if tracker.stack.get(target).is_none() {
                    return;
                }
                while let Some(top) = tracker.stack.top() {
                    let frame_id = top.id;
                    tracker.record(EventKind::FrameCancelled { frame_id });
                    if frame_id == target {
                        break;
                    }
                }
                run.resume = true;
            }
            FrameKind::Pattern if frame.flow_id == patterns::CORRECTION => {
                self.rewind_corrected_flow(tracker, frame);
            }
            FrameKind::Pattern => {}
        }
    }

    /// After a correction the flow that collected the slot goes back to
    /// that collect step, so everything depending on the value is
    /// re-evaluated. Filled collect steps are skipped on the way forward.
    fn rewind_corrected_flow(&self, tracker: &mut Tracker, pattern: &Frame) {
        let (Some(target), Some(slot)) = (
            pattern.context_frame(context::TARGET_FRAME),
            pattern.context_str(context::SLOT),
        ) else {
            return;
        };
        let Some(frame) = tracker.stack.get(target) else {
            return;
        };
        let Some(program) = self.domain.program(&frame.flow_id) else {
            return;
        };
        let step = program
            .collect_steps_for(slot)
            .find(|s| frame.fulfilled.contains(&s.id))
            .map(|s| s.id.clone());
        if let Some(step_id) = step {
            tracker.record(EventKind::FrameStepChanged { frame_id: target, step_id });
        }
    }

    fn push_pattern(&self, tracker: &mut Tracker, id: &str, ctx: BTreeMap<String, Json>) {
        let frame = instantiate_pattern(id, ctx, self.domain.catalog(), tracker.next_frame_id());
        tracker.record(EventKind::FramePushed { frame });
    }

    fn utter(&self, tracker: &mut Tracker, template_id: &str, ctx: &BTreeMap<String, Json>) -> Result<(), String> {
        let template = self
            .domain
            .response(template_id)
            .ok_or_else(|| format!("unknown template `{template_id}`"))?;
        let variant = self.responder.choose_variant(template);
        let text = render_text(variant, &tracker.slots, ctx)
            .map_err(|p| format!("template `{template_id}` has unfilled placeholder `{p}`"))?;
        self.emit(tracker, text, Some(template_id.to_string()));
        Ok(())
    }

    fn emit(&self, tracker: &mut Tracker, text: String, template: Option<String>) {
        let Some(rephraser) = &self.responder.rephraser else {
            tracker.record(EventKind::BotMessage { text, template, original: None });
            return;
        };
        let transcript = tracker.render_transcript(self.config.transcript_turns);
        match rephraser.rephrase(&text, &transcript) {
            Ok(rephrased) if rephrased != text => tracker.record(EventKind::BotMessage {
                text: rephrased,
                template,
                original: Some(text),
            }),
            Ok(_) => tracker.record(EventKind::BotMessage { text, template, original: None }),
            Err(e) => {
                tracker.record(EventKind::Warning {
                    message: format!("rephrasing failed, using the template text: {e}"),
                });
                tracker.record(EventKind::BotMessage { text, template, original: None });
            }
        }
    }
}

fn slot_set_this_turn(tracker: &Tracker, slot: &str) -> bool {
    tracker
        .events_since_user_message()
        .iter()
        .any(|e| matches!(&e.kind, EventKind::SlotSet { slot: s, .. } if s == slot))
}

fn rejected_this_turn(tracker: &Tracker, slot: &str) -> Option<String> {
    tracker.events_since_user_message().iter().find_map(|e| match &e.kind {
        EventKind::ValidationRejected { slot: s, value } if s == slot => Some(value.clone()),
        _ => None,
    })
}
