use serde::Serialize;

use crate::domain::Domain;
use crate::flow::{SlotDefinition, StepKind};
use crate::state::{FrameKind, Tracker};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlotSummary {
    pub id: String,
    pub slot_type: String,
    pub description: Option<String>,
    pub allowed_values: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowSummary {
    pub id: String,
    pub name: String,
    pub description: String,
    pub slots: Vec<SlotSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActiveFlow {
    pub id: String,
    pub description: String,
}

/// Everything a command provider may look at for one turn.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnderstandingContext {
    /// Conversation before the latest message, as `USER:`/`BOT:` lines.
    pub transcript: String,
    pub latest_message: String,
    /// Zero-based index of the latest user message in the conversation.
    pub turn_index: usize,
    pub active_flow: Option<ActiveFlow>,
    pub awaited_slot: Option<SlotSummary>,
    /// Filled slots as `(id, value)`.
    pub slots: Vec<(String, String)>,
    pub candidate_flows: Vec<FlowSummary>,
    /// Stack frames, top first, as short descriptions.
    pub stack: Vec<String>,
}

impl UnderstandingContext {
    /// Builds the context after the latest user message was recorded.
    pub fn build(tracker: &Tracker, domain: &Domain, candidates: &[String], transcript_turns: usize) -> Self {
        let latest_message = tracker.latest_user_message().unwrap_or_default().to_string();
        let mut lines: Vec<&str> = Vec::new();
        let full = tracker.render_transcript(transcript_turns.saturating_add(1));
        lines.extend(full.lines());
        if lines.last().is_some_and(|l| l.strip_prefix("USER: ") == Some(latest_message.as_str())) {
            lines.pop();
        }
        let active_flow = tracker.stack.top_user_flow().and_then(|f| {
            domain.flow(&f.flow_id).map(|flow| ActiveFlow {
                id: flow.id.clone(),
                description: flow.description.clone(),
            })
        });
        let awaited_slot = tracker.stack.top().and_then(|top| {
            let step = domain.current_step(top)?;
            let StepKind::Collect { slot, description, .. } = &step.kind else {
                return None;
            };
            if !top.asked.contains(&step.id) {
                return None;
            }
            domain.slot(slot).map(|def| summarize(def, description.clone()))
        });
        let candidate_flows = candidates
            .iter()
            .filter_map(|id| domain.flow(id))
            .map(|flow| {
                let mut slots = Vec::new();
                if let Some(program) = domain.program(&flow.id) {
                    for step in &program.steps {
                        if let StepKind::Collect { slot, description, .. } = &step.kind {
                            if slots.iter().any(|s: &SlotSummary| &s.id == slot) {
                                continue;
                            }
                            if let Some(def) = domain.slot(slot) {
                                slots.push(summarize(def, description.clone()));
                            }
                        }
                    }
                }
                FlowSummary {
                    id: flow.id.clone(),
                    name: flow.display_name(),
                    description: flow.description.clone(),
                    slots,
                }
            })
            .collect();
        let stack = tracker
            .stack
            .iter_top_down()
            .map(|f| {
                let kind = match f.kind {
                    FrameKind::UserFlow => "flow",
                    FrameKind::Pattern => "pattern",
                };
                format!("{} ({kind}) at step {}", f.flow_id, f.cursor)
            })
            .collect();
        let slots = tracker
            .slots
            .iter()
            .filter_map(|(k, v)| v.as_ref().map(|v| (k.clone(), v.to_string())))
            .collect();
        Self {
            transcript: lines.join("\n"),
            latest_message,
            turn_index: tracker.user_turns().saturating_sub(1),
            active_flow,
            awaited_slot,
            slots,
            candidate_flows,
            stack,
        }
    }
}

fn summarize(def: &SlotDefinition, description: Option<String>) -> SlotSummary {
    SlotSummary {
        id: def.id.clone(),
        slot_type: def.slot_type.as_str().to_string(),
        description,
        allowed_values: def.allowed_values.iter().map(ToString::to_string).collect(),
    }
}
