//! Conversation state: slots, the dialogue stack and the event log.
//!
//! The tracker is event sourced. Every change goes through [`Tracker::apply`],
//! and replaying the event log from an empty tracker reproduces the slots
//! and the stack exactly.

mod event;
mod frame;
mod store;

use std::collections::BTreeMap;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

pub use event::{Event, EventKind, SlotSource};
pub use frame::{DialogueStack, Frame, FrameId, FrameKind};
pub use store::{FileStore, MemoryStore, StoreError, TrackerStore};

use crate::value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Clock {
    #[default]
    System,
    /// Timestamps are event indices; keeps whole trackers reproducible.
    Logical,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tracker {
    pub conversation_id: String,
    pub slots: BTreeMap<String, Option<Value>>,
    pub stack: DialogueStack,
    events: Vec<Event>,
    next_frame_id: FrameId,
    clock: Clock,
}

impl Tracker {
    pub fn new(conversation_id: impl Into<String>) -> Self {
        Self::with_clock(conversation_id, Clock::System)
    }

    pub fn with_clock(conversation_id: impl Into<String>, clock: Clock) -> Self {
        Self {
            conversation_id: conversation_id.into(),
            slots: BTreeMap::new(),
            stack: DialogueStack::default(),
            events: Vec::new(),
            next_frame_id: 1,
            clock,
        }
    }

    /// Folds `events` over an empty tracker.
    pub fn replay(conversation_id: impl Into<String>, events: impl IntoIterator<Item = Event>) -> Self {
        events
            .into_iter()
            .fold(Tracker::new(conversation_id), apply_event)
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn clock(&self) -> Clock {
        self.clock
    }

    pub fn slot(&self, id: &str) -> Option<&Value> {
        self.slots.get(id).and_then(Option::as_ref)
    }

    /// Id that the next pushed frame will get.
    pub fn next_frame_id(&self) -> FrameId {
        self.next_frame_id
    }

    /// Stamps and applies an event.
    pub fn record(&mut self, kind: EventKind) {
        let timestamp = match self.clock {
            Clock::Logical => self.events.len() as u64,
            Clock::System => SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_millis() as u64)
                .unwrap_or_default(),
        };
        self.apply(Event { timestamp, kind });
    }

    /// Deterministic state transition; the event is appended to the log.
    pub fn apply(&mut self, event: Event) {
        match &event.kind {
            EventKind::SlotSet { slot, value, .. } => {
                self.slots.insert(slot.clone(), value.clone());
            }
            EventKind::FramePushed { frame } => {
                self.next_frame_id = self.next_frame_id.max(frame.id + 1);
                self.stack.push(frame.clone());
            }
            EventKind::FrameMovedToTop { frame_id } => self.stack.move_to_top(*frame_id),
            EventKind::FrameStepChanged { frame_id, step_id } => {
                if let Some(frame) = self.stack.get_mut(*frame_id) {
                    frame.cursor = step_id.clone();
                    // arriving at a step (again) starts it fresh
                    frame.asked.remove(step_id);
                    frame.fulfilled.remove(step_id);
                }
            }
            EventKind::StepPrompted { frame_id, step_id } => {
                if let Some(frame) = self.stack.get_mut(*frame_id) {
                    frame.asked.insert(step_id.clone());
                }
            }
            EventKind::CollectFulfilled { frame_id, step_id } => {
                if let Some(frame) = self.stack.get_mut(*frame_id) {
                    frame.fulfilled.insert(step_id.clone());
                }
            }
            EventKind::FrameCompleted { frame_id } | EventKind::FrameCancelled { frame_id } => {
                self.stack.remove(*frame_id);
            }
            EventKind::UserMessage { .. }
            | EventKind::BotMessage { .. }
            | EventKind::CommandsGenerated { .. }
            | EventKind::ActionExecuted { .. }
            | EventKind::ValidationRejected { .. }
            | EventKind::Warning { .. } => {}
        }
        self.events.push(event);
    }

    pub fn latest_user_message(&self) -> Option<&str> {
        self.events.iter().rev().find_map(|e| match &e.kind {
            EventKind::UserMessage { text } => Some(text.as_str()),
            _ => None,
        })
    }

    /// Number of user messages so far.
    pub fn user_turns(&self) -> usize {
        self.events
            .iter()
            .filter(|e| matches!(e.kind, EventKind::UserMessage { .. }))
            .count()
    }

    /// Events recorded since (and excluding) the latest user message.
    pub fn events_since_user_message(&self) -> &[Event] {
        let start = self
            .events
            .iter()
            .rposition(|e| matches!(e.kind, EventKind::UserMessage { .. }))
            .map_or(0, |i| i + 1);
        &self.events[start..]
    }

    /// `USER:`/`BOT:` lines for the most recent `max_turns` messages.
    pub fn render_transcript(&self, max_turns: usize) -> String {
        let lines: Vec<String> = self
            .events
            .iter()
            .filter_map(|e| match &e.kind {
                EventKind::UserMessage { text } => Some(format!("USER: {text}")),
                EventKind::BotMessage { text, .. } => Some(format!("BOT: {text}")),
                _ => None,
            })
            .collect();
        let start = lines.len().saturating_sub(max_turns);
        lines[start..].join("\n")
    }

    pub fn snapshot(&self, recent_events: usize) -> TrackerSnapshot {
        let start = self.events.len().saturating_sub(recent_events);
        TrackerSnapshot {
            conversation_id: self.conversation_id.clone(),
            slots: self.slots.clone(),
            stack: self.stack.frames().to_vec(),
            events: self.events[start..].to_vec(),
            event_count: self.events.len(),
        }
    }
}

/// Functional form of [`Tracker::apply`], handy for folds.
pub fn apply_event(mut tracker: Tracker, event: Event) -> Tracker {
    tracker.apply(event);
    tracker
}

/// Structured view of a tracker for the service API.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackerSnapshot {
    pub conversation_id: String,
    pub slots: BTreeMap<String, Option<Value>>,
    /// Bottom to top.
    pub stack: Vec<Frame>,
    pub events: Vec<Event>,
    pub event_count: usize,
}

/// Verifies that frames are only ever pushed onto the top and only ever
/// removed from the top.
pub fn check_stack_discipline(events: &[Event]) -> Result<(), String> {
    let mut stack: Vec<FrameId> = Vec::new();
    for (i, event) in events.iter().enumerate() {
        match &event.kind {
            EventKind::FramePushed { frame } => {
                if stack.contains(&frame.id) {
                    return Err(format!("event {i}: frame {} pushed twice", frame.id));
                }
                stack.push(frame.id);
            }
            EventKind::FrameMovedToTop { frame_id } => {
                let Some(pos) = stack.iter().position(|f| f == frame_id) else {
                    return Err(format!("event {i}: moved unknown frame {frame_id}"));
                };
                stack.remove(pos);
                stack.push(*frame_id);
            }
            EventKind::FrameCompleted { frame_id } | EventKind::FrameCancelled { frame_id } => {
                if stack.last() != Some(frame_id) {
                    return Err(format!(
                        "event {i}: frame {frame_id} removed while not on top (stack {stack:?})"
                    ));
                }
                stack.pop();
            }
            _ => {}
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(id: FrameId, flow: &str) -> Frame {
        Frame {
            id,
            kind: FrameKind::UserFlow,
            flow_id: flow.into(),
            cursor: "0_collect_x".into(),
            asked: Default::default(),
            fulfilled: Default::default(),
            context: Default::default(),
            called_by: None,
        }
    }

    #[test]
    fn slot_set_updates_slot() {
        let mut t = Tracker::with_clock("c", Clock::Logical);
        t.record(EventKind::SlotSet {
            slot: "amount".into(),
            value: Some(Value::Float(55.0)),
            source: SlotSource::Command,
        });
        assert_eq!(t.slot("amount"), Some(&Value::Float(55.0)));
        assert_eq!(t.events().len(), 1);
    }

    #[test]
    fn push_then_complete_is_net_neutral() {
        let mut t = Tracker::with_clock("c", Clock::Logical);
        t.record(EventKind::FramePushed { frame: frame(1, "a") });
        let before = t.stack.clone();
        t.record(EventKind::FramePushed { frame: frame(2, "b") });
        t.record(EventKind::FrameCompleted { frame_id: 2 });
        assert_eq!(t.stack, before);
        assert_eq!(t.next_frame_id(), 3);
        assert!(check_stack_discipline(t.events()).is_ok());
    }

    #[test]
    fn step_change_clears_marks_of_target_step() {
        let mut t = Tracker::with_clock("c", Clock::Logical);
        t.record(EventKind::FramePushed { frame: frame(1, "a") });
        t.record(EventKind::StepPrompted { frame_id: 1, step_id: "s".into() });
        t.record(EventKind::CollectFulfilled { frame_id: 1, step_id: "s".into() });
        t.record(EventKind::FrameStepChanged { frame_id: 1, step_id: "s".into() });
        let f = t.stack.top().unwrap();
        assert!(f.asked.is_empty() && f.fulfilled.is_empty());
        assert_eq!(f.cursor, "s");
    }

    #[test]
    fn discipline_rejects_non_top_removal() {
        let mut t = Tracker::with_clock("c", Clock::Logical);
        t.record(EventKind::FramePushed { frame: frame(1, "a") });
        t.record(EventKind::FramePushed { frame: frame(2, "b") });
        t.record(EventKind::FrameCancelled { frame_id: 1 });
        assert!(check_stack_discipline(t.events()).is_err());
    }

    #[test]
    fn transcript_rendering_and_truncation() {
        let mut t = Tracker::with_clock("c", Clock::Logical);
        assert_eq!(t.render_transcript(10), "");
        for i in 0..3 {
            t.record(EventKind::UserMessage { text: format!("u{i}") });
            t.record(EventKind::Warning { message: "ignored".into() });
            t.record(EventKind::BotMessage { text: format!("b{i}"), template: None, original: None });
        }
        let full = t.render_transcript(usize::MAX);
        assert_eq!(full.lines().count(), 6);
        assert_eq!(full.lines().next(), Some("USER: u0"));
        let tail = t.render_transcript(3);
        assert!(full.ends_with(&tail));
        assert_eq!(tail, "BOT: b1\nUSER: u2\nBOT: b2");
    }

    #[test]
    fn replay_reproduces_state_and_serde_round_trips() {
        let mut t = Tracker::with_clock("c", Clock::Logical);
        t.record(EventKind::FramePushed { frame: frame(1, "a") });
        t.record(EventKind::SlotSet { slot: "x".into(), value: Some(Value::Text("y".into())), source: SlotSource::Flow });
        t.record(EventKind::FramePushed { frame: frame(2, "b") });
        t.record(EventKind::FrameMovedToTop { frame_id: 1 });
        let json = serde_json::to_string(t.events()).unwrap();
        let events: Vec<Event> = serde_json::from_str(&json).unwrap();
        let r = Tracker::replay("c", events);
        assert_eq!(r.slots, t.slots);
        assert_eq!(r.stack, t.stack);
        assert_eq!(r.stack.top().unwrap().id, 1);
    }
}
