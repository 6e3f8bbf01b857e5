//! Applies validated commands to a tracker. This is the only path from
//! language understanding to conversation state, and it can only push
//! frames, move a stacked user flow to the top, and set slots.

use std::collections::BTreeMap;

use serde_json::{json, Value as Json};

use crate::command::ValidatedCommand;
use crate::domain::Domain;
use crate::patterns::{self, context, instantiate_pattern};
use crate::state::{EventKind, Frame, FrameKind, SlotSource, Tracker};
use crate::value::Value;

pub fn process_commands(tracker: &mut Tracker, commands: &[ValidatedCommand], domain: &Domain) {
    if commands.is_empty() {
        push_pattern(tracker, domain, patterns::CANNOT_HANDLE, BTreeMap::new());
        return;
    }
    for command in commands {
        process_command(tracker, command, domain);
    }
}

fn process_command(tracker: &mut Tracker, command: &ValidatedCommand, domain: &Domain) {
    match command {
        ValidatedCommand::StartFlow(flow_id) => start_flow(tracker, flow_id, domain),
        ValidatedCommand::SetSlot { slot, value } => set_slot(tracker, slot, value.clone(), domain),
        ValidatedCommand::CancelFlow => match tracker.stack.top_user_flow() {
            Some(target) => {
                let ctx = BTreeMap::from([
                    (context::TARGET_FRAME.to_string(), json!(target.id)),
                    (context::FLOW_ID.to_string(), json!(target.flow_id)),
                    (context::FLOW_NAME.to_string(), json!(domain.display_name(&target.flow_id))),
                ]);
                push_pattern(tracker, domain, patterns::CANCEL, ctx);
            }
            None => {
                tracker.record(EventKind::Warning {
                    message: "CancelFlow with no active flow".into(),
                });
                push_pattern(tracker, domain, patterns::CANNOT_HANDLE, BTreeMap::new());
            }
        },
        ValidatedCommand::Clarify(options) => {
            let names: Vec<String> = options.iter().map(|o| domain.display_name(o)).collect();
            let ctx = BTreeMap::from([
                (context::OPTION_IDS.to_string(), json!(options)),
                (context::OPTIONS.to_string(), json!(join_options(&names))),
            ]);
            push_pattern(tracker, domain, patterns::CLARIFY, ctx);
        }
        ValidatedCommand::ChitChat => push_pattern(tracker, domain, patterns::CHITCHAT, BTreeMap::new()),
        ValidatedCommand::KnowledgeAnswer => {
            push_pattern(tracker, domain, patterns::SEARCH, BTreeMap::new())
        }
        ValidatedCommand::HumanHandoff => {
            push_pattern(tracker, domain, patterns::HUMAN_HANDOFF, BTreeMap::new())
        }
    }
}

/// "a", "a or b", "a, b or c".
pub fn join_options(names: &[String]) -> String {
    match names {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{} or {last}", init.join(", ")),
    }
}

fn start_flow(tracker: &mut Tracker, flow_id: &str, domain: &Domain) {
    if let Some(existing) = tracker.stack.user_flow(flow_id) {
        let id = existing.id;
        if tracker.stack.top().map(|f| f.id) != Some(id) {
            tracker.record(EventKind::FrameMovedToTop { frame_id: id });
        }
        return;
    }
    let Some(program) = domain.program(flow_id) else {
        tracker.record(EventKind::Warning {
            message: format!("cannot start unknown flow `{flow_id}`"),
        });
        return;
    };
    let frame = Frame {
        id: tracker.next_frame_id(),
        kind: FrameKind::UserFlow,
        flow_id: flow_id.to_string(),
        cursor: program.first().id.clone(),
        asked: Default::default(),
        fulfilled: Default::default(),
        context: Default::default(),
        called_by: None,
    };
    tracker.record(EventKind::FramePushed { frame });
}

fn set_slot(tracker: &mut Tracker, slot: &str, value: Option<Value>, domain: &Domain) {
    let set = |tracker: &mut Tracker, value: Option<Value>| {
        tracker.record(EventKind::SlotSet {
            slot: slot.to_string(),
            value,
            source: SlotSource::Command,
        })
    };
    if domain.awaited_slot(tracker).map(|(_, s)| s) == Some(slot) {
        set(tracker, value);
        return;
    }
    let current = tracker.slots.get(slot).cloned().flatten();
    if current == value {
        // restating a known value changes nothing
        return;
    }
    if current.is_some() {
        let owner = tracker.stack.iter_top_down().find(|f| {
            f.kind == FrameKind::UserFlow
                && domain
                    .program(&f.flow_id)
                    .is_some_and(|p| p.collect_steps_for(slot).any(|s| f.fulfilled.contains(&s.id)))
        });
        if let Some(owner) = owner {
            let ctx = BTreeMap::from([
                (context::SLOT.to_string(), json!(slot)),
                (context::PREVIOUS_VALUE.to_string(), to_json(current.as_ref())),
                (context::NEW_VALUE.to_string(), to_json(value.as_ref())),
                (context::TARGET_FRAME.to_string(), json!(owner.id)),
            ]);
            push_pattern(tracker, domain, patterns::CORRECTION, ctx);
            return;
        }
    }
    let collected_by_stack = tracker.stack.frames().iter().any(|f| {
        f.kind == FrameKind::UserFlow
            && domain
                .program(&f.flow_id)
                .is_some_and(|p| p.collect_steps_for(slot).next().is_some())
    });
    if !collected_by_stack {
        tracker.record(EventKind::Warning {
            message: format!("slot `{slot}` set outside of any active flow that collects it"),
        });
    }
    set(tracker, value);
}

fn to_json(value: Option<&Value>) -> Json {
    value.map_or(Json::Null, Value::to_json)
}

fn push_pattern(tracker: &mut Tracker, domain: &Domain, id: &str, ctx: BTreeMap<String, Json>) {
    let frame = instantiate_pattern(id, ctx, domain.catalog(), tracker.next_frame_id());
    tracker.record(EventKind::FramePushed { frame });
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn option_lists_read_naturally() {
        let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
        assert_eq!(join_options(&s(&["a"])), "a");
        assert_eq!(join_options(&s(&["a", "b"])), "a or b");
        assert_eq!(join_options(&s(&["a", "b", "c"])), "a, b or c");
    }
}
