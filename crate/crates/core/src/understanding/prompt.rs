use std::fmt::Write;

use super::{SlotSummary, UnderstandingContext};

const INSTRUCTIONS: &str = "\
You are the language understanding component of a task-oriented assistant. Read the \
conversation and translate the user's latest message into commands for the assistant. \
Write one command per line and nothing else. Available commands:
StartFlow(flow_id)               the user wants to do one of the tasks listed under Flows
CancelFlow                       the user no longer wants to continue the active task
SetSlot(slot_id, value)          the user provided a value for a slot (value without quotes or commas)
ChitChat                         small talk unrelated to any task
KnowledgeAnswer                  a question that should be answered from the knowledge base
HumanHandoff                     the user wants to talk to a human
Clarify(flow_id, flow_id, ...)   the message could mean any of several listed flows
Only use flow ids and slot ids that appear below. Use SetSlot(slot_id, null) to clear a value.";

fn write_slot(out: &mut String, slot: &SlotSummary) {
    let _ = write!(out, "{} ({})", slot.id, slot.slot_type);
    if let Some(d) = &slot.description {
        let _ = write!(out, ": {d}");
    }
    if !slot.allowed_values.is_empty() {
        let _ = write!(out, " [allowed values: {}]", slot.allowed_values.join(", "));
    }
}

/// Renders the prompt for a context: instructions, flow catalog, current
/// state, transcript and latest message, in that order. Empty sections
/// are left out. The same context always produces the same text.
pub fn render_prompt(ctx: &UnderstandingContext) -> String {
    let mut out = String::new();
    out.push_str("## Instructions\n");
    out.push_str(INSTRUCTIONS);
    out.push_str("\n\n## Flows\n");
    for flow in &ctx.candidate_flows {
        let _ = writeln!(out, "- {} ({}): {}", flow.id, flow.name, flow.description);
        for slot in &flow.slots {
            out.push_str("    slot ");
            write_slot(&mut out, slot);
            out.push('\n');
        }
    }

    let has_state = ctx.active_flow.is_some()
        || ctx.awaited_slot.is_some()
        || !ctx.slots.is_empty()
        || !ctx.stack.is_empty();
    if has_state {
        out.push_str("\n## Current state\n");
        if let Some(active) = &ctx.active_flow {
            let _ = writeln!(out, "Active flow: {} - {}", active.id, active.description);
        }
        if let Some(slot) = &ctx.awaited_slot {
            out.push_str("The assistant is asking for slot ");
            write_slot(&mut out, slot);
            out.push('\n');
        }
        if !ctx.slots.is_empty() {
            let filled: Vec<String> = ctx.slots.iter().map(|(k, v)| format!("{k} = {v}")).collect();
            let _ = writeln!(out, "Filled slots: {}", filled.join(", "));
        }
        if !ctx.stack.is_empty() {
            let _ = writeln!(out, "Stack (top first): {}", ctx.stack.join("; "));
        }
    }
    if !ctx.transcript.is_empty() {
        out.push_str("\n## Conversation\n");
        out.push_str(&ctx.transcript);
        out.push('\n');
    }
    if !ctx.latest_message.is_empty() {
        out.push_str("\n## Latest user message\n");
        out.push_str(&ctx.latest_message);
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::understanding::{ActiveFlow, FlowSummary};

    fn ctx() -> UnderstandingContext {
        UnderstandingContext {
            transcript: String::new(),
            latest_message: String::new(),
            turn_index: 0,
            active_flow: None,
            awaited_slot: None,
            slots: vec![],
            candidate_flows: vec![FlowSummary {
                id: "book_flight".into(),
                name: "book flight".into(),
                description: "Book a flight".into(),
                slots: vec![],
            }],
            stack: vec![],
        }
    }

    #[test]
    fn empty_context_has_only_instructions_and_catalog() {
        let p = render_prompt(&ctx());
        assert!(p.contains("## Instructions") && p.contains("## Flows"));
        assert!(p.contains("- book_flight (book flight): Book a flight"));
        assert!(!p.contains("## Current state"));
        assert!(!p.contains("## Conversation"));
        assert!(!p.contains("## Latest user message"));
    }

    #[test]
    fn awaited_slot_and_transcript_in_order() {
        let mut c = ctx();
        c.active_flow = Some(ActiveFlow { id: "book_flight".into(), description: "Book a flight".into() });
        c.awaited_slot = Some(SlotSummary {
            id: "economy_class".into(),
            slot_type: "bool".into(),
            description: None,
            allowed_values: vec![],
        });
        c.transcript = "USER: I want to book a flight\nBOT: Are you traveling in economy class?".into();
        c.latest_message = "sadly".into();
        let p = render_prompt(&c);
        assert!(p.contains("economy_class (bool)"));
        let order = ["## Instructions", "## Flows", "## Current state", "## Conversation", "## Latest user message"];
        let positions: Vec<usize> = order.iter().map(|h| p.find(h).unwrap()).collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(render_prompt(&c), p);
    }
}
