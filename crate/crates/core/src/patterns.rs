//! Built-in repair patterns.
//!
//! Patterns are ordinary flows written in the flow DSL. The defaults below
//! can be replaced per id through the `patterns` section of a flow book;
//! when a pattern is triggered is decided by the command processor and the
//! executor, never by the pattern flow itself.

use std::collections::{BTreeMap, HashMap};
use std::sync::OnceLock;

use serde_json::Value as Json;

use crate::flow::{parse_flowbook, Flow, FlowProgram, ResponseTemplate, SourceDocument};
use crate::state::{Frame, FrameId, FrameKind};

pub const CORRECTION: &str = "pattern_correction";
pub const CANCEL: &str = "pattern_cancel";
pub const CLARIFY: &str = "pattern_clarify";
pub const CONTINUE_INTERRUPTED: &str = "pattern_continue_interrupted";
pub const CHITCHAT: &str = "pattern_chitchat";
pub const SEARCH: &str = "pattern_search";
pub const HUMAN_HANDOFF: &str = "pattern_human_handoff";
pub const CANNOT_HANDLE: &str = "pattern_cannot_handle";
pub const INTERNAL_ERROR: &str = "pattern_internal_error";
pub const COMPLETED: &str = "pattern_completed";

pub const BUILTIN_PATTERNS: &[&str] = &[
    CORRECTION,
    CANCEL,
    CLARIFY,
    CONTINUE_INTERRUPTED,
    CHITCHAT,
    SEARCH,
    HUMAN_HANDOFF,
    CANNOT_HANDLE,
    INTERNAL_ERROR,
    COMPLETED,
];

/// Actions implemented by the executor itself rather than the registry.
pub mod actions {
    pub const SET_CORRECTED_SLOTS: &str = "set_corrected_slots";
    pub const ACKNOWLEDGE_CORRECTION: &str = "acknowledge_correction";
    pub const CANCEL_TARGET_FRAME: &str = "cancel_target_frame";
    pub const PRESENT_CLARIFICATION_OPTIONS: &str = "present_clarification_options";
    pub const LISTEN: &str = "action_listen";
    pub const GENERATE_CHITCHAT_RESPONSE: &str = "generate_chitchat_response";
    pub const KNOWLEDGE_ANSWER: &str = "knowledge_answer";
    pub const NOTIFY_HANDOFF: &str = "notify_handoff";
}

pub const RESERVED_ACTIONS: &[&str] = &[
    actions::SET_CORRECTED_SLOTS,
    actions::ACKNOWLEDGE_CORRECTION,
    actions::CANCEL_TARGET_FRAME,
    actions::PRESENT_CLARIFICATION_OPTIONS,
    actions::LISTEN,
    actions::GENERATE_CHITCHAT_RESPONSE,
    actions::KNOWLEDGE_ANSWER,
    actions::NOTIFY_HANDOFF,
];

/// Context keys attached to pattern frames.
pub mod context {
    pub const SLOT: &str = "slot";
    pub const PREVIOUS_VALUE: &str = "previous_value";
    pub const NEW_VALUE: &str = "new_value";
    pub const TARGET_FRAME: &str = "target_frame";
    pub const FLOW_ID: &str = "flow_id";
    pub const FLOW_NAME: &str = "flow_name";
    pub const OPTIONS: &str = "options";
    pub const OPTION_IDS: &str = "option_ids";
    pub const VALUE: &str = "value";
    pub const REASON: &str = "reason";
}

const DEFAULTS: &str = r#"
patterns:
  pattern_correction:
    description: Apply a correction to information the user provided earlier
    steps:
      - action: set_corrected_slots
      - action: acknowledge_correction
  pattern_cancel:
    description: Cancel the flow the user no longer wants to continue
    steps:
      - action: utter_flow_cancelled
      - action: cancel_target_frame
  pattern_clarify:
    description: Ask the user which of several flows they meant
    steps:
      - action: present_clarification_options
      - action: action_listen
  pattern_continue_interrupted:
    description: Announce that an interrupted flow is being resumed
    steps:
      - action: utter_flow_continue_interrupted
  pattern_chitchat:
    description: Respond to small talk
    steps:
      - action: generate_chitchat_response
  pattern_search:
    description: Answer a question from the knowledge base
    steps:
      - action: knowledge_answer
  pattern_human_handoff:
    description: Hand the conversation over to a human agent
    steps:
      - action: utter_human_handoff
      - action: notify_handoff
  pattern_cannot_handle:
    description: Respond to messages that could not be understood
    steps:
      - action: utter_cannot_handle
  pattern_internal_error:
    description: Respond when something went wrong internally
    steps:
      - action: utter_internal_error
  pattern_completed:
    description: Offer further help once a task has been completed
    steps:
      - action: utter_can_do_something_else
responses:
  utter_corrected_previous_input:
    - text: Ok, I have updated {context.slot} to {context.new_value}.
  utter_flow_cancelled:
    - text: Okay, I have cancelled {context.flow_name}.
  utter_clarify_options:
    - text: Would you like to {context.options}?
  utter_flow_continue_interrupted:
    - text: Let's continue with {context.flow_name}.
  utter_free_chitchat_response:
    - text: Sorry, I'm not able to answer that right now.
  utter_no_knowledge_answer:
    - text: Sorry, I don't have an answer to that.
  utter_human_handoff:
    - text: I'll connect you with a human agent now.
  utter_cannot_handle:
    - text: I'm sorry, I can't help you with that.
  utter_internal_error:
    - text: Sorry, I'm having trouble with that right now. Please try again in a few minutes.
  utter_can_do_something_else:
    - text: Is there anything else I can help you with?
  utter_invalid_slot_value:
    - text: Sorry, "{context.value}" is not a valid value for {context.slot}.
"#;

struct Defaults {
    flows: BTreeMap<String, Flow>,
    responses: BTreeMap<String, ResponseTemplate>,
}

fn defaults() -> &'static Defaults {
    static DEFAULTS_CELL: OnceLock<Defaults> = OnceLock::new();
    DEFAULTS_CELL.get_or_init(|| {
        let book = parse_flowbook(&[SourceDocument::new("<builtin patterns>", DEFAULTS)])
            .expect("built-in patterns parse");
        Defaults {
            flows: book.patterns,
            responses: book.responses,
        }
    })
}

/// Responses used by the default patterns. A flow book may override any of
/// them by declaring a response with the same id.
pub fn default_responses() -> &'static BTreeMap<String, ResponseTemplate> {
    &defaults().responses
}

pub fn default_flows() -> &'static BTreeMap<String, Flow> {
    &defaults().flows
}

#[derive(Debug, Clone)]
pub struct PatternCatalog {
    flows: BTreeMap<String, Flow>,
    programs: HashMap<String, FlowProgram>,
}

impl PatternCatalog {
    /// Built-in defaults with `overrides` replacing them by id.
    pub fn new(overrides: &BTreeMap<String, Flow>) -> Result<Self, Vec<String>> {
        let mut flows = default_flows().clone();
        for (id, flow) in overrides {
            if !BUILTIN_PATTERNS.contains(&id.as_str()) {
                return Err(vec![format!("unknown pattern: {id}")]);
            }
            flows.insert(id.clone(), flow.clone());
        }
        let mut programs = HashMap::new();
        let mut errors = Vec::new();
        for (id, flow) in &flows {
            match FlowProgram::compile(flow) {
                Ok(p) => {
                    programs.insert(id.clone(), p);
                }
                Err(e) => errors.extend(e.into_iter().map(|m| format!("{id}: {m}"))),
            }
        }
        if errors.is_empty() {
            Ok(Self { flows, programs })
        } else {
            Err(errors)
        }
    }

    pub fn flow(&self, id: &str) -> Option<&Flow> {
        self.flows.get(id)
    }

    pub fn program(&self, id: &str) -> Option<&FlowProgram> {
        self.programs.get(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.flows.keys().map(String::as_str)
    }
}

/// Builds a pattern frame. Unknown ids produce an internal-error frame that
/// records the requested id as its reason.
pub fn instantiate_pattern(
    id: &str,
    context: BTreeMap<String, Json>,
    catalog: &PatternCatalog,
    frame_id: FrameId,
) -> Frame {
    let (pattern, context) = match catalog.program(id) {
        Some(_) => (id.to_string(), context),
        None => {
            let mut ctx = BTreeMap::new();
            ctx.insert(context::REASON.to_string(), Json::String(format!("unknown pattern: {id}")));
            (INTERNAL_ERROR.to_string(), ctx)
        }
    };
    let program = catalog
        .program(&pattern)
        .expect("internal error pattern always exists");
    Frame {
        id: frame_id,
        kind: FrameKind::Pattern,
        flow_id: pattern,
        cursor: program.first().id.clone(),
        asked: Default::default(),
        fulfilled: Default::default(),
        context,
        called_by: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{validate_flowbook, FlowBook, StepKind};

    #[test]
    fn defaults_cover_every_builtin() {
        let catalog = PatternCatalog::new(&BTreeMap::new()).unwrap();
        for id in BUILTIN_PATTERNS {
            assert!(catalog.program(id).is_some(), "{id}");
        }
        let book = FlowBook {
            patterns: default_flows().clone(),
            responses: default_responses().clone(),
            ..Default::default()
        };
        let report = validate_flowbook(&book);
        assert!(report.is_valid(), "{:?}", report.errors);
    }

    #[test]
    fn override_replaces_default() {
        let book = FlowBook::from_yaml_str(
            "patterns:\n  pattern_cannot_handle:\n    description: custom\n    steps:\n      - action: utter_custom\n",
        )
        .unwrap();
        let catalog = PatternCatalog::new(&book.patterns).unwrap();
        let step = catalog.program(CANNOT_HANDLE).unwrap().first();
        assert_eq!(step.kind, StepKind::Action { name: "utter_custom".into() });
        // others keep their defaults
        assert!(catalog.program(CORRECTION).is_some());
    }

    #[test]
    fn unknown_id_becomes_internal_error() {
        let catalog = PatternCatalog::new(&BTreeMap::new()).unwrap();
        let frame = instantiate_pattern("pattern_bogus", BTreeMap::new(), &catalog, 7);
        assert_eq!(frame.flow_id, INTERNAL_ERROR);
        assert_eq!(frame.id, 7);
        assert_eq!(frame.kind, FrameKind::Pattern);
    }
}
