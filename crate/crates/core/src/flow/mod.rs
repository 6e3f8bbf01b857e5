//! The flow DSL: flows, slot declarations and response templates.
//!
//! A [`FlowBook`] is parsed from one or more YAML documents with the top
//! level keys `flows`, `slots`, `responses` and `patterns`. See
//! `docs/flow-dsl.md` in the repository for the full grammar.

mod condition;
mod parse;
mod program;
mod serialize;
mod validate;

use std::collections::BTreeMap;

pub use condition::{CompareOp, Condition, Evaluation, SlotLookup};
pub(crate) use parse::literal_from_yaml;
pub use parse::{parse_flowbook, parse_flows, ParseError, SourceDocument};
pub use program::{FlowProgram, ProgramStep, ResolvedNext, StepTarget};
pub use serialize::serialize_flowbook;
pub use validate::{validate_flowbook, Finding, ValidationReport};

use crate::value::Value;

/// Jump target keyword that completes the current flow.
pub const END: &str = "END";

/// Reserved action prefix for calling another flow.
pub const START_FLOW_PREFIX: &str = "start_flow:";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FlowBook {
    pub flows: BTreeMap<String, Flow>,
    pub slots: BTreeMap<String, SlotDefinition>,
    pub responses: BTreeMap<String, ResponseTemplate>,
    /// Developer overrides of built-in repair patterns, keyed by pattern id.
    pub patterns: BTreeMap<String, Flow>,
}

impl FlowBook {
    pub fn is_empty(&self) -> bool {
        self.flows.is_empty()
            && self.slots.is_empty()
            && self.responses.is_empty()
            && self.patterns.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Flow {
    pub id: String,
    pub description: String,
    pub name: Option<String>,
    pub steps: Vec<Step>,
}

impl Flow {
    /// Human readable name: the explicit `name`, or the id with
    /// underscores replaced by spaces.
    pub fn display_name(&self) -> String {
        self.name
            .clone()
            .unwrap_or_else(|| self.id.replace('_', " "))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub id: Option<String>,
    pub kind: StepKind,
    pub next: NextSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StepKind {
    Collect {
        slot: String,
        description: Option<String>,
        ask_before_filling: bool,
    },
    Action {
        name: String,
    },
    SetSlots {
        assignments: Vec<(String, Option<Value>)>,
    },
}

impl StepKind {
    pub fn keyword(&self) -> &'static str {
        match self {
            StepKind::Collect { .. } => "collect",
            StepKind::Action { .. } => "action",
            StepKind::SetSlots { .. } => "set_slots",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum NextSpec {
    /// Continue with the following step in the enclosing list.
    #[default]
    Linear,
    Goto(Target),
    Conditional {
        /// Non-empty, evaluated top to bottom; the first true clause wins.
        clauses: Vec<(Condition, Branch)>,
        otherwise: Option<Branch>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Target {
    Step(String),
    End,
}

impl Target {
    pub fn from_id(id: &str) -> Target {
        if id == END {
            Target::End
        } else {
            Target::Step(id.to_string())
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Branch {
    Goto(Target),
    /// Inline steps; the last one must carry an explicit `next`.
    Inline(Vec<Step>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotType {
    Text,
    Float,
    Bool,
    Categorical,
}

impl SlotType {
    pub fn as_str(self) -> &'static str {
        match self {
            SlotType::Text => "text",
            SlotType::Float => "float",
            SlotType::Bool => "bool",
            SlotType::Categorical => "categorical",
        }
    }

    pub fn parse(s: &str) -> Option<SlotType> {
        match s {
            "text" => Some(SlotType::Text),
            "float" => Some(SlotType::Float),
            "bool" => Some(SlotType::Bool),
            "categorical" => Some(SlotType::Categorical),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlotDefinition {
    pub id: String,
    pub slot_type: SlotType,
    pub allowed_values: Vec<Value>,
    pub initial_value: Option<Value>,
}

impl SlotDefinition {
    /// Whether a literal is an acceptable value for this slot.
    pub fn accepts(&self, value: &Value) -> bool {
        match (self.slot_type, value) {
            (SlotType::Text, Value::Text(_)) => true,
            (SlotType::Float, Value::Float(_)) => true,
            (SlotType::Bool, Value::Bool(_)) => true,
            (SlotType::Categorical, v) => self.allowed_values.contains(v),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResponseTemplate {
    pub id: String,
    pub variants: Vec<String>,
}

/// Placeholder found in a response template: `{slot}`, `{slot:.2}` or
/// `{context.key}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Placeholder {
    pub start: usize,
    pub end: usize,
    pub name: String,
    pub context: bool,
    pub decimals: Option<usize>,
}

/// Scans a template variant for placeholders. Braces that do not enclose a
/// well-formed placeholder are treated as literal text.
pub fn placeholders(text: &str) -> Vec<Placeholder> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] != b'{' {
            i += 1;
            continue;
        }
        let Some(close) = text[i + 1..].find('}') else {
            break;
        };
        let inner = &text[i + 1..i + 1 + close];
        if let Some(p) = parse_placeholder(inner) {
            out.push(Placeholder {
                start: i,
                end: i + close + 2,
                ..p
            });
            i += close + 2;
        } else {
            i += 1;
        }
    }
    out
}

fn parse_placeholder(inner: &str) -> Option<Placeholder> {
    let (name, format) = match inner.split_once(':') {
        Some((n, f)) => (n, Some(f)),
        None => (inner, None),
    };
    let (context, name) = match name.strip_prefix("context.") {
        Some(rest) => (true, rest),
        None => (false, name),
    };
    if !is_identifier(name) {
        return None;
    }
    let decimals = match format {
        None => None,
        Some(f) => Some(f.strip_prefix('.')?.parse::<usize>().ok()?),
    };
    Some(Placeholder {
        start: 0,
        end: 0,
        name: name.to_string(),
        context,
        decimals,
    })
}

/// Identifiers for flows, slots, steps and templates: `[A-Za-z_][A-Za-z0-9_]*`.
pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn placeholder_scan() {
        let ps = placeholders("Please confirm: you want to transfer ${amount} to {recipient}?");
        let names: Vec<_> = ps.iter().map(|p| p.name.as_str()).collect();
        assert_eq!(names, ["amount", "recipient"]);
        let ps = placeholders("{amount:.2} and {context.flow_name} but {not a slot} {");
        assert_eq!(ps.len(), 2);
        assert_eq!(ps[0].decimals, Some(2));
        assert!(ps[1].context);
    }

    #[test]
    fn identifiers() {
        assert!(is_identifier("transfer_money"));
        assert!(is_identifier("_x1"));
        assert!(!is_identifier("1x"));
        assert!(!is_identifier("a-b"));
        assert!(!is_identifier(""));
    }
}
