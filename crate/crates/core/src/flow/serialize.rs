use serde_yaml::{Mapping, Value as Yaml};

use super::{Branch, Flow, FlowBook, NextSpec, SlotType, Step, StepKind, Target, END};
use crate::value::Value;

/// Renders a book back into the flow DSL. An empty book renders as an empty
/// document.
pub fn serialize_flowbook(book: &FlowBook) -> String {
    if book.is_empty() {
        return String::new();
    }
    let mut root = Mapping::new();
    if !book.flows.is_empty() {
        root.insert(s("flows"), flows(book.flows.values()));
    }
    if !book.slots.is_empty() {
        let mut slots = Mapping::new();
        for def in book.slots.values() {
            let mut m = Mapping::new();
            m.insert(s("type"), s(def.slot_type.as_str()));
            if def.slot_type == SlotType::Categorical || !def.allowed_values.is_empty() {
                m.insert(
                    s("allowed_values"),
                    Yaml::Sequence(def.allowed_values.iter().map(Value::to_yaml).collect()),
                );
            }
            if let Some(v) = &def.initial_value {
                m.insert(s("initial_value"), v.to_yaml());
            }
            slots.insert(s(&def.id), Yaml::Mapping(m));
        }
        root.insert(s("slots"), Yaml::Mapping(slots));
    }
    if !book.responses.is_empty() {
        let mut responses = Mapping::new();
        for template in book.responses.values() {
            let variants = template
                .variants
                .iter()
                .map(|t| {
                    let mut m = Mapping::new();
                    m.insert(s("text"), s(t));
                    Yaml::Mapping(m)
                })
                .collect();
            responses.insert(s(&template.id), Yaml::Sequence(variants));
        }
        root.insert(s("responses"), Yaml::Mapping(responses));
    }
    if !book.patterns.is_empty() {
        root.insert(s("patterns"), flows(book.patterns.values()));
    }
    serde_yaml::to_string(&Yaml::Mapping(root)).expect("in-memory YAML serialization")
}

fn s(text: &str) -> Yaml {
    Yaml::String(text.to_string())
}

fn flows<'a>(items: impl Iterator<Item = &'a Flow>) -> Yaml {
    let mut out = Mapping::new();
    for flow in items {
        let mut m = Mapping::new();
        m.insert(s("description"), s(&flow.description));
        if let Some(name) = &flow.name {
            m.insert(s("name"), s(name));
        }
        m.insert(s("steps"), steps(&flow.steps));
        out.insert(s(&flow.id), Yaml::Mapping(m));
    }
    Yaml::Mapping(out)
}

fn steps(list: &[Step]) -> Yaml {
    Yaml::Sequence(list.iter().map(step).collect())
}

fn target(t: &Target) -> Yaml {
    match t {
        Target::End => s(END),
        Target::Step(id) => s(id),
    }
}

fn branch(b: &Branch) -> Yaml {
    match b {
        Branch::Goto(t) => target(t),
        Branch::Inline(list) => steps(list),
    }
}

fn step(step: &Step) -> Yaml {
    let mut m = Mapping::new();
    if let Some(id) = &step.id {
        m.insert(s("id"), s(id));
    }
    match &step.kind {
        StepKind::Collect {
            slot,
            description,
            ask_before_filling,
        } => {
            m.insert(s("collect"), s(slot));
            if let Some(d) = description {
                m.insert(s("description"), s(d));
            }
            if *ask_before_filling {
                m.insert(s("ask_before_filling"), Yaml::Bool(true));
            }
        }
        StepKind::Action { name } => {
            m.insert(s("action"), s(name));
        }
        StepKind::SetSlots { assignments } => {
            let entries = assignments
                .iter()
                .map(|(slot, value)| {
                    let mut e = Mapping::new();
                    e.insert(s(slot), value.as_ref().map_or(Yaml::Null, Value::to_yaml));
                    Yaml::Mapping(e)
                })
                .collect();
            m.insert(s("set_slots"), Yaml::Sequence(entries));
        }
    }
    match &step.next {
        NextSpec::Linear => {}
        NextSpec::Goto(t) => {
            m.insert(s("next"), target(t));
        }
        NextSpec::Conditional { clauses, otherwise } => {
            let mut items: Vec<Yaml> = clauses
                .iter()
                .map(|(cond, b)| {
                    let mut c = Mapping::new();
                    c.insert(s("if"), s(&cond.to_string()));
                    c.insert(s("then"), branch(b));
                    Yaml::Mapping(c)
                })
                .collect();
            if let Some(b) = otherwise {
                let mut c = Mapping::new();
                c.insert(s("else"), branch(b));
                items.push(Yaml::Mapping(c));
            }
            m.insert(s("next"), Yaml::Sequence(items));
        }
    }
    Yaml::Mapping(m)
}
