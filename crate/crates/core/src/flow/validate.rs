use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use serde::Serialize;

use super::{
    placeholders, Condition, Flow, FlowBook, FlowProgram, ResolvedNext, SlotType, StepKind,
    StepTarget, START_FLOW_PREFIX,
};
use crate::patterns;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Finding {
    pub location: String,
    pub message: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub errors: Vec<Finding>,
    pub warnings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.errors.is_empty()
    }

    fn error(&mut self, location: impl Into<String>, message: impl Into<String>) {
        self.errors.push(Finding {
            location: location.into(),
            message: message.into(),
        });
    }

    fn warn(&mut self, location: impl Into<String>, message: impl Into<String>) {
        self.warnings.push(Finding {
            location: location.into(),
            message: message.into(),
        });
    }
}

/// Checks every cross-reference in the book. Built-in pattern responses and
/// reserved pattern actions count as defined.
pub fn validate_flowbook(book: &FlowBook) -> ValidationReport {
    let mut report = ValidationReport::default();
    let builtin_responses = patterns::default_responses();
    let has_response =
        |id: &str| book.responses.contains_key(id) || builtin_responses.contains_key(id);

    for def in book.slots.values() {
        let loc = format!("slot `{}`", def.id);
        match def.slot_type {
            SlotType::Categorical if def.allowed_values.is_empty() => {
                report.error(&loc, "categorical slot needs a non-empty `allowed_values` list")
            }
            SlotType::Categorical => {}
            _ if !def.allowed_values.is_empty() => report.error(
                &loc,
                "`allowed_values` is only allowed on categorical slots",
            ),
            _ => {}
        }
        if let Some(v) = &def.initial_value {
            if !def.accepts(v) {
                report.error(&loc, format!("initial value `{v}` is not a valid {}", def.slot_type.as_str()));
            }
        }
    }

    for template in book.responses.values() {
        let loc = format!("response `{}`", template.id);
        if template.variants.is_empty() {
            report.error(&loc, "response needs at least one variant");
        }
        for variant in &template.variants {
            for p in placeholders(variant) {
                if !p.context && !book.slots.contains_key(&p.name) {
                    report.error(&loc, format!("undefined slot: {}", p.name));
                }
            }
        }
    }

    for id in book.patterns.keys() {
        if !patterns::BUILTIN_PATTERNS.contains(&id.as_str()) {
            report.error(format!("pattern `{id}`"), format!("unknown pattern: {id}"));
        }
    }

    let flows = book
        .flows
        .values()
        .map(|f| (f, false))
        .chain(book.patterns.values().map(|f| (f, true)));
    for (flow, is_pattern) in flows {
        check_flow(book, flow, is_pattern, &has_response, &mut report);
    }
    report
}

fn check_flow(
    book: &FlowBook,
    flow: &Flow,
    is_pattern: bool,
    has_response: &dyn Fn(&str) -> bool,
    report: &mut ValidationReport,
) {
    let floc = if is_pattern {
        format!("pattern `{}`", flow.id)
    } else {
        format!("flow `{}`", flow.id)
    };
    if flow.description.trim().is_empty() && !is_pattern {
        report.error(&floc, "flow needs a non-empty description");
    }
    let program = match FlowProgram::compile(flow) {
        Ok(p) => p,
        Err(errors) => {
            for e in errors {
                report.error(&floc, e);
            }
            return;
        }
    };

    for step in &program.steps {
        let loc = format!("{floc}, step `{}`", step.id);
        match &step.kind {
            StepKind::Collect {
                slot, description, ..
            } => {
                if !book.slots.contains_key(slot) {
                    report.error(&loc, format!("undefined slot: {slot}"));
                }
                let ask = format!("utter_ask_{slot}");
                if !has_response(&ask) {
                    report.error(&loc, format!("missing response: {ask}"));
                }
                if description.is_none() && !is_pattern {
                    report.warn(&loc, "collect step has no description");
                }
            }
            StepKind::Action { name } => {
                if let Some(target) = name.strip_prefix(START_FLOW_PREFIX) {
                    if !book.flows.contains_key(target) {
                        report.error(&loc, format!("undefined flow: {target}"));
                    }
                } else if name.starts_with("utter_")
                    && !patterns::RESERVED_ACTIONS.contains(&name.as_str())
                    && !has_response(name)
                {
                    report.error(&loc, format!("undefined response: {name}"));
                }
            }
            StepKind::SetSlots { assignments } => {
                for (slot, value) in assignments {
                    match (book.slots.get(slot), value) {
                        (None, _) => report.error(&loc, format!("undefined slot: {slot}")),
                        (Some(def), Some(v)) if !def.accepts(v) => report.error(
                            &loc,
                            format!("value `{v}` is not valid for {} slot `{slot}`", def.slot_type.as_str()),
                        ),
                        _ => {}
                    }
                }
            }
        }
        if let ResolvedNext::Conditional { clauses, .. } = &step.next {
            for (cond, _) in clauses {
                check_condition(book, cond, &loc, report);
            }
        }
    }

    for unreachable in unreachable_steps(&program) {
        report.warn(format!("{floc}, step `{unreachable}`"), "step is unreachable");
    }
}

fn check_condition(book: &FlowBook, cond: &Condition, loc: &str, report: &mut ValidationReport) {
    for slot in cond.slot_refs() {
        if !book.slots.contains_key(slot) {
            report.error(loc, format!("undefined slot: {slot}"));
        }
    }
    let mut stack = vec![cond];
    while let Some(c) = stack.pop() {
        match c {
            Condition::Compare {
                slot,
                value: Some(v),
                ..
            } => {
                if let Some(def) = book.slots.get(slot) {
                    let compatible = match def.slot_type {
                        SlotType::Categorical => true,
                        _ => def.accepts(v),
                    };
                    if !compatible {
                        report.warn(
                            loc,
                            format!(
                                "comparing {} slot `{slot}` with a {} literal is always false",
                                def.slot_type.as_str(),
                                v.type_name()
                            ),
                        );
                    }
                }
            }
            Condition::Not(inner) => stack.push(inner),
            Condition::And(a, b) | Condition::Or(a, b) => {
                stack.push(a);
                stack.push(b);
            }
            _ => {}
        }
    }
}

fn unreachable_steps(program: &FlowProgram) -> Vec<String> {
    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::from([program.first().id.clone()]);
    while let Some(id) = queue.pop_front() {
        if !seen.insert(id.clone()) {
            continue;
        }
        let Some(step) = program.step(&id) else { continue };
        for t in step.next.targets() {
            if let StepTarget::Step(next) = t {
                queue.push_back(next.clone());
            }
        }
    }
    program
        .steps
        .iter()
        .filter(|s| !seen.contains(&s.id))
        .map(|s| s.id.clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(src: &str) -> ValidationReport {
        validate_flowbook(&FlowBook::from_yaml_str(src).unwrap())
    }

    #[test]
    fn undefined_slot() {
        let r = report(
            "flows:\n  t:\n    description: d\n    steps:\n      - collect: recipient\nresponses:\n  utter_ask_recipient:\n    - text: who?\n",
        );
        assert_eq!(r.errors.len(), 1);
        assert_eq!(r.errors[0].message, "undefined slot: recipient");
    }

    #[test]
    fn dangling_jump() {
        let r = report("flows:\n  t:\n    description: d\n    steps:\n      - action: x\n        next: nonexistent\n");
        assert!(r.errors[0].message.starts_with("dangling jump target"));
    }

    #[test]
    fn missing_ask_response_and_description_warning() {
        let r = report("flows:\n  t:\n    description: d\n    steps:\n      - collect: a\nslots:\n  a:\n    type: text\n");
        assert_eq!(r.errors[0].message, "missing response: utter_ask_a");
        assert_eq!(r.warnings[0].message, "collect step has no description");
    }

    #[test]
    fn unreachable_step_warning() {
        let r = report("flows:\n  t:\n    description: d\n    steps:\n      - action: x\n        next: END\n      - action: y\n");
        assert!(r.is_valid());
        assert_eq!(r.warnings.len(), 1);
        assert!(r.warnings[0].location.contains("1_action_y"));
    }

    #[test]
    fn slot_declaration_rules() {
        let r = report("slots:\n  c:\n    type: categorical\n  t:\n    type: text\n    allowed_values: [a]\n  f:\n    type: float\n    initial_value: nope\n");
        assert_eq!(r.errors.len(), 3, "{r:?}");
    }

    #[test]
    fn response_placeholders_and_empty_description() {
        let r = report("flows:\n  t:\n    description: ''\n    steps:\n      - action: utter_x\nresponses:\n  utter_x:\n    - text: hi {who} {context.flow_name}\n");
        let messages: Vec<_> = r.errors.iter().map(|f| f.message.as_str()).collect();
        assert!(messages.contains(&"undefined slot: who"));
        assert!(messages.contains(&"flow needs a non-empty description"));
    }

    #[test]
    fn unknown_pattern_and_start_flow_target() {
        let r = report("patterns:\n  pattern_nope:\n    description: d\n    steps:\n      - action: start_flow:missing\n");
        let messages: Vec<_> = r.errors.iter().map(|f| f.message.as_str()).collect();
        assert!(messages.contains(&"unknown pattern: pattern_nope"));
        assert!(messages.contains(&"undefined flow: missing"));
    }
}
