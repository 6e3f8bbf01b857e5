//! Flattened, executable form of a flow.
//!
//! Inline branch steps are hoisted into one list and every step gets an id:
//! the explicit one, `<index>_<kind>_<name>` for top-level steps, or
//! `<parent-id>_branch<clause>_<position>` for inline steps. Linear `next`
//! specs are resolved to explicit targets.

use std::collections::HashMap;

use super::{Branch, Condition, Flow, NextSpec, Step, StepKind, Target, END};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StepTarget {
    Step(String),
    End,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ResolvedNext {
    Goto(StepTarget),
    Conditional {
        clauses: Vec<(Condition, StepTarget)>,
        otherwise: Option<StepTarget>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProgramStep {
    pub id: String,
    pub kind: StepKind,
    pub next: ResolvedNext,
}

#[derive(Debug, Clone)]
pub struct FlowProgram {
    pub flow_id: String,
    pub steps: Vec<ProgramStep>,
    index: HashMap<String, usize>,
}

impl FlowProgram {
    /// Compiles a flow, returning every structural problem found.
    pub fn compile(flow: &Flow) -> Result<FlowProgram, Vec<String>> {
        let mut steps = Vec::new();
        let mut errors = Vec::new();
        if flow.steps.is_empty() {
            errors.push("flow has no steps".to_string());
        }
        flatten(&flow.steps, None, &mut steps, &mut errors);

        let mut index = HashMap::new();
        for (i, step) in steps.iter().enumerate() {
            if step.id == END {
                errors.push(format!("`{END}` is reserved and cannot be a step id"));
            }
            if index.insert(step.id.clone(), i).is_some() {
                errors.push(format!("duplicate step id `{}`", step.id));
            }
        }
        for step in &steps {
            for target in step.next.targets() {
                if let StepTarget::Step(id) = target {
                    if !index.contains_key(id) {
                        errors.push(format!("dangling jump target `{id}` in step `{}`", step.id));
                    }
                }
            }
        }
        if errors.is_empty() {
            Ok(FlowProgram {
                flow_id: flow.id.clone(),
                steps,
                index,
            })
        } else {
            Err(errors)
        }
    }

    pub fn first(&self) -> &ProgramStep {
        &self.steps[0]
    }

    pub fn step(&self, id: &str) -> Option<&ProgramStep> {
        self.index.get(id).map(|&i| &self.steps[i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn collect_steps_for<'a>(&'a self, slot: &'a str) -> impl Iterator<Item = &'a ProgramStep> {
        self.steps
            .iter()
            .filter(move |s| matches!(&s.kind, StepKind::Collect { slot: x, .. } if x == slot))
    }
}

impl ResolvedNext {
    pub fn targets(&self) -> Vec<&StepTarget> {
        match self {
            ResolvedNext::Goto(t) => vec![t],
            ResolvedNext::Conditional { clauses, otherwise } => clauses
                .iter()
                .map(|(_, t)| t)
                .chain(otherwise.iter())
                .collect(),
        }
    }
}

fn generated_id(position: usize, step: &Step) -> String {
    match &step.kind {
        StepKind::Collect { slot, .. } => format!("{position}_collect_{slot}"),
        StepKind::Action { name } => format!("{position}_action_{}", name.replace(':', "_")),
        StepKind::SetSlots { .. } => format!("{position}_set_slots"),
    }
}

fn resolve(t: &Target) -> StepTarget {
    match t {
        Target::End => StepTarget::End,
        Target::Step(id) => StepTarget::Step(id.clone()),
    }
}

/// `parent` is `(parent step id, clause index)` for inline branch lists.
fn flatten(
    list: &[Step],
    parent: Option<(&str, usize)>,
    out: &mut Vec<ProgramStep>,
    errors: &mut Vec<String>,
) {
    let ids: Vec<String> = list
        .iter()
        .enumerate()
        .map(|(j, step)| match (&step.id, parent) {
            (Some(id), _) => id.clone(),
            (None, None) => generated_id(j, step),
            (None, Some((pid, clause))) => format!("{pid}_branch{clause}_{j}"),
        })
        .collect();

    for (j, step) in list.iter().enumerate() {
        let slot = out.len();
        out.push(ProgramStep {
            id: ids[j].clone(),
            kind: step.kind.clone(),
            next: ResolvedNext::Goto(StepTarget::End),
        });
        let next = match &step.next {
            NextSpec::Linear => match ids.get(j + 1) {
                Some(id) => ResolvedNext::Goto(StepTarget::Step(id.clone())),
                None if parent.is_none() => ResolvedNext::Goto(StepTarget::End),
                None => {
                    errors.push(format!(
                        "inline branch step `{}` is the last of its branch and needs an explicit `next`",
                        ids[j]
                    ));
                    ResolvedNext::Goto(StepTarget::End)
                }
            },
            NextSpec::Goto(t) => ResolvedNext::Goto(resolve(t)),
            NextSpec::Conditional { clauses, otherwise } => {
                let mut branch_target = |clause: usize, branch: &Branch| match branch {
                    Branch::Goto(t) => resolve(t),
                    Branch::Inline(inner) => {
                        if inner.is_empty() {
                            errors.push(format!("empty inline branch in step `{}`", ids[j]));
                            return StepTarget::End;
                        }
                        let first = out.len();
                        flatten(inner, Some((&ids[j], clause)), out, errors);
                        StepTarget::Step(out[first].id.clone())
                    }
                };
                let resolved: Vec<_> = clauses
                    .iter()
                    .enumerate()
                    .map(|(c, (cond, b))| (cond.clone(), branch_target(c, b)))
                    .collect();
                let otherwise = otherwise
                    .as_ref()
                    .map(|b| branch_target(clauses.len(), b));
                ResolvedNext::Conditional {
                    clauses: resolved,
                    otherwise,
                }
            }
        };
        out[slot].next = next;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::parse_flows;

    #[test]
    fn generated_ids_and_linear_resolution() {
        let flows = parse_flows(
            "f:\n  description: d\n  steps:\n    - collect: a\n    - id: b\n      action: x\n      next:\n        - if: slots.a\n          then:\n            - action: y\n              next: END\n        - else: b
",
        )
        .unwrap();
        let p = FlowProgram::compile(&flows["f"]).unwrap();
        let ids: Vec<_> = p.steps.iter().map(|s| s.id.as_str()).collect();
        assert_eq!(ids, ["0_collect_a", "b", "b_branch0_0"]);
        assert_eq!(p.first().next, ResolvedNext::Goto(StepTarget::Step("b".into())));
        let ResolvedNext::Conditional { clauses, otherwise } = &p.step("b").unwrap().next else {
            panic!("conditional expected");
        };
        assert_eq!(clauses[0].1, StepTarget::Step("b_branch0_0".into()));
        assert_eq!(otherwise, &Some(StepTarget::Step("b".into())));
    }

    #[test]
    fn inline_branch_needs_explicit_next() {
        let flows = parse_flows(
            "f:\n  description: d\n  steps:\n    - action: x\n      next:\n        - if: slots.a\n          then:\n            - action: y\n        - else: END\n",
        )
        .unwrap();
        let errs = FlowProgram::compile(&flows["f"]).unwrap_err();
        assert!(errs[0].contains("needs an explicit `next`"), "{errs:?}");
    }

    #[test]
    fn dangling_target() {
        let flows =
            parse_flows("f:\n  description: d\n  steps:\n    - action: x\n      next: nowhere\n").unwrap();
        let errs = FlowProgram::compile(&flows["f"]).unwrap_err();
        assert!(errs[0].contains("dangling jump target `nowhere`"));
    }
}
