//! A loaded, validated assistant domain: the flow book plus everything
//! derived from it once at load time.

use std::collections::{BTreeMap, HashMap};

use crate::flow::{
    validate_flowbook, Flow, FlowBook, FlowProgram, ProgramStep, ResponseTemplate, SlotDefinition,
    StepKind, ValidationReport,
};
use crate::patterns::{self, PatternCatalog};
use crate::state::{Frame, FrameId, FrameKind, Tracker};

/// Immutable after construction; share it between conversations.
#[derive(Debug, Clone)]
pub struct Domain {
    book: FlowBook,
    programs: HashMap<String, FlowProgram>,
    catalog: PatternCatalog,
    responses: BTreeMap<String, ResponseTemplate>,
    report: ValidationReport,
}

#[derive(Debug, thiserror::Error)]
#[error("invalid flow book:\n{}", .0.errors.iter().map(|f| format!("  {f}")).collect::<Vec<_>>().join("\n"))]
pub struct DomainError(pub ValidationReport);

impl Domain {
    /// Validates the book and compiles every flow. Fails if validation
    /// reports any error.
    pub fn new(book: FlowBook) -> Result<Self, DomainError> {
        let report = validate_flowbook(&book);
        if !report.is_valid() {
            return Err(DomainError(report));
        }
        let mut programs = HashMap::new();
        for (id, flow) in &book.flows {
            let program = FlowProgram::compile(flow).map_err(|errs| {
                DomainError(ValidationReport {
                    errors: errs
                        .into_iter()
                        .map(|m| crate::flow::Finding {
                            location: format!("flow `{id}`"),
                            message: m,
                        })
                        .collect(),
                    warnings: vec![],
                })
            })?;
            programs.insert(id.clone(), program);
        }
        let catalog = PatternCatalog::new(&book.patterns).map_err(|errs| {
            DomainError(ValidationReport {
                errors: errs
                    .into_iter()
                    .map(|m| crate::flow::Finding {
                        location: "patterns".into(),
                        message: m,
                    })
                    .collect(),
                warnings: vec![],
            })
        })?;
        let mut responses = patterns::default_responses().clone();
        responses.extend(book.responses.iter().map(|(k, v)| (k.clone(), v.clone())));
        Ok(Self {
            book,
            programs,
            catalog,
            responses,
            report,
        })
    }

    /// `(flow, action)` pairs whose action is neither built in, a response
    /// template, a `start_flow:` link nor registered. Such steps fail at run
    /// time unless a handler is registered before the engine is built.
    pub fn unresolved_actions(&self, registry: &crate::actions::ActionRegistry) -> Vec<(String, String)> {
        let mut missing = Vec::new();
        for (flow_id, program) in &self.programs {
            for step in &program.steps {
                let crate::flow::StepKind::Action { name } = &step.kind else {
                    continue;
                };
                let resolved = patterns::RESERVED_ACTIONS.contains(&name.as_str())
                    || name.starts_with("start_flow:")
                    || (name.starts_with("utter_") && self.responses.contains_key(name))
                    || registry.contains(name);
                if !resolved {
                    missing.push((flow_id.clone(), name.clone()));
                }
            }
        }
        missing.sort();
        missing.dedup();
        missing
    }

    pub fn book(&self) -> &FlowBook {
        &self.book
    }

    /// Validation warnings found at load time.
    pub fn report(&self) -> &ValidationReport {
        &self.report
    }

    pub fn catalog(&self) -> &PatternCatalog {
        &self.catalog
    }

    pub fn flow(&self, id: &str) -> Option<&Flow> {
        self.book.flows.get(id)
    }

    pub fn program(&self, flow_id: &str) -> Option<&FlowProgram> {
        self.programs.get(flow_id)
    }

    pub fn slot(&self, id: &str) -> Option<&SlotDefinition> {
        self.book.slots.get(id)
    }

    /// Book responses layered over the built-in pattern responses.
    pub fn responses(&self) -> &BTreeMap<String, ResponseTemplate> {
        &self.responses
    }

    pub fn response(&self, id: &str) -> Option<&ResponseTemplate> {
        self.responses.get(id)
    }

    pub fn frame_program(&self, frame: &Frame) -> Option<&FlowProgram> {
        match frame.kind {
            FrameKind::UserFlow => self.program(&frame.flow_id),
            FrameKind::Pattern => self.catalog.program(&frame.flow_id),
        }
    }

    pub fn frame_flow(&self, frame: &Frame) -> Option<&Flow> {
        match frame.kind {
            FrameKind::UserFlow => self.flow(&frame.flow_id),
            FrameKind::Pattern => self.catalog.flow(&frame.flow_id),
        }
    }

    pub fn current_step<'a>(&'a self, frame: &Frame) -> Option<&'a ProgramStep> {
        self.frame_program(frame)?.step(&frame.cursor)
    }

    /// The slot the active frame has asked for and not yet received.
    pub fn awaited_slot<'a>(&'a self, tracker: &Tracker) -> Option<(FrameId, &'a str)> {
        let top = tracker.stack.top()?;
        let step = self.current_step(top)?;
        match &step.kind {
            StepKind::Collect { slot, .. }
                if top.asked.contains(&step.id) && !top.fulfilled.contains(&step.id) =>
            {
                Some((top.id, slot.as_str()))
            }
            _ => None,
        }
    }

    /// Display name of a flow, falling back to the id.
    pub fn display_name(&self, flow_id: &str) -> String {
        self.flow(flow_id)
            .or_else(|| self.catalog.flow(flow_id))
            .map_or_else(|| flow_id.replace('_', " "), Flow::display_name)
    }
}
