//! Shared fixtures and random generators for the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::Rng;

use flowstack::assistant::Assistant;
use flowstack::command::Command;
use flowstack::flow::{
    Branch, CompareOp, Condition, Flow, FlowBook, NextSpec, ResponseTemplate, SlotDefinition,
    SlotType, Step, StepKind, Target,
};
use flowstack::patterns::BUILTIN_PATTERNS;
use flowstack::Value;

pub fn assistant_dir(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("assistants").join(name)
}

pub fn load_assistant(name: &str) -> Assistant {
    Assistant::load(assistant_dir(name)).unwrap_or_else(|e| panic!("loading {name}: {e}"))
}

const WORDS: &[&str] = &[
    "transfer", "money", "card", "amount", "recipient", "confirm", "balance", "x", "a1", "step",
    "flow", "end", "null", "true", "yes", "no",
];

pub fn identifier(rng: &mut impl Rng) -> String {
    let mut s = String::new();
    if rng.gen_bool(0.1) {
        s.push('_');
    }
    let parts = rng.gen_range(1..=3);
    for i in 0..parts {
        if i > 0 {
            s.push('_');
        }
        s.push_str(WORDS.choose(rng).unwrap());
    }
    if rng.gen_bool(0.3) {
        s.push_str(&rng.gen_range(0..100).to_string());
    }
    s
}

/// Free text including characters that need quoting in YAML.
pub fn text(rng: &mut impl Rng) -> String {
    const PIECES: &[&str] = &[
        "hello", "world", " ", ": ", "#", "'", "\"", "-", "{slot}", "$", "5", "true", "null", "é",
        "END", "[x]", "a, b", "\\", "\n", "%", "&", "*", "!", "?",
    ];
    let n = rng.gen_range(1..6);
    (0..n).map(|_| *PIECES.choose(rng).unwrap()).collect()
}

pub fn float(rng: &mut impl Rng) -> f64 {
    match rng.gen_range(0..4) {
        0 => rng.gen_range(-1000..1000) as f64,
        1 => rng.gen_range(-100_000..100_000) as f64 / 100.0,
        2 => rng.gen_range(0.0..1.0),
        _ => 0.0,
    }
}

pub fn value(rng: &mut impl Rng) -> Value {
    match rng.gen_range(0..3) {
        0 => Value::Bool(rng.gen()),
        1 => Value::Float(float(rng)),
        _ => Value::Text(text(rng)),
    }
}

pub fn optional_value(rng: &mut impl Rng) -> Option<Value> {
    if rng.gen_bool(0.2) {
        None
    } else {
        Some(value(rng))
    }
}

pub fn condition(rng: &mut impl Rng, depth: u32) -> Condition {
    let leaf = depth == 0 || rng.gen_bool(0.4);
    if leaf {
        let slot = identifier(rng);
        if rng.gen_bool(0.5) {
            return Condition::Slot(slot);
        }
        let op = *[
            CompareOp::Eq,
            CompareOp::Ne,
            CompareOp::Lt,
            CompareOp::Le,
            CompareOp::Gt,
            CompareOp::Ge,
        ]
        .choose(rng)
        .unwrap();
        return Condition::Compare {
            slot,
            op,
            value: optional_value(rng),
        };
    }
    match rng.gen_range(0..3) {
        0 => Condition::Not(Box::new(condition(rng, depth - 1))),
        1 => Condition::And(Box::new(condition(rng, depth - 1)), Box::new(condition(rng, depth - 1))),
        _ => Condition::Or(Box::new(condition(rng, depth - 1)), Box::new(condition(rng, depth - 1))),
    }
}

struct StepGen {
    next_id: usize,
}

impl StepGen {
    fn id(&mut self) -> String {
        self.next_id += 1;
        format!("s{}", self.next_id)
    }

    fn target(&mut self, rng: &mut impl Rng) -> Target {
        if rng.gen_bool(0.3) {
            Target::End
        } else {
            Target::Step(format!("s{}", rng.gen_range(1..=self.next_id.max(1))))
        }
    }

    fn branch(&mut self, rng: &mut impl Rng, depth: u32) -> Branch {
        if depth == 0 || rng.gen_bool(0.5) {
            Branch::Goto(self.target(rng))
        } else {
            let n = rng.gen_range(1..=3);
            Branch::Inline(self.steps(rng, n, depth - 1))
        }
    }

    fn step(&mut self, rng: &mut impl Rng, depth: u32) -> Step {
        let id = rng.gen_bool(0.4).then(|| self.id());
        let kind = match rng.gen_range(0..3) {
            0 => StepKind::Collect {
                slot: identifier(rng),
                description: rng.gen_bool(0.5).then(|| text(rng)),
                ask_before_filling: rng.gen(),
            },
            1 => StepKind::Action {
                name: if rng.gen_bool(0.2) {
                    format!("start_flow:{}", identifier(rng))
                } else {
                    identifier(rng)
                },
            },
            _ => StepKind::SetSlots {
                assignments: (0..rng.gen_range(0..4))
                    .map(|_| (identifier(rng), optional_value(rng)))
                    .collect(),
            },
        };
        let next = match rng.gen_range(0..4) {
            0 | 1 => NextSpec::Linear,
            2 => NextSpec::Goto(self.target(rng)),
            _ => NextSpec::Conditional {
                clauses: (0..rng.gen_range(1..3))
                    .map(|_| (condition(rng, 2), self.branch(rng, depth)))
                    .collect(),
                otherwise: rng.gen_bool(0.6).then(|| self.branch(rng, depth)),
            },
        };
        Step { id, kind, next }
    }

    fn steps(&mut self, rng: &mut impl Rng, n: usize, depth: u32) -> Vec<Step> {
        (0..n).map(|_| self.step(rng, depth)).collect()
    }
}

pub fn flow(rng: &mut impl Rng, id: String) -> Flow {
    let mut gen = StepGen { next_id: 0 };
    let n = rng.gen_range(1..=6);
    Flow {
        id,
        description: text(rng),
        name: rng.gen_bool(0.4).then(|| text(rng)),
        steps: gen.steps(rng, n, 2),
    }
}

/// A structurally valid (parseable) book; cross-references are random and
/// need not resolve.
pub fn flowbook(rng: &mut impl Rng) -> FlowBook {
    let mut book = FlowBook::default();
    for _ in 0..rng.gen_range(0..4) {
        let id = identifier(rng);
        book.flows.insert(id.clone(), flow(rng, id));
    }
    for _ in 0..rng.gen_range(0..5) {
        let id = identifier(rng);
        let slot_type = *[SlotType::Text, SlotType::Float, SlotType::Bool, SlotType::Categorical]
            .choose(rng)
            .unwrap();
        let allowed_values = if slot_type == SlotType::Categorical {
            (0..rng.gen_range(0..4)).map(|_| value(rng)).collect()
        } else {
            vec![]
        };
        let initial_value = rng.gen_bool(0.3).then(|| value(rng));
        book.slots.insert(
            id.clone(),
            SlotDefinition {
                id,
                slot_type,
                allowed_values,
                initial_value,
            },
        );
    }
    for _ in 0..rng.gen_range(0..4) {
        let id = format!("utter_{}", identifier(rng));
        let variants = (0..rng.gen_range(1..3)).map(|_| text(rng)).collect();
        book.responses.insert(id.clone(), ResponseTemplate { id, variants });
    }
    if rng.gen_bool(0.3) {
        let id = BUILTIN_PATTERNS.choose(rng).unwrap().to_string();
        book.patterns.insert(id.clone(), flow(rng, id));
    }
    book
}

/// Raw SetSlot values: non-empty, trimmed, comma- and newline-free.
pub fn slot_text(rng: &mut impl Rng) -> String {
    const PIECES: &[&str] = &[
        "John", "$100", "110", "12.5", "true", "false", "null", "yes", "a lot", "(x)", ")", "é",
        "@joe", "standing order", "EUR", "-3", "1e3", "N/A", "\"quoted\"",
    ];
    let n = rng.gen_range(1..3);
    let s: Vec<&str> = (0..n).map(|_| *PIECES.choose(rng).unwrap()).collect();
    s.join(" ")
}

/// Mostly known ids, sometimes made-up ones.
fn pick(rng: &mut impl Rng, pool: &[String]) -> String {
    if pool.is_empty() || rng.gen_bool(0.1) {
        identifier(rng)
    } else {
        pool.choose(rng).unwrap().clone()
    }
}

pub fn command(rng: &mut impl Rng, flows: &[String], slots: &[String]) -> Command {
    match rng.gen_range(0..8) {
        0 | 1 => Command::StartFlow(pick(rng, flows)),
        2 | 3 => Command::SetSlot {
            slot: pick(rng, slots),
            value: slot_text(rng),
        },
        4 => Command::CancelFlow,
        5 => {
            let mut options: Vec<String> = Vec::new();
            while options.len() < rng.gen_range(2..=4) {
                let o = pick(rng, flows);
                if !options.contains(&o) {
                    options.push(o);
                }
            }
            Command::Clarify(options)
        }
        6 => [Command::ChitChat, Command::KnowledgeAnswer, Command::HumanHandoff]
            .choose(rng)
            .unwrap()
            .clone(),
        _ => Command::SetSlot {
            slot: pick(rng, slots),
            value: slot_text(rng),
        },
    }
}

pub fn commands(rng: &mut impl Rng, flows: &[String], slots: &[String], max: usize) -> Vec<Command> {
    (0..rng.gen_range(0..=max)).map(|_| command(rng, flows, slots)).collect()
}

