use std::fmt;

use serde::{Deserialize, Serialize};

use super::Command;
use crate::domain::Domain;
use crate::flow::{SlotDefinition, SlotType};
use crate::state::Tracker;
use crate::value::Value;

/// A command whose references resolve against the flow book and whose slot
/// value has been coerced to the slot's type.
#[derive(Debug, Clone, PartialEq)]
pub enum ValidatedCommand {
    StartFlow(String),
    CancelFlow,
    /// `None` clears the slot.
    SetSlot { slot: String, value: Option<Value> },
    ChitChat,
    KnowledgeAnswer,
    HumanHandoff,
    Clarify(Vec<String>),
}

impl ValidatedCommand {
    /// Back to wire form; validating the result yields `self` again.
    pub fn to_command(&self) -> Command {
        match self {
            ValidatedCommand::StartFlow(f) => Command::StartFlow(f.clone()),
            ValidatedCommand::CancelFlow => Command::CancelFlow,
            ValidatedCommand::SetSlot { slot, value } => Command::SetSlot {
                slot: slot.clone(),
                value: value.as_ref().map_or_else(|| "null".to_string(), Value::to_string),
            },
            ValidatedCommand::ChitChat => Command::ChitChat,
            ValidatedCommand::KnowledgeAnswer => Command::KnowledgeAnswer,
            ValidatedCommand::HumanHandoff => Command::HumanHandoff,
            ValidatedCommand::Clarify(options) => Command::Clarify(options.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    UnknownFlow,
    UnknownSlot,
    InvalidValue,
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DropReason::UnknownFlow => "unknown flow",
            DropReason::UnknownSlot => "unknown slot",
            DropReason::InvalidValue => "invalid value",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedCommand {
    pub command: Command,
    pub reason: DropReason,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

/// A value for the slot the user is currently being asked for that could
/// not be coerced; the executor answers it with a validation message and a
/// re-prompt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejection {
    pub slot: String,
    pub value: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Validation {
    pub commands: Vec<ValidatedCommand>,
    pub dropped: Vec<DroppedCommand>,
    pub rejected: Vec<Rejection>,
}

/// Coerces raw command text to a slot value. `null` (any case) clears.
///
/// * float: integer or decimal text, optionally preceded by one currency
///   symbol (`$`, `€`, `£`, `¥`)
/// * bool: `true`/`false`, case-insensitive
/// * categorical: case-insensitive match against the allowed values,
///   returning the declared spelling
/// * text: any non-empty text
pub fn coerce_value(raw: &str, slot: &SlotDefinition) -> Result<Option<Value>, String> {
    let raw = raw.trim();
    if raw.eq_ignore_ascii_case("null") {
        return Ok(None);
    }
    let expected = slot.slot_type.as_str();
    let fail = || Err(format!("`{raw}` is not a valid {expected} value"));
    match slot.slot_type {
        SlotType::Text => {
            if raw.is_empty() {
                fail()
            } else {
                Ok(Some(Value::Text(raw.to_string())))
            }
        }
        SlotType::Float => {
            let digits = raw.strip_prefix(['$', '€', '£', '¥']).unwrap_or(raw);
            if is_decimal(digits) {
                digits.parse::<f64>().map(|f| Some(Value::Float(f))).or_else(|_| fail())
            } else {
                fail()
            }
        }
        SlotType::Bool => {
            if raw.eq_ignore_ascii_case("true") {
                Ok(Some(Value::Bool(true)))
            } else if raw.eq_ignore_ascii_case("false") {
                Ok(Some(Value::Bool(false)))
            } else {
                fail()
            }
        }
        SlotType::Categorical => slot
            .allowed_values
            .iter()
            .find(|v| v.to_string().eq_ignore_ascii_case(raw))
            .map(|v| Some(v.clone()))
            .map_or_else(fail, Ok),
    }
}

/// `[+-]?(digits[.digits?] | .digits)`
fn is_decimal(s: &str) -> bool {
    let s = s.strip_prefix(['+', '-']).unwrap_or(s);
    let (int, frac) = match s.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (s, None),
    };
    let all_digits = |t: &str| t.bytes().all(|b| b.is_ascii_digit());
    if !all_digits(int) || !frac.is_none_or(all_digits) {
        return false;
    }
    !int.is_empty() || frac.is_some_and(|f| !f.is_empty())
}

/// Resolves flow and slot references and coerces slot values. Nothing is
/// ever thrown away silently: every drop carries a reason.
pub fn validate_commands(commands: &[Command], domain: &Domain, tracker: &Tracker) -> Validation {
    let book = domain.book();
    let awaited = domain.awaited_slot(tracker).map(|(_, slot)| slot);
    let mut out = Validation::default();
    let drop = |command: &Command, reason: DropReason, detail: Option<String>| {
        DroppedCommand {
            command: command.clone(),
            reason,
            detail,
        }
    };
    for command in commands {
        match command {
            Command::StartFlow(flow) => {
                if book.flows.contains_key(flow) {
                    out.commands.push(ValidatedCommand::StartFlow(flow.clone()));
                } else {
                    out.dropped.push(drop(command, DropReason::UnknownFlow, Some(flow.clone())));
                }
            }
            Command::SetSlot { slot, value } => {
                let Some(definition) = book.slots.get(slot) else {
                    out.dropped.push(drop(command, DropReason::UnknownSlot, Some(slot.clone())));
                    continue;
                };
                match coerce_value(value, definition) {
                    Ok(v) => out.commands.push(ValidatedCommand::SetSlot {
                        slot: slot.clone(),
                        value: v,
                    }),
                    Err(message) => {
                        if awaited == Some(slot.as_str()) {
                            out.rejected.push(Rejection {
                                slot: slot.clone(),
                                value: value.clone(),
                            });
                        }
                        out.dropped.push(drop(command, DropReason::InvalidValue, Some(message)));
                    }
                }
            }
            Command::Clarify(options) => {
                let known: Vec<String> = options
                    .iter()
                    .filter(|o| book.flows.contains_key(*o))
                    .cloned()
                    .collect();
                let unknown: Vec<&str> = options
                    .iter()
                    .filter(|o| !book.flows.contains_key(*o))
                    .map(String::as_str)
                    .collect();
                if !unknown.is_empty() {
                    out.dropped.push(drop(command, DropReason::UnknownFlow, Some(unknown.join(", "))));
                }
                match known.len() {
                    0 => {}
                    1 => out.commands.push(ValidatedCommand::StartFlow(known[0].clone())),
                    _ => out.commands.push(ValidatedCommand::Clarify(known)),
                }
            }
            Command::CancelFlow => out.commands.push(ValidatedCommand::CancelFlow),
            Command::ChitChat => out.commands.push(ValidatedCommand::ChitChat),
            Command::KnowledgeAnswer => out.commands.push(ValidatedCommand::KnowledgeAnswer),
            Command::HumanHandoff => out.commands.push(ValidatedCommand::HumanHandoff),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn slot(slot_type: SlotType, allowed: &[&str]) -> SlotDefinition {
        SlotDefinition {
            id: "s".into(),
            slot_type,
            allowed_values: allowed.iter().map(|a| Value::Text(a.to_string())).collect(),
            initial_value: None,
        }
    }

    #[test]
    fn float_coercion_table() {
        let def = slot(SlotType::Float, &[]);
        let ok = [
            ("55", 55.0),
            ("$55", 55.0),
            ("€12.50", 12.5),
            ("£0.5", 0.5),
            ("¥.5", 0.5),
            ("-3", -3.0),
            ("+7.", 7.0),
            (" 110 ", 110.0),
        ];
        for (raw, expected) in ok {
            assert_eq!(coerce_value(raw, &def), Ok(Some(Value::Float(expected))), "{raw}");
        }
        for raw in ["$$5", "5$", "1e3", "abc", "", ".", "1,000", "$", "inf", "NaN", "5 dollars"] {
            assert!(coerce_value(raw, &def).is_err(), "{raw}");
        }
    }

    #[test]
    fn bool_categorical_and_null() {
        let b = slot(SlotType::Bool, &[]);
        assert_eq!(coerce_value("TRUE", &b), Ok(Some(Value::Bool(true))));
        assert_eq!(coerce_value("false", &b), Ok(Some(Value::Bool(false))));
        assert!(coerce_value("yes", &b).is_err());
        assert_eq!(coerce_value("null", &b), Ok(None));
        let c = slot(SlotType::Categorical, &["Gold", "Silver"]);
        assert_eq!(coerce_value("gold", &c), Ok(Some(Value::Text("Gold".into()))));
        assert!(coerce_value("bronze", &c).is_err());
    }
}
