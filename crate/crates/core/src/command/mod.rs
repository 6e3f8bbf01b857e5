//! The command language: what dialogue understanding may ask the engine to
//! do. One command per line, `Name` or `Name(arg, ...)`.

mod validate;

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::flow::is_identifier;

pub use validate::{
    coerce_value, validate_commands, DropReason, DroppedCommand, Rejection, Validation,
    ValidatedCommand,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Command {
    StartFlow(String),
    CancelFlow,
    /// The value is raw text; it is coerced to the slot's type during
    /// validation.
    SetSlot { slot: String, value: String },
    ChitChat,
    KnowledgeAnswer,
    HumanHandoff,
    /// At least two distinct flow ids.
    Clarify(Vec<String>),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::StartFlow(_) => "StartFlow",
            Command::CancelFlow => "CancelFlow",
            Command::SetSlot { .. } => "SetSlot",
            Command::ChitChat => "ChitChat",
            Command::KnowledgeAnswer => "KnowledgeAnswer",
            Command::HumanHandoff => "HumanHandoff",
            Command::Clarify(_) => "Clarify",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Command::StartFlow(flow) => write!(f, "StartFlow({flow})"),
            Command::SetSlot { slot, value } => write!(f, "SetSlot({slot}, {value})"),
            Command::Clarify(options) => write!(f, "Clarify({})", options.join(", ")),
            other => f.write_str(other.name()),
        }
    }
}

impl Serialize for Command {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Command {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        parse_command(&text).map_err(serde::de::Error::custom)
    }
}

impl std::str::FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_command(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommandParseError {
    /// 1-based line number in the parsed text.
    pub line: usize,
    pub text: String,
    pub message: String,
}

impl fmt::Display for CommandParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {} (`{}`)", self.line, self.message, self.text)
    }
}

/// Parses model output. Blank lines and Markdown code fences are skipped;
/// every other line yields either a command or an error. Never fails as a
/// whole.
pub fn parse_commands(text: &str) -> (Vec<Command>, Vec<CommandParseError>) {
    let mut commands = Vec::new();
    let mut errors = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with("```") {
            continue;
        }
        match parse_command(trimmed) {
            Ok(c) => commands.push(c),
            Err(message) => errors.push(CommandParseError {
                line: i + 1,
                text: trimmed.to_string(),
                message,
            }),
        }
    }
    (commands, errors)
}

/// One command per line, in order.
pub fn serialize_commands(commands: &[Command]) -> String {
    commands
        .iter()
        .map(Command::to_string)
        .collect::<Vec<_>>()
        .join("\n")
}

fn parse_command(line: &str) -> Result<Command, String> {
    let line = line.trim();
    let (name, args) = match line.find('(') {
        Some(open) => {
            let Some(inner) = line[open + 1..].strip_suffix(')') else {
                return Err("missing closing parenthesis".into());
            };
            (line[..open].trim(), Some(inner))
        }
        None => (line, None),
    };
    let no_args = |command: Command| match args {
        Some(a) if !a.trim().is_empty() => Err(format!("{name} takes no arguments")),
        _ => Ok(command),
    };
    match name {
        "CancelFlow" => no_args(Command::CancelFlow),
        "ChitChat" => no_args(Command::ChitChat),
        "KnowledgeAnswer" => no_args(Command::KnowledgeAnswer),
        "HumanHandoff" => no_args(Command::HumanHandoff),
        "StartFlow" => {
            let flow = args.map(str::trim).unwrap_or_default();
            if flow.is_empty() {
                return Err("StartFlow takes exactly one flow id".into());
            }
            if !is_identifier(flow) {
                return Err(format!("invalid flow id `{flow}`"));
            }
            Ok(Command::StartFlow(flow.to_string()))
        }
        "SetSlot" => {
            let Some((slot, value)) = args.and_then(|a| a.split_once(',')) else {
                return Err("SetSlot takes a slot id and a value".into());
            };
            let (slot, value) = (slot.trim(), value.trim());
            if !is_identifier(slot) {
                return Err(format!("invalid slot id `{slot}`"));
            }
            if value.is_empty() {
                return Err("SetSlot value is empty".into());
            }
            if value.contains(',') {
                return Err("SetSlot values cannot contain commas".into());
            }
            Ok(Command::SetSlot {
                slot: slot.to_string(),
                value: value.to_string(),
            })
        }
        "Clarify" => {
            let mut options: Vec<String> = Vec::new();
            for option in args.unwrap_or_default().split(',').map(str::trim) {
                if option.is_empty() {
                    continue;
                }
                if !is_identifier(option) {
                    return Err(format!("invalid flow id `{option}`"));
                }
                if !options.iter().any(|o| o == option) {
                    options.push(option.to_string());
                }
            }
            match options.len() {
                0 => Err("Clarify needs at least one option".into()),
                1 => Ok(Command::StartFlow(options.remove(0))),
                _ => Ok(Command::Clarify(options)),
            }
        }
        "" => Err("expected a command".into()),
        other => Err(format!("unknown command `{other}`")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(slot: &str, value: &str) -> Command {
        Command::SetSlot {
            slot: slot.into(),
            value: value.into(),
        }
    }

    #[test]
    fn parses_transfer_example() {
        let (cmds, errs) =
            parse_commands("StartFlow(transfer_money)\nSetSlot(recipient, John)\nSetSlot(amount, 55)");
        assert!(errs.is_empty());
        assert_eq!(
            cmds,
            vec![
                Command::StartFlow("transfer_money".into()),
                set("recipient", "John"),
                set("amount", "55"),
            ]
        );
    }

    #[test]
    fn empty_text_is_empty_list() {
        assert_eq!(parse_commands(""), (vec![], vec![]));
        assert_eq!(parse_commands("\n  \n"), (vec![], vec![]));
    }

    #[test]
    fn clarify_arity_rules() {
        let (cmds, _) = parse_commands("Clarify(freeze_card, unfreeze_card, cancel_card)");
        assert_eq!(
            cmds,
            vec![Command::Clarify(vec![
                "freeze_card".into(),
                "unfreeze_card".into(),
                "cancel_card".into()
            ])]
        );
        let (cmds, _) = parse_commands("Clarify(a, a)");
        assert_eq!(cmds, vec![Command::StartFlow("a".into())]);
        let (cmds, errs) = parse_commands("Clarify()");
        assert!(cmds.is_empty());
        assert_eq!(errs.len(), 1);
    }

    #[test]
    fn bad_lines_are_reported_and_parsing_continues() {
        let (cmds, errs) = parse_commands("hello there\nCancelFlow\nSetSlot(a)\nStartFlow(x, y)\nSetSlot(a, 1, 2)");
        assert_eq!(cmds, vec![Command::CancelFlow]);
        assert_eq!(errs.iter().map(|e| e.line).collect::<Vec<_>>(), vec![1, 3, 4, 5]);
    }

    #[test]
    fn no_arg_commands_accept_empty_parens() {
        assert_eq!(parse_command("ChitChat()"), Ok(Command::ChitChat));
        assert!(parse_command("ChitChat(x)").is_err());
    }

    #[test]
    fn serialize_preserves_order() {
        let cmds = vec![set("amount", "45"), Command::StartFlow("check_balance".into())];
        let text = serialize_commands(&cmds);
        assert_eq!(text, "SetSlot(amount, 45)\nStartFlow(check_balance)");
        assert_eq!(parse_commands(&text).0, cmds);
        assert_eq!(serialize_commands(&[Command::CancelFlow]), "CancelFlow");
    }

    #[test]
    fn serde_uses_wire_syntax() {
        let json = serde_json::to_string(&set("amount", "$55")).unwrap();
        assert_eq!(json, "\"SetSlot(amount, $55)\"");
        let back: Command = serde_json::from_str(&json).unwrap();
        assert_eq!(back, set("amount", "$55"));
    }

    #[test]
    fn code_fences_are_ignored() {
        let (cmds, errs) = parse_commands("```\nHumanHandoff\n```");
        assert_eq!(cmds, vec![Command::HumanHandoff]);
        assert!(errs.is_empty());
    }
}
