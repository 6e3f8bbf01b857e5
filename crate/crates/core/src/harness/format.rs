use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_yaml::Value as Yaml;

use crate::command::Command;
use crate::flow::literal_from_yaml;
use crate::value::Value;

/// Conversation categories of the bundled test suites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    HappyPath,
    Cancellations,
    Corrections,
    Repetitions,
    Disambiguation,
    InputValidation,
    Negations,
    Chitchat,
    Digressions,
    Knowledge,
}

impl Category {
    pub const ALL: [Category; 10] = [
        Category::HappyPath,
        Category::Cancellations,
        Category::Corrections,
        Category::Repetitions,
        Category::Disambiguation,
        Category::InputValidation,
        Category::Negations,
        Category::Chitchat,
        Category::Digressions,
        Category::Knowledge,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::HappyPath => "happy_path",
            Category::Cancellations => "cancellations",
            Category::Corrections => "corrections",
            Category::Repetitions => "repetitions",
            Category::Disambiguation => "disambiguation",
            Category::InputValidation => "input_validation",
            Category::Negations => "negations",
            Category::Chitchat => "chitchat",
            Category::Digressions => "digressions",
            Category::Knowledge => "knowledge",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Category::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown category `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TestStep {
    /// A user message, optionally with the commands understanding should
    /// produce for it.
    User {
        text: String,
        commands: Option<Vec<Command>>,
    },
    /// The next bot message came from this template.
    Utter(String),
    /// The next bot message has exactly this text.
    Bot(String),
    /// Current slot values; `None` expects the slot to be empty.
    SlotWasSet(Vec<(String, Option<Value>)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestConversation {
    pub name: String,
    pub category: Category,
    pub steps: Vec<TestStep>,
    /// File the test was loaded from, if any.
    pub source: Option<String>,
}

impl TestConversation {
    /// Number of messages in the conversation (user and bot lines).
    pub fn turns(&self) -> usize {
        self.steps
            .iter()
            .filter(|s| !matches!(s, TestStep::SlotWasSet(_)))
            .count()
    }
}

/// Parses a test file:
///
/// ```yaml
/// test_cases:
///   - test_case: transfer_happy_path
///     category: happy_path
///     steps:
///       - user: I want to transfer money
///         commands:
///           - StartFlow(transfer_money)
///       - utter: utter_ask_transfer_money_recipient
///       - bot: Who do you want to transfer money to?
///       - slot_was_set:
///           - transfer_money_recipient: John
/// ```
pub fn parse_test_file(source: &str, text: &str) -> Result<Vec<TestConversation>, Vec<String>> {
    let doc: Yaml = serde_yaml::from_str(text).map_err(|e| vec![format!("{source}: {e}")])?;
    let mut errors = Vec::new();
    let mut tests = Vec::new();
    let cases = match &doc {
        Yaml::Null => return Ok(vec![]),
        Yaml::Mapping(m) => {
            for key in m.keys() {
                if key.as_str() != Some("test_cases") {
                    errors.push(format!("{source}: unknown key `{}`", key.as_str().unwrap_or("?")));
                }
            }
            m.get("test_cases").cloned().unwrap_or(Yaml::Null)
        }
        _ => return Err(vec![format!("{source}: expected a mapping with `test_cases`")]),
    };
    let cases = match cases {
        Yaml::Null => vec![],
        Yaml::Sequence(s) => s,
        _ => return Err(vec![format!("{source}: `test_cases` must be a list")]),
    };
    for (i, case) in cases.iter().enumerate() {
        match parse_case(case) {
            Ok(mut t) => {
                t.source = Some(source.to_string());
                tests.push(t);
            }
            Err(e) => errors.extend(e.into_iter().map(|m| format!("{source}: test_cases[{i}]: {m}"))),
        }
    }
    if errors.is_empty() {
        Ok(tests)
    } else {
        Err(errors)
    }
}

fn parse_case(case: &Yaml) -> Result<TestConversation, Vec<String>> {
    let Some(map) = case.as_mapping() else {
        return Err(vec!["expected a mapping".into()]);
    };
    let mut errors = Vec::new();
    let mut name = None;
    let mut category = None;
    let mut steps = Vec::new();
    for (key, value) in map {
        match key.as_str() {
            Some("test_case") => name = value.as_str().map(str::to_string),
            Some("category") => match value.as_str().map(str::parse::<Category>) {
                Some(Ok(c)) => category = Some(c),
                Some(Err(e)) => errors.push(e),
                None => errors.push("`category` must be a string".into()),
            },
            Some("steps") => match value.as_sequence() {
                Some(list) => {
                    for (j, step) in list.iter().enumerate() {
                        match parse_step(step) {
                            Ok(s) => steps.push(s),
                            Err(e) => errors.push(format!("steps[{j}]: {e}")),
                        }
                    }
                }
                None => errors.push("`steps` must be a list".into()),
            },
            other => errors.push(format!("unknown key `{}`", other.unwrap_or("?"))),
        }
    }
    let name = name.ok_or_else(|| vec!["missing `test_case` name".to_string()]);
    let category = category.ok_or_else(|| vec!["missing `category`".to_string()]);
    match (name, category) {
        (Ok(name), Ok(category)) if errors.is_empty() => Ok(TestConversation {
            name,
            category,
            steps,
            source: None,
        }),
        (name, category) => {
            errors.extend(name.err().into_iter().flatten());
            errors.extend(category.err().into_iter().flatten());
            Err(errors)
        }
    }
}

fn parse_step(step: &Yaml) -> Result<TestStep, String> {
    let Some(map) = step.as_mapping() else {
        return Err("expected a mapping".into());
    };
    let keys: Vec<&str> = map.keys().filter_map(Yaml::as_str).collect();
    let text_of = |key: &str| -> Result<String, String> {
        match map.get(key) {
            Some(Yaml::String(s)) => Ok(s.clone()),
            Some(v @ (Yaml::Number(_) | Yaml::Bool(_))) => Ok(serde_yaml::to_string(v)
                .map_err(|e| e.to_string())?
                .trim()
                .to_string()),
            _ => Err(format!("`{key}` must be text")),
        }
    };
    match keys.as_slice() {
        ["user"] | ["user", "commands"] | ["commands", "user"] => {
            let commands = match map.get("commands") {
                None => None,
                Some(Yaml::Sequence(items)) => {
                    let mut cmds = Vec::new();
                    for item in items {
                        let text = item.as_str().ok_or("commands must be strings")?;
                        cmds.push(text.parse::<Command>().map_err(|e| format!("`{text}`: {e}"))?);
                    }
                    Some(cmds)
                }
                Some(_) => return Err("`commands` must be a list".into()),
            };
            Ok(TestStep::User {
                text: text_of("user")?,
                commands,
            })
        }
        ["utter"] => Ok(TestStep::Utter(text_of("utter")?)),
        ["bot"] => Ok(TestStep::Bot(text_of("bot")?)),
        ["slot_was_set"] => {
            let Some(items) = map.get("slot_was_set").and_then(Yaml::as_sequence) else {
                return Err("`slot_was_set` must be a list".into());
            };
            let mut expected = Vec::new();
            for item in items {
                let (slot, value) = item
                    .as_mapping()
                    .filter(|m| m.len() == 1)
                    .and_then(|m| m.iter().next())
                    .ok_or("`slot_was_set` entries look like `- slot: value`")?;
                let slot = slot.as_str().ok_or("slot names must be strings")?;
                expected.push((slot.to_string(), literal_from_yaml(value)?));
            }
            Ok(TestStep::SlotWasSet(expected))
        }
        _ => Err(format!(
            "a step has exactly one of `user` (with optional `commands`), `utter`, `bot` or `slot_was_set`; found {keys:?}"
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_step_kinds() {
        let text = r#"
test_cases:
  - test_case: t
    category: corrections
    steps:
      - user: I want to transfer money
        commands:
          - StartFlow(transfer_money)
      - utter: utter_ask_recipient
      - user: "yes."
      - bot: "Ok. Your transfer is complete."
      - slot_was_set:
          - amount: 110
          - recipient: null
"#;
        let tests = parse_test_file("t.yml", text).unwrap();
        assert_eq!(tests.len(), 1);
        let t = &tests[0];
        assert_eq!(t.category, Category::Corrections);
        assert_eq!(t.turns(), 4);
        assert_eq!(
            t.steps[0],
            TestStep::User {
                text: "I want to transfer money".into(),
                commands: Some(vec![Command::StartFlow("transfer_money".into())])
            }
        );
        assert_eq!(t.steps[2], TestStep::User { text: "yes.".into(), commands: None });
        assert_eq!(
            t.steps[4],
            TestStep::SlotWasSet(vec![("amount".into(), Some(Value::Float(110.0))), ("recipient".into(), None)])
        );
    }

    #[test]
    fn rejects_bad_input() {
        assert!(parse_test_file("x", "test_cases:\n  - test_case: a\n    category: nope\n    steps: []\n").is_err());
        assert!(parse_test_file("x", "test_cases:\n  - test_case: a\n    category: chitchat\n    steps:\n      - user: a\n        bot: b\n").is_err());
        assert!(parse_test_file("x", "test_cases:\n  - test_case: a\n    category: chitchat\n    steps:\n      - user: a\n        commands: [Bogus]\n").is_err());
        assert_eq!(parse_test_file("x", "").unwrap(), vec![]);
    }
}
