//! Custom actions: the developer extension point for side effects and API
//! calls, plus rule-based stub actions configured from `actions.yml`.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use serde_yaml::Value as Yaml;

use crate::flow::{literal_from_yaml, Condition, FlowBook};
use crate::state::Frame;
use crate::value::Value;

/// Read-only view of the conversation handed to an action.
pub struct ActionContext<'a> {
    pub slots: &'a BTreeMap<String, Option<Value>>,
    pub frame: &'a Frame,
    pub latest_message: Option<&'a str>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ActionMessage {
    /// A response template id, rendered by the engine.
    Template(String),
    Text(String),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ActionEffects {
    pub slots: Vec<(String, Option<Value>)>,
    pub messages: Vec<ActionMessage>,
}

pub trait ActionHandler: Send + Sync {
    fn run(&self, ctx: &ActionContext<'_>) -> Result<ActionEffects, String>;
}

impl<F> ActionHandler for F
where
    F: Fn(&ActionContext<'_>) -> Result<ActionEffects, String> + Send + Sync,
{
    fn run(&self, ctx: &ActionContext<'_>) -> Result<ActionEffects, String> {
        self(ctx)
    }
}

#[derive(Clone, Default)]
pub struct ActionRegistry {
    handlers: HashMap<String, Arc<dyn ActionHandler>>,
}

impl std::fmt::Debug for ActionRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut names: Vec<_> = self.handlers.keys().collect();
        names.sort();
        f.debug_struct("ActionRegistry").field("actions", &names).finish()
    }
}

impl ActionRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, name: impl Into<String>, handler: impl ActionHandler + 'static) {
        self.handlers.insert(name.into(), Arc::new(handler));
    }

    pub fn get(&self, name: &str) -> Option<&Arc<dyn ActionHandler>> {
        self.handlers.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.handlers.contains_key(name)
    }

    pub fn names(&self) -> Vec<&str> {
        let mut names: Vec<&str> = self.handlers.keys().map(String::as_str).collect();
        names.sort_unstable();
        names
    }

    /// Builds stub actions from rule lists:
    ///
    /// ```yaml
    /// check_transfer_funds:
    ///   - if: slots.transfer_money_amount_of_money <= 1000
    ///     set_slots:
    ///       - transfer_money_has_sufficient_funds: true
    ///   - set_slots:
    ///       - transfer_money_has_sufficient_funds: false
    /// ```
    ///
    /// The first rule whose condition holds (or that has none) applies.
    /// A rule may also `utter` a template or raise an `error`.
    pub fn from_stub_yaml(text: &str, book: &FlowBook) -> Result<Self, Vec<String>> {
        let mut registry = Self::new();
        let mut errors = Vec::new();
        let doc: Yaml = match serde_yaml::from_str(text) {
            Ok(d) => d,
            Err(e) => return Err(vec![format!("actions: {e}")]),
        };
        let map = match doc {
            Yaml::Null => return Ok(registry),
            Yaml::Mapping(m) => m,
            _ => return Err(vec!["actions: expected a mapping of action names".into()]),
        };
        for (name, rules) in map {
            let Some(name) = name.as_str().map(str::to_string) else {
                errors.push("actions: action names must be strings".into());
                continue;
            };
            match parse_rules(&name, &rules, book) {
                Ok(rules) => registry.register(name, StubAction { rules }),
                Err(mut e) => errors.append(&mut e),
            }
        }
        if errors.is_empty() {
            Ok(registry)
        } else {
            Err(errors)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StubRule {
    pub condition: Option<Condition>,
    pub set_slots: Vec<(String, Option<Value>)>,
    pub utter: Vec<String>,
    pub error: Option<String>,
}

/// Deterministic rule-driven action, used for tests and demos.
#[derive(Debug, Clone, PartialEq)]
pub struct StubAction {
    pub rules: Vec<StubRule>,
}

impl ActionHandler for StubAction {
    fn run(&self, ctx: &ActionContext<'_>) -> Result<ActionEffects, String> {
        let rule = self.rules.iter().find(|r| {
            r.condition
                .as_ref()
                .is_none_or(|c| c.evaluate(ctx.slots).value)
        });
        let Some(rule) = rule else {
            return Ok(ActionEffects::default());
        };
        if let Some(error) = &rule.error {
            return Err(error.clone());
        }
        Ok(ActionEffects {
            slots: rule.set_slots.clone(),
            messages: rule.utter.iter().cloned().map(ActionMessage::Template).collect(),
        })
    }
}

fn parse_rules(name: &str, rules: &Yaml, book: &FlowBook) -> Result<Vec<StubRule>, Vec<String>> {
    let mut errors = Vec::new();
    let Some(list) = rules.as_sequence() else {
        return Err(vec![format!("actions.{name}: expected a list of rules")]);
    };
    let mut out = Vec::new();
    for (i, rule) in list.iter().enumerate() {
        let loc = format!("actions.{name}[{i}]");
        let Some(map) = rule.as_mapping() else {
            errors.push(format!("{loc}: expected a mapping"));
            continue;
        };
        let mut parsed = StubRule {
            condition: None,
            set_slots: vec![],
            utter: vec![],
            error: None,
        };
        for (key, value) in map {
            match key.as_str() {
                Some("if") => match value.as_str().map(Condition::parse) {
                    Some(Ok(c)) => {
                        for slot in c.slot_refs() {
                            if !book.slots.contains_key(slot) {
                                errors.push(format!("{loc}: undefined slot: {slot}"));
                            }
                        }
                        parsed.condition = Some(c);
                    }
                    Some(Err(e)) => errors.push(format!("{loc}.if: {e}")),
                    None => errors.push(format!("{loc}.if: expected a condition string")),
                },
                Some("set_slots") => {
                    let Some(items) = value.as_sequence() else {
                        errors.push(format!("{loc}.set_slots: expected a list"));
                        continue;
                    };
                    for item in items {
                        let Some((slot, v)) = item.as_mapping().filter(|m| m.len() == 1).and_then(|m| m.iter().next()) else {
                            errors.push(format!("{loc}.set_slots: expected `- slot: value` entries"));
                            continue;
                        };
                        let slot = slot.as_str().unwrap_or_default().to_string();
                        let Some(def) = book.slots.get(&slot) else {
                            errors.push(format!("{loc}: undefined slot: {slot}"));
                            continue;
                        };
                        match literal_from_yaml(v) {
                            Ok(v) => {
                                if let Some(lit) = &v {
                                    if !def.accepts(lit) {
                                        errors.push(format!(
                                            "{loc}: value `{lit}` does not fit slot `{slot}` of type {}",
                                            def.slot_type.as_str()
                                        ));
                                    }
                                }
                                parsed.set_slots.push((slot, v));
                            }
                            Err(e) => errors.push(format!("{loc}.set_slots.{slot}: {e}")),
                        }
                    }
                }
                Some("utter") => {
                    let ids: Vec<String> = match value {
                        Yaml::String(s) => vec![s.clone()],
                        Yaml::Sequence(s) => s.iter().filter_map(|v| v.as_str().map(str::to_string)).collect(),
                        _ => {
                            errors.push(format!("{loc}.utter: expected a template id or a list"));
                            continue;
                        }
                    };
                    for id in &ids {
                        let builtin = crate::patterns::default_responses().contains_key(id);
                        if !book.responses.contains_key(id) && !builtin {
                            errors.push(format!("{loc}: undefined response: {id}"));
                        }
                    }
                    parsed.utter = ids;
                }
                Some("error") => parsed.error = value.as_str().map(str::to_string),
                other => errors.push(format!("{loc}: unknown key `{}`", other.unwrap_or("?"))),
            }
        }
        out.push(parsed);
    }
    if errors.is_empty() {
        Ok(out)
    } else {
        Err(errors)
    }
}
