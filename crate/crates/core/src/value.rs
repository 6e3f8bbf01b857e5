//! Typed slot values.

use std::fmt;

use serde::{Deserialize, Serialize};

/// A non-null slot value. Null is represented as `Option::None` wherever a
/// slot may be empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Bool(bool),
    Float(f64),
    Text(String),
}

impl Value {
    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Bool(_) => "bool",
            Value::Float(_) => "float",
            Value::Text(_) => "text",
        }
    }

    /// Truthiness used by conditions: numbers are true when non-zero, text
    /// when non-empty.
    pub fn truthy(&self) -> bool {
        match self {
            Value::Bool(b) => *b,
            Value::Float(f) => *f != 0.0,
            Value::Text(s) => !s.is_empty(),
        }
    }

    /// Renders with a fixed number of decimals for floats; other values are
    /// rendered as usual.
    pub fn format_with_precision(&self, decimals: usize) -> String {
        match self {
            Value::Float(f) => format!("{f:.decimals$}"),
            other => other.to_string(),
        }
    }

    pub(crate) fn to_yaml(&self) -> serde_yaml::Value {
        match self {
            Value::Bool(b) => serde_yaml::Value::Bool(*b),
            Value::Float(f) => serde_yaml::Value::Number((*f).into()),
            Value::Text(s) => serde_yaml::Value::String(s.clone()),
        }
    }

    pub(crate) fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).unwrap_or(serde_json::Value::Null)
    }
}

/// Floats with an integral value print without a fractional part, so a
/// transferred amount of `110.0` reads as `110`.
pub fn format_float(f: f64) -> String {
    if f.is_finite() && f.fract() == 0.0 && f.abs() < 1e15 {
        format!("{}", f as i64)
    } else {
        format!("{f}")
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Float(x) => f.write_str(&format_float(*x)),
            Value::Text(s) => f.write_str(s),
        }
    }
}

pub fn display_optional(value: Option<&Value>) -> String {
    value.map_or_else(|| "null".to_string(), Value::to_string)
}
