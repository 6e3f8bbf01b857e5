use std::collections::BTreeMap;

use serde_json::Value as Json;

use crate::flow::placeholders;
use crate::value::{format_float, Value};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RenderError {
    #[error("unknown template `{0}`")]
    UnknownTemplate(String),
    #[error("template `{template}` has unfilled placeholder `{placeholder}`")]
    Unfilled { template: String, placeholder: String },
}

/// Substitutes `{slot}`, `{slot:.N}` and `{context.key}` placeholders.
/// Returns the name of the first placeholder without a value on failure.
pub fn render_text(
    text: &str,
    slots: &BTreeMap<String, Option<Value>>,
    context: &BTreeMap<String, Json>,
) -> Result<String, String> {
    let mut out = String::with_capacity(text.len());
    let mut last = 0;
    for p in placeholders(text) {
        out.push_str(&text[last..p.start]);
        let rendered = if p.context {
            context.get(&p.name).and_then(|v| format_json(v, p.decimals))
        } else {
            slots
                .get(&p.name)
                .and_then(Option::as_ref)
                .map(|v| match p.decimals {
                    Some(d) => v.format_with_precision(d),
                    None => v.to_string(),
                })
        };
        let Some(rendered) = rendered else {
            let prefix = if p.context { "context." } else { "" };
            return Err(format!("{prefix}{}", p.name));
        };
        out.push_str(&rendered);
        last = p.end;
    }
    out.push_str(&text[last..]);
    Ok(out)
}

fn format_json(v: &Json, decimals: Option<usize>) -> Option<String> {
    match v {
        Json::Null => None,
        Json::Bool(b) => Some(b.to_string()),
        Json::Number(n) => {
            let f = n.as_f64()?;
            Some(match decimals {
                Some(d) => format!("{f:.d$}"),
                None => format_float(f),
            })
        }
        Json::String(s) => Some(s.clone()),
        Json::Array(items) => Some(
            items
                .iter()
                .filter_map(|i| format_json(i, decimals))
                .collect::<Vec<_>>()
                .join(", "),
        ),
        Json::Object(_) => Some(v.to_string()),
    }
}
