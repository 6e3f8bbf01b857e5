use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde_yaml::{Mapping, Value as Yaml};

use super::{
    is_identifier, Branch, Condition, Flow, FlowBook, NextSpec, ResponseTemplate, SlotDefinition,
    SlotType, Step, StepKind, Target, START_FLOW_PREFIX,
};
use crate::value::Value;

/// One named source text, usually the contents of a file.
#[derive(Debug, Clone)]
pub struct SourceDocument {
    pub name: String,
    pub text: String,
}

impl SourceDocument {
    pub fn new(name: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            text: text.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub source: Option<String>,
    /// 1-based line, when known.
    pub line: Option<usize>,
    pub column: Option<usize>,
    /// Dotted path to the offending node, e.g. `flows.transfer_money.steps[2]`.
    pub path: String,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(source) = &self.source {
            write!(f, "{source}")?;
            if let Some(line) = self.line {
                write!(f, ":{line}")?;
                if let Some(col) = self.column {
                    write!(f, ":{col}")?;
                }
            }
            f.write_str(": ")?;
        }
        if !self.path.is_empty() {
            write!(f, "{}: ", self.path)?;
        }
        f.write_str(&self.message)
    }
}

impl std::error::Error for ParseError {}

/// Parses and merges documents into a single [`FlowBook`]. All errors found
/// across all documents are returned together.
pub fn parse_flowbook(documents: &[SourceDocument]) -> Result<FlowBook, Vec<ParseError>> {
    let mut book = FlowBook::default();
    let mut errors = Vec::new();
    for doc in documents {
        let mut ctx = Ctx::new(doc);
        ctx.document(&mut book);
        errors.extend(ctx.errors);
    }
    if errors.is_empty() {
        Ok(book)
    } else {
        Err(errors)
    }
}

/// Parses a bare mapping of flow id to flow, without the `flows:` wrapper.
pub fn parse_flows(text: &str) -> Result<BTreeMap<String, Flow>, Vec<ParseError>> {
    let doc = SourceDocument::new("<flows>", text);
    let mut ctx = Ctx::new(&doc);
    let mut flows = BTreeMap::new();
    if let Some(root) = ctx.load() {
        if !root.is_null() {
            ctx.flow_map(&root, "", &mut flows, "flow");
        }
    }
    if ctx.errors.is_empty() {
        Ok(flows)
    } else {
        Err(ctx.errors)
    }
}

impl FlowBook {
    /// Parses a single document.
    pub fn from_yaml_str(text: &str) -> Result<FlowBook, Vec<ParseError>> {
        parse_flowbook(&[SourceDocument::new("<input>", text)])
    }
}

struct Ctx<'a> {
    doc: &'a SourceDocument,
    errors: Vec<ParseError>,
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

fn yaml_kind(v: &Yaml) -> &'static str {
    match v {
        Yaml::Null => "null",
        Yaml::Bool(_) => "boolean",
        Yaml::Number(_) => "number",
        Yaml::String(_) => "string",
        Yaml::Sequence(_) => "list",
        Yaml::Mapping(_) => "mapping",
        Yaml::Tagged(_) => "tagged value",
    }
}

pub(crate) fn literal_from_yaml(v: &Yaml) -> Result<Option<Value>, String> {
    match v {
        Yaml::Null => Ok(None),
        Yaml::Bool(b) => Ok(Some(Value::Bool(*b))),
        Yaml::Number(n) => n
            .as_f64()
            .map(|f| Some(Value::Float(f)))
            .ok_or_else(|| "number out of range".to_string()),
        Yaml::String(s) => Ok(Some(Value::Text(s.clone()))),
        other => Err(format!("expected a literal, found a {}", yaml_kind(other))),
    }
}

impl<'a> Ctx<'a> {
    fn new(doc: &'a SourceDocument) -> Self {
        Self {
            doc,
            errors: Vec::new(),
        }
    }

    fn error(&mut self, path: &str, message: impl Into<String>) {
        // best-effort line number: the line declaring the innermost named key
        let line = path
            .rsplit('.')
            .map(|seg| seg.split('[').next().unwrap_or(seg))
            .find(|seg| !seg.is_empty() && *seg != "steps" && *seg != "next")
            .and_then(|key| self.line_of_key(key));
        self.errors.push(ParseError {
            source: Some(self.doc.name.clone()),
            line,
            column: None,
            path: path.to_string(),
            message: message.into(),
        });
    }

    fn line_of_key(&self, key: &str) -> Option<usize> {
        self.doc.text.lines().position(|l| {
            let t = l.trim_start().trim_start_matches("- ");
            t.strip_prefix(key).is_some_and(|rest| rest.starts_with(':'))
        })
        .map(|i| i + 1)
    }

    fn load(&mut self) -> Option<Yaml> {
        match serde_yaml::from_str::<Yaml>(&self.doc.text) {
            Ok(v) => Some(v),
            Err(e) => {
                let (line, column) = e
                    .location()
                    .map_or((None, None), |l| (Some(l.line()), Some(l.column())));
                self.errors.push(ParseError {
                    source: Some(self.doc.name.clone()),
                    line,
                    column,
                    path: String::new(),
                    message: format!("syntax error: {e}"),
                });
                None
            }
        }
    }

    fn mapping<'v>(&mut self, v: &'v Yaml, path: &str) -> Option<&'v Mapping> {
        match v {
            Yaml::Mapping(m) => Some(m),
            other => {
                self.error(path, format!("expected a mapping, found a {}", yaml_kind(other)));
                None
            }
        }
    }

    fn string(&mut self, v: &Yaml, path: &str) -> Option<String> {
        match v {
            Yaml::String(s) => Some(s.clone()),
            Yaml::Number(n) => Some(n.to_string()),
            Yaml::Bool(b) => Some(b.to_string()),
            other => {
                self.error(path, format!("expected text, found a {}", yaml_kind(other)));
                None
            }
        }
    }

    fn identifier(&mut self, v: &Yaml, path: &str) -> Option<String> {
        let s = self.string(v, path)?;
        if is_identifier(&s) {
            Some(s)
        } else {
            self.error(path, format!("invalid identifier `{s}`"));
            None
        }
    }

    fn key<'v>(&mut self, k: &'v Yaml, path: &str) -> Option<&'v str> {
        match k {
            Yaml::String(s) => Some(s.as_str()),
            other => {
                self.error(path, format!("expected a text key, found a {}", yaml_kind(other)));
                None
            }
        }
    }

    fn document(&mut self, book: &mut FlowBook) {
        let Some(root) = self.load() else { return };
        if root.is_null() {
            return;
        }
        let Some(map) = self.mapping(&root, "") else { return };
        for (k, v) in map {
            let Some(key) = self.key(k, "") else { continue };
            match key {
                "flows" => {
                    if !v.is_null() {
                        self.flow_map(v, "flows", &mut book.flows, "flow");
                    }
                }
                "patterns" => {
                    if !v.is_null() {
                        self.flow_map(v, "patterns", &mut book.patterns, "pattern");
                    }
                }
                "slots" => {
                    if !v.is_null() {
                        self.slots(v, &mut book.slots);
                    }
                }
                "responses" => {
                    if !v.is_null() {
                        self.responses(v, &mut book.responses);
                    }
                }
                other => self.error(other, format!("unknown top-level key `{other}`")),
            }
        }
    }

    fn flow_map(&mut self, v: &Yaml, path: &str, out: &mut BTreeMap<String, Flow>, what: &str) {
        let Some(map) = self.mapping(v, path) else { return };
        for (k, fv) in map {
            let Some(id) = self.identifier(k, path) else { continue };
            let fpath = join(path, &id);
            if out.contains_key(&id) {
                self.error(&fpath, format!("duplicate {what} id `{id}`"));
                continue;
            }
            if let Some(flow) = self.flow(&id, fv, &fpath) {
                out.insert(id, flow);
            }
        }
    }

    fn flow(&mut self, id: &str, v: &Yaml, path: &str) -> Option<Flow> {
        let map = self.mapping(v, path)?;
        let mut description = String::new();
        let mut name = None;
        let mut steps = Vec::new();
        let mut ok = true;
        for (k, fv) in map {
            let Some(key) = self.key(k, path) else {
                ok = false;
                continue;
            };
            let kpath = join(path, key);
            match key {
                "description" => match self.string(fv, &kpath) {
                    Some(s) => description = s,
                    None => ok = false,
                },
                "name" => match self.string(fv, &kpath) {
                    Some(s) => name = Some(s),
                    None => ok = false,
                },
                "steps" => match self.steps(fv, &kpath) {
                    Some(s) => steps = s,
                    None => ok = false,
                },
                other => {
                    self.error(&kpath, format!("unknown flow key `{other}`"));
                    ok = false;
                }
            }
        }
        if !ok {
            return None;
        }
        let mut seen = BTreeSet::new();
        check_unique_ids(&steps, &mut seen, &mut |dup| {
            self.error(path, format!("duplicate step id `{dup}`"));
        });
        Some(Flow {
            id: id.to_string(),
            description,
            name,
            steps,
        })
    }

    fn steps(&mut self, v: &Yaml, path: &str) -> Option<Vec<Step>> {
        let Yaml::Sequence(items) = v else {
            self.error(path, format!("expected a list of steps, found a {}", yaml_kind(v)));
            return None;
        };
        let mut out = Vec::with_capacity(items.len());
        let mut ok = true;
        for (i, item) in items.iter().enumerate() {
            match self.step(item, &format!("{path}[{i}]")) {
                Some(s) => out.push(s),
                None => ok = false,
            }
        }
        ok.then_some(out)
    }

    fn step(&mut self, v: &Yaml, path: &str) -> Option<Step> {
        let map = self.mapping(v, path)?;
        let mut id = None;
        let mut collect = None;
        let mut description = None;
        let mut ask_before_filling = None;
        let mut action = None;
        let mut set_slots = None;
        let mut next = NextSpec::Linear;
        let mut ok = true;
        for (k, sv) in map {
            let Some(key) = self.key(k, path) else {
                ok = false;
                continue;
            };
            let kpath = join(path, key);
            match key {
                "id" => {
                    id = self.identifier(sv, &kpath);
                    ok &= id.is_some();
                }
                "collect" => {
                    collect = self.identifier(sv, &kpath);
                    ok &= collect.is_some();
                }
                "description" => {
                    description = self.string(sv, &kpath);
                    ok &= description.is_some();
                }
                "ask_before_filling" => match sv {
                    Yaml::Bool(b) => ask_before_filling = Some(*b),
                    other => {
                        self.error(&kpath, format!("expected true or false, found a {}", yaml_kind(other)));
                        ok = false;
                    }
                },
                "action" => {
                    action = self.action_name(sv, &kpath);
                    ok &= action.is_some();
                }
                "set_slots" => {
                    set_slots = self.assignments(sv, &kpath);
                    ok &= set_slots.is_some();
                }
                "next" => match self.next(sv, &kpath) {
                    Some(n) => next = n,
                    None => ok = false,
                },
                other => {
                    self.error(&kpath, format!("unknown step key `{other}`"));
                    ok = false;
                }
            }
        }
        if !ok {
            return None;
        }
        let kinds = usize::from(collect.is_some())
            + usize::from(action.is_some())
            + usize::from(set_slots.is_some());
        if kinds == 0 {
            self.error(path, "unknown step kind: expected one of `collect`, `action`, `set_slots`");
            return None;
        }
        if kinds > 1 {
            self.error(path, "a step must have exactly one of `collect`, `action`, `set_slots`");
            return None;
        }
        let kind = if let Some(slot) = collect {
            StepKind::Collect {
                slot,
                description,
                ask_before_filling: ask_before_filling.unwrap_or(false),
            }
        } else {
            if description.is_some() || ask_before_filling.is_some() {
                self.error(path, "`description` and `ask_before_filling` are only allowed on collect steps");
                return None;
            }
            match (action, set_slots) {
                (Some(name), _) => StepKind::Action { name },
                (_, Some(assignments)) => StepKind::SetSlots { assignments },
                _ => unreachable!("exactly one kind present"),
            }
        };
        Some(Step { id, kind, next })
    }

    fn action_name(&mut self, v: &Yaml, path: &str) -> Option<String> {
        let s = self.string(v, path)?;
        let valid = match s.strip_prefix(START_FLOW_PREFIX) {
            Some(flow) => is_identifier(flow),
            None => is_identifier(&s),
        };
        if valid {
            Some(s)
        } else {
            self.error(path, format!("invalid action name `{s}`"));
            None
        }
    }

    fn assignments(&mut self, v: &Yaml, path: &str) -> Option<Vec<(String, Option<Value>)>> {
        let Yaml::Sequence(items) = v else {
            self.error(path, format!("expected a list of `slot: value` entries, found a {}", yaml_kind(v)));
            return None;
        };
        let mut out = Vec::new();
        for (i, item) in items.iter().enumerate() {
            let ipath = format!("{path}[{i}]");
            let map = self.mapping(item, &ipath)?;
            if map.len() != 1 {
                self.error(&ipath, "each set_slots entry must have exactly one `slot: value` pair");
                return None;
            }
            let (k, lv) = map.iter().next().expect("len checked");
            let slot = self.identifier(k, &ipath)?;
            match literal_from_yaml(lv) {
                Ok(value) => out.push((slot, value)),
                Err(msg) => {
                    self.error(&ipath, msg);
                    return None;
                }
            }
        }
        Some(out)
    }

    fn next(&mut self, v: &Yaml, path: &str) -> Option<NextSpec> {
        match v {
            Yaml::String(_) => {
                let id = self.identifier(v, path)?;
                Some(NextSpec::Goto(Target::from_id(&id)))
            }
            Yaml::Sequence(items) => {
                if items.is_empty() {
                    self.error(path, "conditional `next` must not be empty");
                    return None;
                }
                let mut clauses = Vec::new();
                let mut otherwise = None;
                for (i, item) in items.iter().enumerate() {
                    let ipath = format!("{path}[{i}]");
                    if otherwise.is_some() {
                        self.error(&ipath, "`else` must be the last clause");
                        return None;
                    }
                    let map = self.mapping(item, &ipath)?;
                    let get = |key: &str| map.get(Yaml::String(key.to_string()));
                    for (k, _) in map {
                        let key = self.key(k, &ipath)?;
                        if !matches!(key, "if" | "then" | "else") {
                            self.error(&ipath, format!("unknown clause key `{key}`"));
                            return None;
                        }
                    }
                    match (get("if"), get("then"), get("else")) {
                        (Some(cond), Some(then), None) => {
                            let text = self.string(cond, &join(&ipath, "if"))?;
                            let condition = match Condition::parse(&text) {
                                Ok(c) => c,
                                Err(msg) => {
                                    self.error(&join(&ipath, "if"), format!("invalid condition: {msg}"));
                                    return None;
                                }
                            };
                            let branch = self.branch(then, &join(&ipath, "then"))?;
                            clauses.push((condition, branch));
                        }
                        (None, None, Some(e)) => {
                            otherwise = Some(self.branch(e, &join(&ipath, "else"))?);
                        }
                        _ => {
                            self.error(&ipath, "a clause is either `if` + `then`, or `else`");
                            return None;
                        }
                    }
                }
                if clauses.is_empty() {
                    self.error(path, "conditional `next` needs at least one `if` clause");
                    return None;
                }
                Some(NextSpec::Conditional { clauses, otherwise })
            }
            other => {
                self.error(path, format!("expected a step id or a list of clauses, found a {}", yaml_kind(other)));
                None
            }
        }
    }

    fn branch(&mut self, v: &Yaml, path: &str) -> Option<Branch> {
        match v {
            Yaml::Sequence(_) => Some(Branch::Inline(self.steps(v, path)?)),
            _ => {
                let id = self.identifier(v, path)?;
                Some(Branch::Goto(Target::from_id(&id)))
            }
        }
    }

    fn slots(&mut self, v: &Yaml, out: &mut BTreeMap<String, SlotDefinition>) {
        let Some(map) = self.mapping(v, "slots") else { return };
        for (k, sv) in map {
            let Some(id) = self.identifier(k, "slots") else { continue };
            let path = join("slots", &id);
            if out.contains_key(&id) {
                self.error(&path, format!("duplicate slot id `{id}`"));
                continue;
            }
            let Some(def) = self.mapping(sv, &path) else { continue };
            let mut slot_type = None;
            let mut allowed_values = Vec::new();
            let mut initial_value = None;
            let mut ok = true;
            for (dk, dv) in def {
                let Some(key) = self.key(dk, &path) else {
                    ok = false;
                    continue;
                };
                let kpath = join(&path, key);
                match key {
                    "type" => match self.string(dv, &kpath) {
                        Some(t) => match SlotType::parse(&t) {
                            Some(st) => slot_type = Some(st),
                            None => {
                                self.error(&kpath, format!("unknown slot type `{t}`"));
                                ok = false;
                            }
                        },
                        None => ok = false,
                    },
                    "allowed_values" => match dv {
                        Yaml::Sequence(items) => {
                            for item in items {
                                match literal_from_yaml(item) {
                                    Ok(Some(value)) => allowed_values.push(value),
                                    Ok(None) => {
                                        self.error(&kpath, "allowed values cannot be null");
                                        ok = false;
                                    }
                                    Err(msg) => {
                                        self.error(&kpath, msg);
                                        ok = false;
                                    }
                                }
                            }
                        }
                        other => {
                            self.error(&kpath, format!("expected a list, found a {}", yaml_kind(other)));
                            ok = false;
                        }
                    },
                    "initial_value" => match literal_from_yaml(dv) {
                        Ok(value) => initial_value = value,
                        Err(msg) => {
                            self.error(&kpath, msg);
                            ok = false;
                        }
                    },
                    other => {
                        self.error(&kpath, format!("unknown slot key `{other}`"));
                        ok = false;
                    }
                }
            }
            let Some(slot_type) = slot_type else {
                if ok {
                    self.error(&path, "missing slot `type`");
                }
                continue;
            };
            if ok {
                out.insert(
                    id.clone(),
                    SlotDefinition {
                        id,
                        slot_type,
                        allowed_values,
                        initial_value,
                    },
                );
            }
        }
    }

    fn responses(&mut self, v: &Yaml, out: &mut BTreeMap<String, ResponseTemplate>) {
        let Some(map) = self.mapping(v, "responses") else { return };
        for (k, rv) in map {
            let Some(id) = self.identifier(k, "responses") else { continue };
            let path = join("responses", &id);
            if out.contains_key(&id) {
                self.error(&path, format!("duplicate response id `{id}`"));
                continue;
            }
            let Yaml::Sequence(items) = rv else {
                self.error(&path, format!("expected a list of variants, found a {}", yaml_kind(rv)));
                continue;
            };
            let mut variants = Vec::new();
            let mut ok = true;
            for (i, item) in items.iter().enumerate() {
                let ipath = format!("{path}[{i}]");
                match item {
                    Yaml::Mapping(m) => {
                        let mut text = None;
                        for (vk, vv) in m {
                            match self.key(vk, &ipath) {
                                Some("text") => text = self.string(vv, &join(&ipath, "text")),
                                Some(other) => {
                                    self.error(&ipath, format!("unknown response key `{other}`"));
                                    ok = false;
                                }
                                None => ok = false,
                            }
                        }
                        match text {
                            Some(t) => variants.push(t),
                            None => {
                                if ok {
                                    self.error(&ipath, "response variant needs `text`");
                                }
                                ok = false;
                            }
                        }
                    }
                    Yaml::String(s) => variants.push(s.clone()),
                    other => {
                        self.error(&ipath, format!("expected a variant, found a {}", yaml_kind(other)));
                        ok = false;
                    }
                }
            }
            if ok {
                out.insert(id.clone(), ResponseTemplate { id, variants });
            }
        }
    }
}

fn check_unique_ids(steps: &[Step], seen: &mut BTreeSet<String>, on_dup: &mut dyn FnMut(&str)) {
    for step in steps {
        if let Some(id) = &step.id {
            if !seen.insert(id.clone()) {
                on_dup(id);
            }
        }
        if let NextSpec::Conditional { clauses, otherwise } = &step.next {
            for branch in clauses.iter().map(|(_, b)| b).chain(otherwise.iter()) {
                if let Branch::Inline(inner) = branch {
                    check_unique_ids(inner, seen, on_dup);
                }
            }
        }
    }
}
